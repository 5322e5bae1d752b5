#pragma once

// Robustness benchmark: builds per-sample training targets for each
// labeling method, trains LeNet students on them, evaluates the students
// over a corruption grid, and writes the comparison tables.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qplr/datakit.hpp"
#include "qplr/labeler.hpp"
#include "qplr/neural.hpp"
#include "qplr/vqc.hpp"

namespace qplr::bench {

// Labeling methods under comparison. M1 trains on hard one-hot labels,
// M2 on uniformly smoothed labels, M3 on quantum soft labels, M4 on
// confidence-filtered quantum labels, BNN on Monte-Carlo-dropout teacher
// averages, RS on noise-averaged teacher predictions.
enum class Method { M1, M2, M3, M4, BNN, RS };

std::string to_string(Method m);
Method method_from_string(const std::string &s);

/// One labeling recipe: the method family plus its knobs. Fields that a
/// method does not use are ignored for it.
struct MethodSpec {
    Method method = Method::M1;
    double epsilon = 0.1;      // M2 smoothing strength, in [0, 1)
    double threshold = 0.9;    // M4 confidence cutoff, in (0, 1]
    double dropout_rate = 0.5; // BNN teacher dropout rate
    double noise_std = 0.05;   // RS input noise level
    int passes = 20;           // BNN / RS averaging passes

    void validate() const;
    nlohmann::json to_json() const;
    static MethodSpec from_json(const nlohmann::json &j);
};

/// Student training hyperparameters. Teachers for the BNN baseline reuse
/// this config with the method's dropout rate.
struct StudentConfig {
    int epochs = 5;
    int batch_size = 64;
    double learning_rate = 1e-4;
    double dropout_rate = 0.0;

    nlohmann::json to_json() const;
    static StudentConfig from_json(const nlohmann::json &j);
};

/// Per-sample training targets plus the mask of samples to train on.
/// Rows of targets lie on the probability simplex; mask is all ones for
/// every method except M4.
struct TargetSet {
    neural::Tensor targets;         // [N, K]
    std::vector<std::uint8_t> mask; // length N, 1 = train on this sample
    std::size_t masked_out = 0;     // number of zeros in mask
};

/// External inputs a method may need: quantum labels for M3/M4, a trained
/// teacher network for BNN/RS. Leave unused members null.
struct LabelArtifacts {
    const labeler::SoftLabelSet *soft_labels = nullptr;
    const neural::Model *teacher = nullptr;
};

/// Builds the training targets for one method over a clean dataset.
/// Throws ConfigError when a required artifact is missing or the labels
/// do not belong to this dataset.
TargetSet build_targets(const MethodSpec &method,
                        const datakit::ImageDataset &data,
                        const LabelArtifacts &artifacts, int num_classes,
                        std::uint64_t seed, std::size_t num_threads = 0);

/// A trained student and its training history.
struct StudentRun {
    neural::Model model;
    labeler::TrainLog log;
};

/// Trains a LeNet student with soft cross-entropy on the masked-in
/// samples. Throws TrainingError when the loss leaves the finite range.
StudentRun train_student(const neural::Tensor &targets,
                         std::span<const std::uint8_t> mask,
                         const datakit::ImageDataset &data,
                         const StudentConfig &config, std::uint64_t seed);

/// One low-confidence test sample: its two most probable classes.
struct Exemplar {
    std::size_t sample_index = 0;
    int true_label = 0;
    int top1 = 0;
    double p1 = 0.0;
    int top2 = 0;
    double p2 = 0.0;
};

/// Evaluation under one corruption setting.
struct CellReport {
    datakit::CorruptionSpec corruption;
    double accuracy = 0.0;
    std::vector<long> confusion; // [K*K] row-major, row = true class
    double mean_entropy = 0.0;   // natural-log predictive entropy
    std::vector<Exemplar> lowest_confidence;

    long confusion_at(int true_class, int predicted, int k) const {
        return confusion[static_cast<std::size_t>(true_class) *
                             static_cast<std::size_t>(k) +
                         static_cast<std::size_t>(predicted)];
    }
};

struct EvalReport {
    int num_classes = 0;
    std::vector<CellReport> cells;

    nlohmann::json to_json() const;
    /// Inverse of to_json; throws IngestionError on malformed input.
    static EvalReport from_json(const nlohmann::json &j);
};

/// Runs the model over every corruption cell of the grid. Corruption
/// noise is drawn from per-cell streams derived from seed, so the report
/// is a pure function of (model, test, grid, seed).
EvalReport evaluate_grid(const neural::Model &model,
                         const datakit::ImageDataset &test,
                         const std::vector<datakit::CorruptionSpec> &grid,
                         std::uint64_t seed, int num_classes,
                         std::size_t num_threads = 0, int num_exemplars = 8);

/// One evaluated method, named for the report tables.
struct MethodReport {
    std::string method;
    EvalReport eval;
};

// Column orders of the emitted CSV files.
extern const char *const kResultsCsvHeader;
extern const char *const kExemplarsCsvHeader;

/// Writes results.csv, results.json, one confusion CSV per (method,
/// cell), and exemplars.csv into out_dir. Output bytes depend only on
/// the reports, so identical runs produce identical files.
void write_report(const std::vector<MethodReport> &methods,
                  const std::string &out_dir);

/// Full experiment description, JSON-loadable. Unknown fields keep their
/// defaults; validate() rejects inconsistent settings.
struct ExperimentConfig {
    std::string dataset = "mnist"; // "mnist" (IDX files) or "blobs"
    std::size_t train_subsample = 5000; // 0 = whole split
    std::size_t test_subsample = 2000;  // 0 = whole split
    int num_classes = 10;
    int blob_image_size = 4; // side length for the synthetic dataset
    std::uint64_t master_seed = 1;
    std::size_t num_threads = 0;

    int circuit_qubits = 10;
    int circuit_layers = 3;
    vqc::Entanglement circuit_topology = vqc::Entanglement::Ring;
    vqc::Rotation circuit_rotation = vqc::Rotation::Ry;
    labeler::TrainConfig labeler_train;
    std::uint64_t shots = 1000;
    std::string labels_path; // nonempty: load labels instead of generating

    std::vector<MethodSpec> methods;
    StudentConfig student;
    std::vector<datakit::CorruptionSpec> grid;

    /// Circuit with empty theta; the labeler factory draws the angles.
    vqc::CircuitSpec circuit() const;
    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json &j);
};

/// Desk-scale defaults: 5000/2000 MNIST subsets, all six methods, noise
/// grid std {0 .. 0.5} crossed with rotation {0, 20}.
ExperimentConfig desk_defaults();

/// Trains whatever the method needs (a teacher for BNN/RS), builds its
/// targets, and trains its student. soft may be null for methods that do
/// not read quantum labels. Sub-seeds are derived from master_seed.
struct MethodRun {
    MethodSpec method;
    StudentRun student;
    std::size_t masked_out = 0;
};
MethodRun run_method(const MethodSpec &method,
                     const datakit::ImageDataset &train,
                     const labeler::SoftLabelSet *soft,
                     const StudentConfig &config, int num_classes,
                     std::uint64_t master_seed, std::size_t num_threads = 0);

/// Labeler architecture sweep: trains one labeler per (qubits, layers,
/// topology) combination on the given data and records the outcome.
struct SweepPoint {
    int qubits = 0;
    int layers = 0;
    vqc::Entanglement topology = vqc::Entanglement::Ring;
    double final_loss = 0.0;
    double final_accuracy = 0.0;
};
std::vector<SweepPoint>
sweep_labeler_grid(const std::vector<int> &qubit_counts,
                   const std::vector<int> &layer_counts,
                   const std::vector<vqc::Entanglement> &topologies,
                   const datakit::ImageDataset &train, int num_classes,
                   const labeler::TrainConfig &config, std::uint64_t seed);

} // namespace qplr::bench
