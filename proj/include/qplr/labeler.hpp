#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qplr/datakit.hpp"
#include "qplr/neural.hpp"
#include "qplr/vqc.hpp"

namespace qplr::labeler {

/// Pre-network -> variational circuit -> post-network classifier. The
/// pre-network squashes pixels into encoding angles, the circuit's Born
/// distribution feeds the post-network, and softmax of the post-network
/// logits is the class distribution P(k|x).
struct HybridLabeler {
    neural::Model pre_net;    // input_dim -> 128 -> 128 -> n, PiSigmoid out
    vqc::CircuitSpec circuit; // angle encoding
    neural::Model post_net;   // 2^n -> 128 -> K, raw logits
    int input_dim = 0;
    int num_classes = 0;
};

/// Builds a labeler with freshly initialized networks; requires angle
/// encoding and 2^n >= num_classes. theta is drawn uniform in [-pi, pi)
/// when the circuit arrives without angles.
HybridLabeler make_labeler(int input_dim, vqc::CircuitSpec circuit,
                           int num_classes, std::uint64_t init_seed);

/// The 10-qubit, 3-layer ring circuit the MNIST runs use (theta unset).
vqc::CircuitSpec mnist_circuit();

/// Exact class distribution softmax(post(Born(pre(x)))). Non-const because
/// forward passes refresh layer caches.
std::vector<double> class_probabilities(HybridLabeler &l,
                                        std::span<const float> image);

/// Same pipeline with the Born distribution estimated from `shots`
/// projective measurements.
std::vector<double> sampled_class_probabilities(HybridLabeler &l,
                                                std::span<const float> image,
                                                std::uint64_t shots,
                                                std::uint64_t seed);

struct TrainConfig {
    int epochs = 3;
    int batch_size = 64;
    double learning_rate = 1e-3;
    /// The learning rate is multiplied by lr_drop_factor for every epoch
    /// after this one (1-based).
    int lr_drop_after_epoch = 3;
    double lr_drop_factor = 0.1;
    /// Stop after this many optimizer steps; 0 runs all epochs.
    long max_steps = 0;
    std::size_t num_threads = 0; // 0 = hardware concurrency

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json &j);
};

struct EpochStats {
    int epoch = 0; // 1-based
    double mean_loss = 0.0;
    double accuracy = 0.0;
    double learning_rate = 0.0;
};

struct TrainLog {
    double initial_loss = 0.0; // full-pass mean loss before the first step
    std::vector<EpochStats> epochs;
    long steps = 0;
    double final_loss = 0.0;     // last epoch's mean loss
    double final_accuracy = 0.0; // full-pass accuracy after training
    nlohmann::json to_json() const;
};

/// One forward/backward pass over a batch: accumulates network parameter
/// gradients in place and returns the mean loss, the argmax hit count and
/// the batch-mean theta gradient. x is [B, input_dim], targets [B, K].
struct BatchGradients {
    double loss = 0.0;
    int correct = 0;
    std::vector<double> theta_grad; // length circuit.num_theta()
};
BatchGradients backprop_batch(HybridLabeler &l, const neural::Tensor &x,
                              const neural::Tensor &targets,
                              std::size_t num_threads = 1);

/// Joint Adam training of pre-network, theta and post-network on the
/// one-hot cross-entropy of the dataset's hard labels. Exact circuit
/// probabilities throughout; shots only enter label generation.
TrainLog train_labeler(HybridLabeler &l, const datakit::ImageDataset &data,
                       const TrainConfig &config, std::uint64_t seed);

/// One per-sample class distribution with bookkeeping.
struct SoftLabel {
    std::uint64_t sample_index = 0;
    int hard_label = 0;
    std::vector<double> probs; // length K, sums to 1 within 1e-8
    double confidence = 0.0;   // max_k probs[k], in [1/K, 1]
};

struct SoftLabelSet {
    int num_classes = 0;
    std::uint64_t shots = 0;  // 0 records exact-probability generation
    std::string circuit_hash; // content hash of the generating circuit
    std::uint64_t seed = 0;   // generation seed; not part of the file format
    std::vector<SoftLabel> labels;

    /// Checks the per-sample invariants above; throws ContractViolation.
    void validate() const;
};

/// Runs the labeler over every sample. Shot streams are seeded from the
/// image content hash, so duplicated samples receive identical labels and
/// generation order does not matter. exact=true bypasses sampling and
/// records shots=0.
SoftLabelSet generate_soft_labels(const HybridLabeler &l,
                                  const datakit::ImageDataset &data,
                                  std::uint64_t shots, std::uint64_t seed,
                                  bool exact = false,
                                  std::size_t num_threads = 0);

/// Subset with confidence >= threshold, original order preserved. An empty
/// result is legal (the caller decides whether to warn).
struct ConfidenceFilter {
    SoftLabelSet kept;
    double retained_fraction = 0.0;
    std::vector<std::uint8_t> keep_mask; // per input label, 1 = retained
};
ConfidenceFilter filter_by_confidence(const SoftLabelSet &labels,
                                      double threshold);

/// Text format: one header line
///   qplr-labels v1, K=<K>, M=<shots>, circuit=<hash>
/// then CSV rows sample_index,hard_label,p_0..p_{K-1},confidence with
/// probabilities at 9 significant digits. Write -> read -> write is
/// byte-identical.
void save_soft_labels(const SoftLabelSet &set, const std::string &path);
SoftLabelSet load_soft_labels(const std::string &path);

/// Persists <prefix>.labeler.json (dimensions + circuit) plus
/// <prefix>.pre.ckpt / <prefix>.post.ckpt network checkpoints.
void save_labeler(HybridLabeler &l, const std::string &prefix);
HybridLabeler load_labeler(const std::string &prefix);

} // namespace qplr::labeler
