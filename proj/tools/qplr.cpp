// Command-line driver for the robustness benchmark. Every subcommand reads
// one JSON experiment config, derives its randomness from the master seed,
// writes its artifacts under --out and finishes by dropping a run.json
// manifest there.
//
// Exit codes: 0 success, 2 configuration error, 3 training divergence,
// 4 data ingestion failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qplr/bench.hpp"
#include "qplr/datakit.hpp"
#include "qplr/errors.hpp"
#include "qplr/labeler.hpp"
#include "qplr/neural.hpp"
#include "qplr/rng.hpp"

namespace fs = std::filesystem;
using namespace qplr;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::string data_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

std::string resolve_data_dir(const GlobalOptions &g) {
    if (!g.data_dir.empty())
        return g.data_dir;
    const char *env = std::getenv("QPLR_DATA_DIR");
    return env != nullptr ? env : "data/mnist";
}

nlohmann::json read_config_json(const std::string &path) {
    if (path.empty())
        return nlohmann::json::object();
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("config file " + path + " is not valid JSON: " +
                          e.what());
    }
}

bench::ExperimentConfig load_config(const GlobalOptions &g,
                                    const nlohmann::json &raw) {
    bench::ExperimentConfig cfg = bench::ExperimentConfig::from_json(raw);
    if (g.seed_given)
        cfg.master_seed = g.seed;
    return cfg;
}

/// Train or test split as the config describes it, subsampled.
datakit::ImageDataset load_split(const bench::ExperimentConfig &cfg,
                                 const std::string &data_dir,
                                 const std::string &split) {
    const std::size_t want =
        split == "train" ? cfg.train_subsample : cfg.test_subsample;
    if (cfg.dataset == "blobs") {
        const std::size_t n = want == 0 ? 256 : want;
        const int per_class =
            static_cast<int>((n + cfg.num_classes - 1) / cfg.num_classes);
        const datakit::ImageDataset full = datakit::synthetic_blobs(
            cfg.num_classes, per_class, cfg.blob_image_size,
            rng::derive_seed(cfg.master_seed, "blob-" + split));
        return datakit::subset(full, n);
    }
    datakit::ImageDataset ds = datakit::load_mnist_split(data_dir, split);
    if (want != 0 && want < ds.size())
        ds = datakit::subset(ds, want);
    return ds;
}

std::string git_describe() {
    FILE *pipe = popen("git describe --always --dirty 2>/dev/null", "r");
    if (pipe == nullptr)
        return "unknown";
    char buf[256];
    std::string out;
    while (std::fgets(buf, sizeof buf, pipe) != nullptr)
        out += buf;
    const int status = pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r'))
        out.pop_back();
    return status == 0 && !out.empty() ? out : "unknown";
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IngestionError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out)
        throw IngestionError("failed while writing " + path.string());
}

/// Manifest of one invocation: config echo, seed fan-out, provenance.
struct Manifest {
    std::string command;
    const GlobalOptions *globals = nullptr;
    const bench::ExperimentConfig *cfg = nullptr;
    std::string started = utc_now();
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    std::vector<std::string> outputs;

    void write() const {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        const std::uint64_t master = cfg->master_seed;
        const nlohmann::json j = {
            {"command", command},
            {"config", cfg->to_json()},
            {"config_path", globals->config_path},
            {"data_dir", resolve_data_dir(*globals)},
            {"out_dir", globals->out_dir},
            {"master_seed", master},
            {"seeds",
             {{"labeler-train", rng::derive_seed(master, "labeler-train")},
              {"label-gen", rng::derive_seed(master, "label-gen")},
              {"student-train", rng::derive_seed(master, "student-train")},
              {"eval-noise", rng::derive_seed(master, "eval-noise")}}},
            {"git", git_describe()},
            {"started_utc", started},
            {"wall_clock_seconds", elapsed},
            {"outputs", outputs}};
        write_text(fs::path(globals->out_dir) / "run.json", j.dump(2) + "\n");
    }
};

bench::MethodSpec find_method(const bench::ExperimentConfig &cfg,
                              const std::string &name) {
    const bench::Method wanted = bench::method_from_string(name);
    for (const bench::MethodSpec &m : cfg.methods)
        if (m.method == wanted)
            return m;
    throw ConfigError("method " + name + " is not part of this config");
}

int cmd_train_labeler(const GlobalOptions &g, const nlohmann::json &raw) {
    const bench::ExperimentConfig cfg = load_config(g, raw);
    Manifest manifest{.command = "train-labeler", .globals = &g, .cfg = &cfg};
    fs::create_directories(g.out_dir);

    const datakit::ImageDataset train =
        load_split(cfg, resolve_data_dir(g), "train");
    const std::uint64_t seed =
        rng::derive_seed(cfg.master_seed, "labeler-train");
    labeler::HybridLabeler lab =
        labeler::make_labeler(static_cast<int>(train.pixels_per_image()),
                              cfg.circuit(), cfg.num_classes, seed);
    labeler::TrainConfig train_cfg = cfg.labeler_train;
    if (train_cfg.num_threads == 0)
        train_cfg.num_threads = cfg.num_threads;
    const labeler::TrainLog log = labeler::train_labeler(lab, train, train_cfg, seed);

    const std::string prefix = (fs::path(g.out_dir) / "labeler").string();
    labeler::save_labeler(lab, prefix);
    write_text(fs::path(g.out_dir) / "labeler_log.json",
               log.to_json().dump(2) + "\n");
    manifest.outputs = {"labeler.labeler.json", "labeler.pre.ckpt",
                        "labeler.post.ckpt", "labeler_log.json"};
    manifest.write();
    std::cout << "trained labeler on " << train.size()
              << " samples: final accuracy " << log.final_accuracy
              << ", final loss " << log.final_loss << "\n";
    return 0;
}

int cmd_gen_labels(const GlobalOptions &g, const nlohmann::json &raw,
                   const std::string &labeler_prefix,
                   const std::string &labels_out, bool exact) {
    const bench::ExperimentConfig cfg = load_config(g, raw);
    Manifest manifest{.command = "gen-labels", .globals = &g, .cfg = &cfg};
    fs::create_directories(g.out_dir);

    const std::string prefix =
        labeler_prefix.empty() ? (fs::path(g.out_dir) / "labeler").string()
                               : labeler_prefix;
    labeler::HybridLabeler lab = labeler::load_labeler(prefix);
    if (lab.num_classes != cfg.num_classes)
        throw ConfigError("labeler at " + prefix + " has " +
                          std::to_string(lab.num_classes) +
                          " classes but the config uses " +
                          std::to_string(cfg.num_classes));
    const datakit::ImageDataset train =
        load_split(cfg, resolve_data_dir(g), "train");
    const labeler::SoftLabelSet labels = labeler::generate_soft_labels(
        lab, train, cfg.shots, rng::derive_seed(cfg.master_seed, "label-gen"),
        exact, cfg.num_threads);
    const std::string path =
        labels_out.empty() ? (fs::path(g.out_dir) / "labels.csv").string()
                           : labels_out;
    labeler::save_soft_labels(labels, path);
    manifest.outputs = {fs::path(path).filename().string()};
    manifest.write();

    double mean_conf = 0.0;
    for (const labeler::SoftLabel &l : labels.labels)
        mean_conf += l.confidence;
    mean_conf /= static_cast<double>(labels.labels.size());
    std::cout << "generated " << labels.labels.size() << " soft labels ("
              << (exact ? "exact probabilities" : std::to_string(cfg.shots) +
                                                      " shots per sample")
              << "), mean confidence " << mean_conf << "\n";
    return 0;
}

int cmd_train_student(const GlobalOptions &g, const nlohmann::json &raw,
                      const std::string &method_name,
                      const std::string &labels_path) {
    const bench::ExperimentConfig cfg = load_config(g, raw);
    Manifest manifest{.command = "train-student", .globals = &g, .cfg = &cfg};
    fs::create_directories(g.out_dir);

    const bench::MethodSpec method = find_method(cfg, method_name);
    const datakit::ImageDataset train =
        load_split(cfg, resolve_data_dir(g), "train");

    labeler::SoftLabelSet soft;
    const labeler::SoftLabelSet *soft_ptr = nullptr;
    if (method.method == bench::Method::M3 ||
        method.method == bench::Method::M4) {
        const std::string path =
            labels_path.empty() ? (fs::path(g.out_dir) / "labels.csv").string()
                                : labels_path;
        soft = labeler::load_soft_labels(path);
        soft_ptr = &soft;
    }

    const bench::MethodRun run =
        bench::run_method(method, train, soft_ptr, cfg.student,
                          cfg.num_classes, cfg.master_seed, cfg.num_threads);

    const std::string ckpt_name = "student_" + method_name + ".ckpt";
    const std::string log_name = "student_" + method_name + "_log.json";
    neural::Model model = run.student.model;
    neural::save_checkpoint(model, (fs::path(g.out_dir) / ckpt_name).string(),
                            {{"method", method_name},
                             {"masked_out", run.masked_out}});
    nlohmann::json log_json = run.student.log.to_json();
    log_json["method"] = method_name;
    log_json["masked_out"] = run.masked_out;
    write_text(fs::path(g.out_dir) / log_name, log_json.dump(2) + "\n");
    manifest.outputs = {ckpt_name, log_name};
    manifest.write();
    std::cout << "trained " << method_name << " student on "
              << train.size() - run.masked_out << " of " << train.size()
              << " samples: train accuracy " << run.student.log.final_accuracy
              << "\n";
    return 0;
}

int cmd_evaluate(const GlobalOptions &g, const nlohmann::json &raw,
                 const std::string &method_name,
                 const std::string &student_path) {
    const bench::ExperimentConfig cfg = load_config(g, raw);
    Manifest manifest{.command = "evaluate", .globals = &g, .cfg = &cfg};
    fs::create_directories(g.out_dir);

    bench::method_from_string(method_name); // name sanity before file work
    const std::string path =
        student_path.empty()
            ? (fs::path(g.out_dir) / ("student_" + method_name + ".ckpt"))
                  .string()
            : student_path;
    neural::Model model = neural::make_lenet(0, 0.0, cfg.num_classes);
    neural::load_checkpoint(model, path);

    const datakit::ImageDataset test =
        load_split(cfg, resolve_data_dir(g), "test");
    const bench::EvalReport report = bench::evaluate_grid(
        model, test, cfg.grid, rng::derive_seed(cfg.master_seed, "eval-noise"),
        cfg.num_classes, cfg.num_threads);

    const std::string eval_name = "eval_" + method_name + ".json";
    const nlohmann::json j = {{"method", method_name},
                              {"eval", report.to_json()}};
    write_text(fs::path(g.out_dir) / eval_name, j.dump(2) + "\n");
    manifest.outputs = {eval_name};
    manifest.write();
    std::cout << "evaluated " << method_name << " over " << cfg.grid.size()
              << " grid cells on " << test.size()
              << " test samples: clean-cell accuracy "
              << report.cells.front().accuracy << "\n";
    return 0;
}

int cmd_report(const GlobalOptions &g, const nlohmann::json &raw) {
    const bench::ExperimentConfig cfg = load_config(g, raw);
    Manifest manifest{.command = "report", .globals = &g, .cfg = &cfg};
    fs::create_directories(g.out_dir);

    std::vector<bench::MethodReport> methods;
    for (const bench::MethodSpec &m : cfg.methods) {
        const std::string name = bench::to_string(m.method);
        const fs::path path = fs::path(g.out_dir) / ("eval_" + name + ".json");
        std::ifstream in(path);
        if (!in)
            throw IngestionError("missing evaluation " + path.string() +
                                 "; run `qplr evaluate --method " + name +
                                 "` first");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception &e) {
            throw IngestionError("malformed evaluation " + path.string() +
                                 ": " + e.what());
        }
        if (!j.contains("eval"))
            throw IngestionError("malformed evaluation " + path.string() +
                                 ": no \"eval\" object");
        methods.push_back({name, bench::EvalReport::from_json(j.at("eval"))});
    }
    bench::write_report(methods, g.out_dir);

    std::vector<std::string> outputs = {"results.csv", "results.json",
                                        "exemplars.csv"};
    manifest.outputs = outputs;
    manifest.write();
    std::cout << "wrote comparison tables for " << methods.size()
              << " methods to " << g.out_dir << "\n";
    return 0;
}

int cmd_sweep(const GlobalOptions &g, const nlohmann::json &raw) {
    const bench::ExperimentConfig cfg = load_config(g, raw);
    Manifest manifest{.command = "sweep", .globals = &g, .cfg = &cfg};
    fs::create_directories(g.out_dir);

    std::vector<int> qubits = {8, 10, 12};
    std::vector<int> layers = {1, 3, 5};
    std::vector<vqc::Entanglement> topologies = {vqc::Entanglement::Linear,
                                                 vqc::Entanglement::Ring,
                                                 vqc::Entanglement::Full};
    if (raw.contains("sweep")) {
        try {
            const nlohmann::json &s = raw.at("sweep");
            if (s.contains("qubits"))
                qubits = s.at("qubits").get<std::vector<int>>();
            if (s.contains("layers"))
                layers = s.at("layers").get<std::vector<int>>();
            if (s.contains("topologies")) {
                topologies.clear();
                for (const nlohmann::json &t : s.at("topologies"))
                    topologies.push_back(vqc::entanglement_from_string(
                        t.get<std::string>()));
            }
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError(std::string("malformed sweep settings: ") +
                              e.what());
        }
    }

    const datakit::ImageDataset train =
        load_split(cfg, resolve_data_dir(g), "train");
    labeler::TrainConfig train_cfg = cfg.labeler_train;
    if (train_cfg.num_threads == 0)
        train_cfg.num_threads = cfg.num_threads;
    const std::vector<bench::SweepPoint> points = bench::sweep_labeler_grid(
        qubits, layers, topologies, train, cfg.num_classes, train_cfg,
        rng::derive_seed(cfg.master_seed, "sweep"));

    std::string csv = "qubits,layers,topology,final_loss,final_accuracy\n";
    char buf[64];
    for (const bench::SweepPoint &p : points) {
        std::snprintf(buf, sizeof buf, "%.9g", p.final_loss);
        csv += std::to_string(p.qubits) + "," + std::to_string(p.layers) +
               "," + vqc::to_string(p.topology) + "," + buf;
        std::snprintf(buf, sizeof buf, "%.9g", p.final_accuracy);
        csv += std::string(",") + buf + "\n";
    }
    write_text(fs::path(g.out_dir) / "sweep.csv", csv);
    manifest.outputs = {"sweep.csv"};
    manifest.write();
    std::cout << "swept " << points.size() << " labeler configurations\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"hybrid quantum-classical soft-label robustness benchmark"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_path,
                   "JSON experiment config (defaults apply when omitted)");
    auto *seed_opt =
        app.add_option("--seed", g.seed, "master seed, overrides the config");
    app.add_option("--out", g.out_dir, "output directory (default: out)");
    app.add_option("--data-dir", g.data_dir,
                   "dataset directory (default: $QPLR_DATA_DIR or data/mnist)");

    CLI::App *train_labeler = app.add_subcommand(
        "train-labeler", "train the hybrid quantum labeler on the train split");
    std::string labeler_prefix, labels_out, labels_path, method_name,
        student_path;
    bool exact = false;
    CLI::App *gen_labels = app.add_subcommand(
        "gen-labels", "run the trained labeler over the train split");
    gen_labels->add_option("--labeler", labeler_prefix,
                           "labeler checkpoint prefix (default: <out>/labeler)");
    gen_labels->add_option("--labels", labels_out,
                           "output label file (default: <out>/labels.csv)");
    gen_labels->add_flag("--exact", exact,
                         "store exact Born probabilities instead of "
                         "shot-sampled frequencies");
    CLI::App *train_student = app.add_subcommand(
        "train-student", "train one student on the chosen method's targets");
    train_student->add_option("--method", method_name,
                              "method name: M1, M2, M3, M4, BNN or RS")
        ->required();
    train_student->add_option("--labels", labels_path,
                              "quantum label file for M3/M4 "
                              "(default: <out>/labels.csv)");
    CLI::App *evaluate = app.add_subcommand(
        "evaluate", "run one student over the corruption grid");
    evaluate->add_option("--method", method_name, "method name")->required();
    evaluate->add_option("--student", student_path,
                         "student checkpoint "
                         "(default: <out>/student_<method>.ckpt)");
    CLI::App *report = app.add_subcommand(
        "report", "assemble the comparison tables from the evaluations");
    CLI::App *sweep = app.add_subcommand(
        "sweep", "train labelers over a qubit/layer/topology grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    g.seed_given = seed_opt->count() > 0;
    try {
        const nlohmann::json raw = read_config_json(g.config_path);
        if (train_labeler->parsed())
            return cmd_train_labeler(g, raw);
        if (gen_labels->parsed())
            return cmd_gen_labels(g, raw, labeler_prefix, labels_out, exact);
        if (train_student->parsed())
            return cmd_train_student(g, raw, method_name, labels_path);
        if (evaluate->parsed())
            return cmd_evaluate(g, raw, method_name, student_path);
        if (report->parsed())
            return cmd_report(g, raw);
        if (sweep->parsed())
            return cmd_sweep(g, raw);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError &e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const IngestionError &e) {
        std::cerr << "ingestion error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
