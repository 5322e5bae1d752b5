#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qplr/bench.hpp"
#include "qplr/datakit.hpp"
#include "qplr/errors.hpp"
#include "qplr/labeler.hpp"
#include "qplr/neural.hpp"
#include "qplr/rng.hpp"

namespace fs = std::filesystem;
using namespace qplr;
using bench::Method;
using bench::MethodSpec;
using neural::Tensor;

namespace {

std::string data_dir() {
    const char *env = std::getenv("QPLR_DATA_DIR");
    return env != nullptr ? env : "data/mnist";
}

const datakit::ImageDataset &mnist_train_pool() {
    static const datakit::ImageDataset ds =
        datakit::load_mnist_split(data_dir(), "train");
    return ds;
}

datakit::ImageDataset mnist_subset(std::size_t n) {
    return datakit::subset(mnist_train_pool(), n);
}

/// Minimal dataset with chosen labels; pixel content varies per sample.
datakit::ImageDataset tiny_set(const std::vector<int> &labels) {
    datakit::ImageDataset ds;
    ds.rows = 2;
    ds.cols = 2;
    ds.labels = labels;
    ds.pixels.assign(labels.size() * 4, 0.0f);
    for (std::size_t i = 0; i < labels.size(); ++i)
        ds.pixels[i * 4] =
            static_cast<float>(i + 1) / static_cast<float>(labels.size() + 1);
    ds.name = "tiny";
    ds.split = "train";
    return ds;
}

/// Soft label set consistent with ds: rows are given distributions.
labeler::SoftLabelSet
hand_labels(const datakit::ImageDataset &ds,
            const std::vector<std::vector<double>> &probs) {
    labeler::SoftLabelSet set;
    set.num_classes = static_cast<int>(probs.front().size());
    set.shots = 100;
    set.circuit_hash = "0123456789abcdef";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        labeler::SoftLabel l;
        l.sample_index = i;
        l.hard_label = ds.labels[i];
        l.probs = probs[i];
        l.confidence = *std::max_element(probs[i].begin(), probs[i].end());
        set.labels.push_back(std::move(l));
    }
    return set;
}

/// Independent clean-evaluation oracle: full-batch forward, softmax rows,
/// accuracy / entropy accumulated in sample order.
struct CleanEval {
    double accuracy = 0.0;
    double mean_entropy = 0.0;
};
CleanEval clean_eval(neural::Model &model, const datakit::ImageDataset &ds,
                     int k) {
    std::vector<int> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    const Tensor logits = model.forward(datakit::image_batch(ds, idx), false);
    long correct = 0;
    double entropy = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::span<const double> row{
            logits.data.data() + i * static_cast<std::size_t>(k),
            static_cast<std::size_t>(k)};
        const std::vector<double> p = neural::softmax(row);
        if (neural::argmax(p) == ds.labels[i])
            ++correct;
        double h = 0.0;
        for (const double v : p)
            if (v > 0.0)
                h -= v * std::log(v);
        entropy += h;
    }
    const double n = static_cast<double>(ds.size());
    return {static_cast<double>(correct) / n, entropy / n};
}

std::string slurp(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("method names round-trip and knob validation rejects bad values") {
    for (const Method m : {Method::M1, Method::M2, Method::M3, Method::M4,
                           Method::BNN, Method::RS})
        CHECK(bench::method_from_string(bench::to_string(m)) == m);
    CHECK_THROWS_AS(bench::method_from_string("Q7"), ConfigError);

    MethodSpec spec;
    spec.method = Method::M2;
    spec.epsilon = 1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.epsilon = -0.1;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.epsilon = 0.0;
    CHECK_NOTHROW(spec.validate());

    spec = MethodSpec{};
    spec.method = Method::M4;
    spec.threshold = 0.0; // the config contract excludes 0 even though the
                          // filter itself accepts it
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.threshold = 1.5;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.threshold = 1.0;
    CHECK_NOTHROW(spec.validate());

    spec = MethodSpec{};
    spec.method = Method::BNN;
    spec.passes = 0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.passes = 1;
    spec.dropout_rate = 1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = MethodSpec{};
    spec.method = Method::RS;
    spec.noise_std = -0.5;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    MethodSpec m2;
    m2.method = Method::M2;
    m2.epsilon = 0.3;
    const MethodSpec back = MethodSpec::from_json(m2.to_json());
    CHECK(back.method == Method::M2);
    CHECK(back.epsilon == 0.3);
    CHECK_THROWS_AS(MethodSpec::from_json(nlohmann::json{{"epsilon", 0.1}}),
                    ConfigError);
}

TEST_CASE("one-hot and smoothed targets match their closed forms") {
    const datakit::ImageDataset ds = tiny_set({7, 0, 3});
    MethodSpec m1;

    const bench::TargetSet hard = bench::build_targets(m1, ds, {}, 10, 1);
    CHECK(hard.targets.shape == std::vector<int>{3, 10});
    CHECK(hard.mask == std::vector<std::uint8_t>(3, 1));
    CHECK(hard.masked_out == 0);
    for (int c = 0; c < 10; ++c) {
        CHECK(hard.targets.data[0 * 10 + c] == (c == 7 ? 1.0 : 0.0));
        CHECK(hard.targets.data[1 * 10 + c] == (c == 0 ? 1.0 : 0.0));
        CHECK(hard.targets.data[2 * 10 + c] == (c == 3 ? 1.0 : 0.0));
    }

    MethodSpec m2;
    m2.method = Method::M2;
    m2.epsilon = 0.1;
    const bench::TargetSet smooth = bench::build_targets(m2, ds, {}, 10, 1);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::vector<double> expected =
            neural::smooth_labels(ds.labels[i], 10, 0.1);
        for (int c = 0; c < 10; ++c)
            CHECK(smooth.targets.data[i * 10 + c] == expected[c]);
    }

    const datakit::ImageDataset bad = tiny_set({12});
    CHECK_THROWS_AS(bench::build_targets(m1, bad, {}, 10, 1), ConfigError);
    datakit::ImageDataset corrupted = ds;
    corrupted.corrupted = true;
    CHECK_THROWS_AS(bench::build_targets(m1, corrupted, {}, 10, 1),
                    ConfigError);
}

TEST_CASE("quantum targets copy the label set and mismatches are rejected") {
    const datakit::ImageDataset ds = tiny_set({0, 2, 1, 2});
    const std::vector<std::vector<double>> rows = {{0.7, 0.2, 0.1},
                                                   {0.1, 0.2, 0.7},
                                                   {0.25, 0.5, 0.25},
                                                   {0.0, 0.05, 0.95}};
    const labeler::SoftLabelSet soft = hand_labels(ds, rows);

    MethodSpec m3;
    m3.method = Method::M3;
    bench::LabelArtifacts artifacts;
    artifacts.soft_labels = &soft;
    const bench::TargetSet targets =
        bench::build_targets(m3, ds, artifacts, 3, 1);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (int c = 0; c < 3; ++c)
            CHECK(targets.targets.data[i * 3 + c] == rows[i][c]);
    CHECK(targets.mask == std::vector<std::uint8_t>(4, 1));

    CHECK_THROWS_AS(bench::build_targets(m3, ds, {}, 3, 1), ConfigError);
    CHECK_THROWS_AS(bench::build_targets(m3, ds, artifacts, 4, 1),
                    ConfigError);

    labeler::SoftLabelSet short_set = soft;
    short_set.labels.pop_back();
    bench::LabelArtifacts short_art;
    short_art.soft_labels = &short_set;
    CHECK_THROWS_AS(bench::build_targets(m3, ds, short_art, 3, 1),
                    ConfigError);

    labeler::SoftLabelSet relabeled = soft;
    relabeled.labels[1].hard_label = 0;
    bench::LabelArtifacts bad_art;
    bad_art.soft_labels = &relabeled;
    CHECK_THROWS_AS(bench::build_targets(m3, ds, bad_art, 3, 1), ConfigError);
}

TEST_CASE("confidence filtering masks exactly the filtered samples") {
    const datakit::ImageDataset ds = tiny_set({0, 1, 2, 0});
    const std::vector<std::vector<double>> rows = {{0.95, 0.03, 0.02},
                                                   {0.25, 0.5, 0.25},
                                                   {0.05, 0.05, 0.9},
                                                   {0.99, 0.01, 0.0}};
    const labeler::SoftLabelSet soft = hand_labels(ds, rows);

    MethodSpec m4;
    m4.method = Method::M4;
    m4.threshold = 0.9;
    bench::LabelArtifacts artifacts;
    artifacts.soft_labels = &soft;
    const bench::TargetSet targets =
        bench::build_targets(m4, ds, artifacts, 3, 1);
    CHECK(targets.mask == std::vector<std::uint8_t>{1, 0, 1, 1});
    CHECK(targets.masked_out == 1);
    const labeler::ConfidenceFilter filter =
        labeler::filter_by_confidence(soft, 0.9);
    CHECK(targets.masked_out == ds.size() - filter.kept.labels.size());
    // the targets themselves stay the full quantum rows
    CHECK(targets.targets.data[1 * 3 + 1] == 0.5);

    m4.threshold = 0.0;
    CHECK_THROWS_AS(bench::build_targets(m4, ds, artifacts, 3, 1),
                    ConfigError);
}

TEST_CASE("degenerate stochastic passes reproduce the deterministic teacher") {
    const datakit::ImageDataset ds = mnist_subset(6);
    neural::Model teacher = neural::make_lenet(7, 0.0);

    std::vector<int> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    const Tensor logits = teacher.forward(datakit::image_batch(ds, idx), false);
    std::vector<double> expected;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::span<const double> row{logits.data.data() + i * 10, 10};
        const std::vector<double> p = neural::softmax(row);
        expected.insert(expected.end(), p.begin(), p.end());
    }

    bench::LabelArtifacts artifacts;
    artifacts.teacher = &teacher;

    // mean of two identical passes is bitwise the single-pass result
    MethodSpec bnn;
    bnn.method = Method::BNN;
    bnn.dropout_rate = 0.0;
    bnn.passes = 2;
    const bench::TargetSet two =
        bench::build_targets(bnn, ds, artifacts, 10, 5);
    CHECK(two.targets.data == expected);

    bnn.passes = 20;
    const bench::TargetSet twenty =
        bench::build_targets(bnn, ds, artifacts, 10, 5);
    for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(twenty.targets.data[i] == doctest::Approx(expected[i]).epsilon(1e-12));

    MethodSpec rs;
    rs.method = Method::RS;
    rs.noise_std = 0.0;
    rs.passes = 2;
    const bench::TargetSet quiet = bench::build_targets(rs, ds, artifacts, 10, 5);
    CHECK(quiet.targets.data == expected);

    rs.noise_std = 0.3;
    rs.passes = 3;
    const bench::TargetSet noisy = bench::build_targets(rs, ds, artifacts, 10, 5);
    double max_shift = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double sum = 0.0;
        for (int c = 0; c < 10; ++c) {
            const double p = noisy.targets.data[i * 10 + c];
            CHECK(p >= 0.0);
            sum += p;
            max_shift = std::max(max_shift,
                                 std::abs(p - expected[i * 10 + c]));
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(max_shift > 1e-6);

    MethodSpec orphan;
    orphan.method = Method::BNN;
    CHECK_THROWS_AS(bench::build_targets(orphan, ds, {}, 10, 5), ConfigError);
}

TEST_CASE("student training is deterministic and honors the mask") {
    const datakit::ImageDataset ds = mnist_subset(96);
    const bench::TargetSet hard =
        bench::build_targets(MethodSpec{}, ds, {}, 10, 1);

    bench::StudentConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-3;

    bench::StudentRun a = bench::train_student(hard.targets, hard.mask, ds, cfg, 42);
    bench::StudentRun b = bench::train_student(hard.targets, hard.mask, ds, cfg, 42);
    CHECK(a.log.steps == 3);
    CHECK(a.log.final_loss == b.log.final_loss);
    const std::vector<Tensor *> pa = a.model.parameters();
    const std::vector<Tensor *> pb = b.model.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i)
        CHECK(pa[i]->data == pb[i]->data);

    bench::StudentRun c = bench::train_student(hard.targets, hard.mask, ds, cfg, 43);
    CHECK(c.model.parameters()[0]->data != pa[0]->data);

    std::vector<std::uint8_t> mask(ds.size(), 0);
    std::fill(mask.begin(), mask.begin() + 40, 1);
    bench::StudentRun masked = bench::train_student(hard.targets, mask, ds, cfg, 42);
    CHECK(masked.log.steps == 2); // ceil(40 / 32) batches in the one epoch

    const std::vector<std::uint8_t> none(ds.size(), 0);
    CHECK_THROWS_AS(bench::train_student(hard.targets, none, ds, cfg, 42),
                    ConfigError);
    const std::vector<std::uint8_t> short_mask(ds.size() - 1, 1);
    CHECK_THROWS_AS(bench::train_student(hard.targets, short_mask, ds, cfg, 42),
                    ContractViolation);

    Tensor zeros = Tensor::zeros({static_cast<int>(ds.size()), 10});
    CHECK_THROWS_AS(bench::train_student(zeros, {}, ds, cfg, 42),
                    ContractViolation);

    const datakit::ImageDataset noisy =
        datakit::add_gaussian_noise(ds, 0.1, 1);
    CHECK_THROWS_AS(bench::train_student(hard.targets, hard.mask, noisy, cfg, 42),
                    ConfigError);
}

TEST_CASE("divergent student training reports the failing epoch") {
    const datakit::ImageDataset ds = mnist_subset(32);
    const bench::TargetSet hard =
        bench::build_targets(MethodSpec{}, ds, {}, 10, 1);
    bench::StudentConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 16;
    // a step of this size drives the weights past the double range on the
    // next forward pass
    cfg.learning_rate = 1e200;
    CHECK_THROWS_WITH_AS(
        bench::train_student(hard.targets, hard.mask, ds, cfg, 3),
        doctest::Contains("epoch 1"), TrainingError);
}

TEST_CASE("identity corruption reproduces clean accuracy exactly") {
    const datakit::ImageDataset ds = mnist_subset(64);
    neural::Model model = neural::make_lenet(19, 0.0);
    const CleanEval oracle = clean_eval(model, ds, 10);

    std::vector<datakit::CorruptionSpec> grid(2);
    grid[1].gaussian_std = 0.6;
    const bench::EvalReport report =
        bench::evaluate_grid(model, ds, grid, 77, 10, 2, 5);
    REQUIRE(report.cells.size() == 2);
    CHECK(report.cells[0].accuracy == oracle.accuracy);
    CHECK(report.cells[0].mean_entropy == oracle.mean_entropy);
    CHECK(report.cells[1].corruption.gaussian_std == 0.6);

    for (const bench::CellReport &cell : report.cells) {
        // confusion row sums recover the per-class test counts
        std::vector<long> per_class(10, 0);
        for (const int l : ds.labels)
            ++per_class[static_cast<std::size_t>(l)];
        long trace = 0;
        for (int t = 0; t < 10; ++t) {
            long row_sum = 0;
            for (int p = 0; p < 10; ++p)
                row_sum += cell.confusion_at(t, p, 10);
            CHECK(row_sum == per_class[static_cast<std::size_t>(t)]);
            trace += cell.confusion_at(t, t, 10);
        }
        CHECK(cell.accuracy ==
              static_cast<double>(trace) / static_cast<double>(ds.size()));
        CHECK(cell.accuracy >= 0.0);
        CHECK(cell.accuracy <= 1.0);
        CHECK(cell.mean_entropy >= 0.0);
        CHECK(cell.mean_entropy <= std::log(10.0) + 1e-12);

        REQUIRE(cell.lowest_confidence.size() == 5);
        double last = 0.0;
        for (const bench::Exemplar &e : cell.lowest_confidence) {
            CHECK(e.p1 >= e.p2);
            CHECK(e.p1 >= 0.1); // the top class carries at least 1/K
            CHECK(e.top1 != e.top2);
            CHECK(e.p1 >= last);
            last = e.p1;
        }
    }

    // pure function of (model, data, grid, seed), for any thread count
    const bench::EvalReport again =
        bench::evaluate_grid(model, ds, grid, 77, 10, 4, 5);
    for (std::size_t c = 0; c < grid.size(); ++c) {
        CHECK(again.cells[c].accuracy == report.cells[c].accuracy);
        CHECK(again.cells[c].mean_entropy == report.cells[c].mean_entropy);
        CHECK(again.cells[c].confusion == report.cells[c].confusion);
    }

    // a different seed draws different cell noise
    std::vector<datakit::CorruptionSpec> noisy_cell(1);
    noisy_cell[0].gaussian_std = 0.5;
    const bench::EvalReport s1 =
        bench::evaluate_grid(model, ds, noisy_cell, 1, 10, 1, 0);
    const bench::EvalReport s2 =
        bench::evaluate_grid(model, ds, noisy_cell, 2, 10, 1, 0);
    CHECK(s1.cells[0].mean_entropy != s2.cells[0].mean_entropy);

    CHECK_THROWS_AS(bench::evaluate_grid(model, ds, {}, 1, 10), ConfigError);
    CHECK_THROWS_AS(bench::evaluate_grid(model, ds, grid, 1, 1), ConfigError);
    const datakit::ImageDataset stray = tiny_set({11});
    CHECK_THROWS_AS(bench::evaluate_grid(model, stray, grid, 1, 10),
                    ConfigError);
}

TEST_CASE("report files follow the documented schema byte for byte") {
    bench::EvalReport eval;
    eval.num_classes = 3;
    for (int c = 0; c < 3; ++c) {
        bench::CellReport cell;
        cell.corruption.gaussian_std = 0.1 * c;
        cell.corruption.rotation_degrees = c == 2 ? 20.0 : 0.0;
        cell.confusion = {5, 1, 0, 0, 6, 0, 1, 1, 6};
        cell.accuracy = 17.0 / 20.0;
        cell.mean_entropy = 0.25 + 0.01 * c;
        bench::Exemplar e;
        e.sample_index = 4 + static_cast<std::size_t>(c);
        e.true_label = 1;
        e.top1 = 2;
        e.p1 = 0.41;
        e.top2 = 1;
        e.p2 = 0.39;
        cell.lowest_confidence.push_back(e);
        eval.cells.push_back(cell);
    }
    std::vector<bench::MethodReport> methods;
    methods.push_back({"M1", eval});
    methods.push_back({"M3", eval});

    const fs::path dir_a = fs::temp_directory_path() / "qplr_report_a";
    const fs::path dir_b = fs::temp_directory_path() / "qplr_report_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    bench::write_report(methods, dir_a.string());
    bench::write_report(methods, dir_b.string());

    const std::string csv = slurp(dir_a / "results.csv");
    std::istringstream lines(csv);
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == bench::kResultsCsvHeader);
    std::size_t rows = 0;
    std::string first_row;
    while (std::getline(lines, line)) {
        if (rows == 0)
            first_row = line;
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 4);
    }
    CHECK(rows == 6); // 2 methods x 3 cells
    CHECK(first_row == "M1,0,0,0.85,0.25");

    const std::string exemplars = slurp(dir_a / "exemplars.csv");
    CHECK(exemplars.substr(0, std::string(bench::kExemplarsCsvHeader).size()) ==
          bench::kExemplarsCsvHeader);
    CHECK(std::count(exemplars.begin(), exemplars.end(), '\n') == 7);

    const std::string confusion = slurp(dir_a / "confusion_M3_std0.2_rot20.csv");
    CHECK(confusion == "5,1,0\n0,6,0\n1,1,6\n");

    // the JSON form reconstructs the report exactly
    const bench::EvalReport back = bench::EvalReport::from_json(eval.to_json());
    CHECK(back.to_json() == eval.to_json());
    CHECK(back.cells[1].confusion == eval.cells[1].confusion);
    CHECK_THROWS_AS(bench::EvalReport::from_json(nlohmann::json::object()),
                    IngestionError);

    const nlohmann::json parsed =
        nlohmann::json::parse(slurp(dir_a / "results.json"));
    REQUIRE(parsed.at("methods").size() == 2);
    CHECK(parsed.at("methods")[0].at("method") == "M1");
    CHECK(parsed.at("methods")[0].at("eval").at("cells").size() == 3);
    CHECK(parsed.at("methods")[0].at("eval").at("cells")[0].at("accuracy") ==
          0.85);

    for (const char *name :
         {"results.csv", "results.json", "exemplars.csv",
          "confusion_M1_std0_rot0.csv", "confusion_M3_std0.2_rot20.csv"})
        CHECK(slurp(dir_a / name) == slurp(dir_b / name));

    std::vector<bench::MethodReport> dup;
    dup.push_back({"M1", eval});
    dup.push_back({"M1", eval});
    CHECK_THROWS_AS(bench::write_report(dup, dir_a.string()), ConfigError);
    CHECK_THROWS_AS(bench::write_report({}, dir_a.string()),
                    ContractViolation);
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("experiment config round-trips and rejects bad settings") {
    const bench::ExperimentConfig desk = bench::desk_defaults();
    CHECK(desk.methods.size() == 6);
    CHECK(desk.grid.size() == 11);
    CHECK(desk.grid[0].gaussian_std == 0.0);
    CHECK(desk.grid[10].gaussian_std == 0.5);
    CHECK(desk.grid[10].rotation_degrees == 20.0);
    CHECK_NOTHROW(desk.validate());
    const vqc::CircuitSpec circuit = desk.circuit();
    CHECK(circuit.num_qubits == 10);
    CHECK(circuit.num_layers == 3);
    CHECK(circuit.entanglement == vqc::Entanglement::Ring);
    CHECK(circuit.theta.empty());

    const bench::ExperimentConfig empty_json =
        bench::ExperimentConfig::from_json(nlohmann::json::object());
    CHECK(empty_json.train_subsample == desk.train_subsample);
    CHECK(empty_json.methods.size() == 6);

    const nlohmann::json custom = {
        {"dataset", "blobs"},
        {"num_classes", 2},
        {"train_subsample", 64},
        {"circuit", {{"qubits", 4}, {"layers", 1}, {"entanglement", "full"}}},
        {"methods", nlohmann::json::array({{{"name", "M1"}},
                                           {{"name", "M2"}, {"epsilon", 0.2}}})},
        {"grid", nlohmann::json::array(
                     {{{"gaussian_std", 0.2}, {"rotation_degrees", 5.0}}})},
        {"student", {{"epochs", 1}}}};
    const bench::ExperimentConfig parsed =
        bench::ExperimentConfig::from_json(custom);
    CHECK(parsed.dataset == "blobs");
    CHECK(parsed.circuit_qubits == 4);
    CHECK(parsed.circuit_topology == vqc::Entanglement::Full);
    CHECK(parsed.methods.size() == 2);
    CHECK(parsed.methods[1].epsilon == 0.2);
    CHECK(parsed.grid.size() == 1);
    CHECK(parsed.student.epochs == 1);
    CHECK(parsed.labeler_train.epochs == desk.labeler_train.epochs);

    // to_json -> from_json -> to_json is a fixed point
    const nlohmann::json echo = parsed.to_json();
    CHECK(bench::ExperimentConfig::from_json(echo).to_json() == echo);

    auto reject = [](const nlohmann::json &patch) {
        nlohmann::json j = patch;
        CHECK_THROWS_AS(bench::ExperimentConfig::from_json(j), ConfigError);
    };
    reject({{"dataset", "cifar"}});
    reject({{"circuit", {{"qubits", 0}}}});
    reject({{"circuit", {{"qubits", 3}}}}); // 2^3 < 10 classes
    reject({{"methods", nlohmann::json::array()}});
    reject({{"methods",
             nlohmann::json::array({{{"name", "M2"}, {"epsilon", 1.0}}})}});
    reject({{"shots", 0}});
    reject({{"grid", nlohmann::json::array()}});
    reject({{"student", {{"epochs", -1}}}});
}

TEST_CASE("run_method wires teachers, masks and sub-seeds together") {
    const datakit::ImageDataset ds = mnist_subset(64);
    bench::StudentConfig cfg;
    cfg.epochs = 0; // bookkeeping of the wiring, not learning

    // quantum labels: half certain, half maximally ambiguous
    std::vector<std::vector<double>> rows(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::vector<double> p(10, 0.0);
        if (i < 32) {
            p[static_cast<std::size_t>(ds.labels[i])] = 1.0;
        } else {
            p[static_cast<std::size_t>(ds.labels[i])] = 0.5;
            p[static_cast<std::size_t>((ds.labels[i] + 1) % 10)] = 0.5;
        }
        rows[i] = std::move(p);
    }
    const labeler::SoftLabelSet soft = hand_labels(ds, rows);

    MethodSpec m4;
    m4.method = Method::M4;
    m4.threshold = 0.9;
    const bench::MethodRun filtered =
        bench::run_method(m4, ds, &soft, cfg, 10, 5);
    CHECK(filtered.masked_out == 32);
    CHECK(filtered.student.log.steps == 0);

    const bench::MethodRun plain =
        bench::run_method(MethodSpec{}, ds, nullptr, cfg, 10, 5);
    CHECK(plain.masked_out == 0);

    MethodSpec bnn;
    bnn.method = Method::BNN;
    bnn.dropout_rate = 0.5;
    bnn.passes = 2;
    const bench::MethodRun mc = bench::run_method(bnn, ds, nullptr, cfg, 10, 5);
    CHECK(mc.masked_out == 0);
    CHECK(mc.student.log.initial_loss > 0.0);

    MethodSpec m3;
    m3.method = Method::M3;
    CHECK_THROWS_AS(bench::run_method(m3, ds, nullptr, cfg, 10, 5),
                    ConfigError);
}

TEST_CASE("soft targets raise student predictive entropy") {
    const datakit::ImageDataset train = mnist_subset(600);
    const datakit::ImageDataset test =
        datakit::subset(datakit::load_mnist_split(data_dir(), "test"), 200);

    bench::StudentConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 64;
    cfg.learning_rate = 1e-3;

    const bench::TargetSet hard =
        bench::build_targets(MethodSpec{}, train, {}, 10, 1);
    MethodSpec m2;
    m2.method = Method::M2;
    m2.epsilon = 0.4;
    const bench::TargetSet smooth = bench::build_targets(m2, train, {}, 10, 1);

    bench::StudentRun hard_student =
        bench::train_student(hard.targets, hard.mask, train, cfg, 9);
    bench::StudentRun soft_student =
        bench::train_student(smooth.targets, smooth.mask, train, cfg, 9);

    const std::vector<datakit::CorruptionSpec> clean(1);
    const double hard_entropy =
        bench::evaluate_grid(hard_student.model, test, clean, 1, 10)
            .cells[0]
            .mean_entropy;
    const double soft_entropy =
        bench::evaluate_grid(soft_student.model, test, clean, 1, 10)
            .cells[0]
            .mean_entropy;
    CHECK(soft_entropy > hard_entropy);
}

TEST_CASE("the sweep trains one labeler per grid point in order") {
    const datakit::ImageDataset blobs = datakit::synthetic_blobs(2, 32, 2, 5);
    labeler::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 32;
    cfg.num_threads = 1;

    const std::vector<bench::SweepPoint> points = bench::sweep_labeler_grid(
        {2}, {0, 1}, {vqc::Entanglement::Ring, vqc::Entanglement::Full}, blobs,
        2, cfg, 21);
    REQUIRE(points.size() == 4);
    CHECK(points[0].qubits == 2);
    CHECK(points[0].layers == 0);
    CHECK(points[0].topology == vqc::Entanglement::Ring);
    CHECK(points[3].layers == 1);
    CHECK(points[3].topology == vqc::Entanglement::Full);
    for (const bench::SweepPoint &p : points) {
        CHECK(p.final_accuracy >= 0.0);
        CHECK(p.final_accuracy <= 1.0);
        CHECK(std::isfinite(p.final_loss));
    }

    CHECK_THROWS_AS(
        bench::sweep_labeler_grid({}, {1}, {vqc::Entanglement::Ring}, blobs, 2,
                                  cfg, 21),
        ConfigError);
}
