#include "qplr/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <utility>

#include "qplr/errors.hpp"
#include "qplr/parallel.hpp"
#include "qplr/rng.hpp"

namespace qplr::bench {

namespace {

constexpr int kPredictBatch = 256;

/// 9 significant digits survive a print -> parse -> print round trip
/// unchanged, which keeps report files byte-stable.
std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

/// Short form for grid coordinates in file names and CSV key columns.
std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

/// Softmax of the model logits over the whole set, batch by batch, rows
/// in sample order.
neural::Tensor predict_probs(neural::Model &model,
                             const datakit::ImageDataset &ds, bool training) {
    const std::size_t n = ds.size();
    neural::Tensor out;
    int k = 0;
    std::vector<int> idx;
    for (std::size_t start = 0; start < n; start += kPredictBatch) {
        const std::size_t stop = std::min(n, start + kPredictBatch);
        idx.resize(stop - start);
        std::iota(idx.begin(), idx.end(), static_cast<int>(start));
        const neural::Tensor x = datakit::image_batch(ds, idx);
        const neural::Tensor logits = model.forward(x, training);
        if (out.data.empty()) {
            k = logits.dim(1);
            out = neural::Tensor::zeros({static_cast<int>(n), k});
        }
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const std::span<const double> row{
                logits.data.data() + r * static_cast<std::size_t>(k),
                static_cast<std::size_t>(k)};
            const std::vector<double> p = neural::softmax(row);
            std::copy(p.begin(), p.end(),
                      out.data.begin() + (start + r) * static_cast<std::size_t>(k));
        }
    }
    return out;
}

int hard_label_checked(const datakit::ImageDataset &data, std::size_t i,
                       int k) {
    const int label = data.labels[i];
    if (label < 0 || label >= k)
        throw ConfigError("sample " + std::to_string(i) + " carries label " +
                          std::to_string(label) + ", outside 0.." +
                          std::to_string(k - 1));
    return label;
}

/// Mean class distribution over `passes` stochastic teacher passes (MC
/// dropout for BNN, input noise for RS). Per-pass matrices land in their
/// own slots and are averaged in pass order, so the result is identical
/// for any thread count.
neural::Tensor mean_teacher_probs(const neural::Model &teacher,
                                  const datakit::ImageDataset &data,
                                  const MethodSpec &m, std::uint64_t seed,
                                  std::size_t num_threads) {
    const std::size_t passes = static_cast<std::size_t>(m.passes);
    const std::size_t workers =
        std::min(par::resolve_threads(num_threads), passes);
    std::vector<neural::Model> clones(workers, teacher);
    std::vector<neural::Tensor> slot(passes);
    par::parallel_for(passes, workers, [&](std::size_t worker, std::size_t p) {
        neural::Model &net = clones[worker];
        if (m.method == Method::BNN) {
            net.reseed_stochastic(rng::derive_seed(seed, "mc-pass", p));
            slot[p] = predict_probs(net, data, /*training=*/true);
        } else {
            const datakit::ImageDataset noisy = datakit::add_gaussian_noise(
                data, m.noise_std, rng::derive_seed(seed, "rs-pass", p),
                /*clamp=*/false);
            slot[p] = predict_probs(net, noisy, /*training=*/false);
        }
    });
    neural::Tensor mean = neural::Tensor::zeros(slot[0].shape);
    for (const neural::Tensor &t : slot)
        for (std::size_t i = 0; i < t.data.size(); ++i)
            mean.data[i] += t.data[i];
    const double inv = 1.0 / static_cast<double>(passes);
    for (double &v : mean.data)
        v *= inv;
    return mean;
}

/// Mean loss and hard-label accuracy of the model over the given samples,
/// evaluation mode.
struct EvalStats {
    double mean_loss = 0.0;
    double accuracy = 0.0;
};
EvalStats student_eval(neural::Model &model, const datakit::ImageDataset &data,
                       const neural::Tensor &targets,
                       const std::vector<int> &live) {
    const int k = targets.dim(1);
    double loss_sum = 0.0;
    long correct = 0;
    std::vector<int> idx;
    for (std::size_t start = 0; start < live.size(); start += kPredictBatch) {
        const std::size_t stop = std::min(live.size(), start + kPredictBatch);
        idx.assign(live.begin() + static_cast<std::ptrdiff_t>(start),
                   live.begin() + static_cast<std::ptrdiff_t>(stop));
        const neural::Tensor x = datakit::image_batch(data, idx);
        neural::Tensor t = neural::Tensor::zeros({static_cast<int>(idx.size()), k});
        for (std::size_t r = 0; r < idx.size(); ++r)
            std::copy_n(targets.data.begin() +
                            static_cast<std::size_t>(idx[r]) * k,
                        k, t.data.begin() + r * static_cast<std::size_t>(k));
        const neural::Tensor logits = model.forward(x, false);
        const neural::LossGrad lg = neural::softmax_cross_entropy(logits, t);
        loss_sum += lg.loss * static_cast<double>(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const std::span<const double> row{
                logits.data.data() + r * static_cast<std::size_t>(k),
                static_cast<std::size_t>(k)};
            if (neural::argmax(row) == data.labels[static_cast<std::size_t>(idx[r])])
                ++correct;
        }
    }
    const double n = static_cast<double>(live.size());
    return {loss_sum / n, static_cast<double>(correct) / n};
}

/// Accuracy, confusion, entropy and low-confidence exemplars of one
/// corrupted copy of the test set.
CellReport evaluate_cell(neural::Model &model, const datakit::ImageDataset &ds,
                         const datakit::CorruptionSpec &spec, int k,
                         int num_exemplars) {
    const neural::Tensor probs = predict_probs(model, ds, false);
    const std::size_t n = ds.size();
    CellReport cell;
    cell.corruption = spec;
    cell.confusion.assign(static_cast<std::size_t>(k) * k, 0);
    long correct = 0;
    double entropy_sum = 0.0;
    std::vector<std::pair<double, std::size_t>> confidence(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> row{
            probs.data.data() + i * static_cast<std::size_t>(k),
            static_cast<std::size_t>(k)};
        const int label = ds.labels[i];
        const int pred = neural::argmax(row);
        ++cell.confusion[static_cast<std::size_t>(label) * k + pred];
        if (pred == label)
            ++correct;
        double h = 0.0;
        for (const double p : row)
            if (p > 0.0)
                h -= p * std::log(p);
        entropy_sum += h;
        confidence[i] = {row[static_cast<std::size_t>(pred)], i};
    }
    cell.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    cell.mean_entropy = entropy_sum / static_cast<double>(n);

    const std::size_t take =
        std::min(static_cast<std::size_t>(num_exemplars), n);
    std::partial_sort(confidence.begin(),
                      confidence.begin() + static_cast<std::ptrdiff_t>(take),
                      confidence.end());
    for (std::size_t e = 0; e < take; ++e) {
        const std::size_t i = confidence[e].second;
        const std::span<const double> row{
            probs.data.data() + i * static_cast<std::size_t>(k),
            static_cast<std::size_t>(k)};
        Exemplar ex;
        ex.sample_index = i;
        ex.true_label = ds.labels[i];
        ex.top1 = neural::argmax(row);
        ex.p1 = row[static_cast<std::size_t>(ex.top1)];
        int second = -1;
        for (int c = 0; c < k; ++c) {
            if (c == ex.top1)
                continue;
            if (second < 0 || row[static_cast<std::size_t>(c)] >
                                  row[static_cast<std::size_t>(second)])
                second = c;
        }
        ex.top2 = second;
        ex.p2 = row[static_cast<std::size_t>(second)];
        cell.lowest_confidence.push_back(ex);
    }
    return cell;
}

void write_text_file(const std::filesystem::path &path,
                     const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IngestionError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out)
        throw IngestionError("failed while writing " + path.string());
}

} // namespace

std::string to_string(Method m) {
    switch (m) {
    case Method::M1: return "M1";
    case Method::M2: return "M2";
    case Method::M3: return "M3";
    case Method::M4: return "M4";
    case Method::BNN: return "BNN";
    case Method::RS: return "RS";
    }
    throw ContractViolation("unknown method enumerator");
}

Method method_from_string(const std::string &s) {
    if (s == "M1") return Method::M1;
    if (s == "M2") return Method::M2;
    if (s == "M3") return Method::M3;
    if (s == "M4") return Method::M4;
    if (s == "BNN") return Method::BNN;
    if (s == "RS") return Method::RS;
    throw ConfigError("unknown method name \"" + s +
                      "\" (expected M1, M2, M3, M4, BNN or RS)");
}

void MethodSpec::validate() const {
    if (method == Method::M2 && !(epsilon >= 0.0 && epsilon < 1.0))
        throw ConfigError("M2 smoothing epsilon must lie in [0, 1), got " +
                          format_g(epsilon));
    if (method == Method::M4 && !(threshold > 0.0 && threshold <= 1.0))
        throw ConfigError(
            "M4 confidence threshold must lie in (0, 1], got " +
            format_g(threshold));
    if ((method == Method::BNN || method == Method::RS) && passes < 1)
        throw ConfigError(to_string(method) +
                          " needs at least one averaging pass");
    if (method == Method::BNN && !(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("BNN teacher dropout rate must lie in [0, 1), got " +
                          format_g(dropout_rate));
    if (method == Method::RS && !(noise_std >= 0.0))
        throw ConfigError("RS noise std must be nonnegative, got " +
                          format_g(noise_std));
}

nlohmann::json MethodSpec::to_json() const {
    nlohmann::json j{{"name", to_string(method)}};
    switch (method) {
    case Method::M2: j["epsilon"] = epsilon; break;
    case Method::M4: j["threshold"] = threshold; break;
    case Method::BNN:
        j["dropout_rate"] = dropout_rate;
        j["passes"] = passes;
        break;
    case Method::RS:
        j["noise_std"] = noise_std;
        j["passes"] = passes;
        break;
    default: break;
    }
    return j;
}

MethodSpec MethodSpec::from_json(const nlohmann::json &j) {
    MethodSpec m;
    try {
        if (!j.contains("name"))
            throw ConfigError("method entry needs a \"name\" field");
        m.method = method_from_string(j.at("name").get<std::string>());
        m.epsilon = j.value("epsilon", m.epsilon);
        m.threshold = j.value("threshold", m.threshold);
        m.dropout_rate = j.value("dropout_rate", m.dropout_rate);
        m.noise_std = j.value("noise_std", m.noise_std);
        m.passes = j.value("passes", m.passes);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed method entry: ") + e.what());
    }
    m.validate();
    return m;
}

nlohmann::json StudentConfig::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"dropout_rate", dropout_rate}};
}

StudentConfig StudentConfig::from_json(const nlohmann::json &j) {
    StudentConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed student config: ") + e.what());
    }
    return c;
}

TargetSet build_targets(const MethodSpec &method,
                        const datakit::ImageDataset &data,
                        const LabelArtifacts &artifacts, int num_classes,
                        std::uint64_t seed, std::size_t num_threads) {
    method.validate();
    if (num_classes < 2)
        throw ConfigError("build_targets needs at least 2 classes");
    if (data.size() == 0)
        throw ConfigError("build_targets got an empty dataset");
    if (data.corrupted)
        throw ConfigError("training targets are built on the clean split");
    const std::size_t n = data.size();
    const int k = num_classes;

    TargetSet set;
    set.targets = neural::Tensor::zeros({static_cast<int>(n), k});
    set.mask.assign(n, 1);

    switch (method.method) {
    case Method::M1:
        for (std::size_t i = 0; i < n; ++i)
            set.targets.data[i * static_cast<std::size_t>(k) +
                             hard_label_checked(data, i, k)] = 1.0;
        break;
    case Method::M2:
        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<double> row = neural::smooth_labels(
                hard_label_checked(data, i, k), k, method.epsilon);
            std::copy(row.begin(), row.end(),
                      set.targets.data.begin() + i * static_cast<std::size_t>(k));
        }
        break;
    case Method::M3:
    case Method::M4: {
        const labeler::SoftLabelSet *soft = artifacts.soft_labels;
        if (soft == nullptr)
            throw ConfigError(to_string(method.method) +
                              " needs quantum soft labels; none were provided");
        if (soft->num_classes != k)
            throw ConfigError("soft labels carry K=" +
                              std::to_string(soft->num_classes) +
                              " but the run uses K=" + std::to_string(k));
        if (soft->labels.size() != n)
            throw ConfigError("soft label count " +
                              std::to_string(soft->labels.size()) +
                              " does not match the dataset size " +
                              std::to_string(n));
        for (std::size_t i = 0; i < n; ++i) {
            const labeler::SoftLabel &l = soft->labels[i];
            if (l.sample_index != i ||
                l.hard_label != hard_label_checked(data, i, k))
                throw ConfigError(
                    "soft labels do not belong to this dataset (mismatch at "
                    "sample " +
                    std::to_string(i) + ")");
            std::copy(l.probs.begin(), l.probs.end(),
                      set.targets.data.begin() + i * static_cast<std::size_t>(k));
        }
        if (method.method == Method::M4) {
            const labeler::ConfidenceFilter filter =
                labeler::filter_by_confidence(*soft, method.threshold);
            set.mask = filter.keep_mask;
            set.masked_out = n - filter.kept.labels.size();
        }
        break;
    }
    case Method::BNN:
    case Method::RS: {
        if (artifacts.teacher == nullptr)
            throw ConfigError(to_string(method.method) +
                              " needs a trained teacher network; none was "
                              "provided");
        for (std::size_t i = 0; i < n; ++i)
            hard_label_checked(data, i, k);
        set.targets =
            mean_teacher_probs(*artifacts.teacher, data, method, seed,
                               num_threads);
        if (set.targets.dim(1) != k)
            throw ConfigError("teacher emits " +
                              std::to_string(set.targets.dim(1)) +
                              " classes but the run uses " + std::to_string(k));
        break;
    }
    }
    return set;
}

StudentRun train_student(const neural::Tensor &targets,
                         std::span<const std::uint8_t> mask,
                         const datakit::ImageDataset &data,
                         const StudentConfig &config, std::uint64_t seed) {
    const std::size_t n = data.size();
    if (n == 0)
        throw ConfigError("train_student got an empty dataset");
    if (data.corrupted)
        throw ConfigError("students train on the clean split only");
    if (targets.shape.size() != 2 ||
        targets.dim(0) != static_cast<int>(n))
        throw ContractViolation("targets must be [N, K] with one row per "
                                "sample");
    const int k = targets.dim(1);
    if (k < 2)
        throw ContractViolation("targets need at least 2 classes");
    if (!mask.empty() && mask.size() != n)
        throw ContractViolation("mask length does not match the dataset");
    if (config.epochs < 0 || config.batch_size < 1 ||
        !(config.learning_rate > 0.0))
        throw ConfigError("student hyperparameters out of range");
    if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
        throw ConfigError("student dropout rate must lie in [0, 1)");
    for (std::size_t i = 0; i < n; ++i) {
        hard_label_checked(data, i, k);
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
            const double p =
                targets.data[i * static_cast<std::size_t>(k) + c];
            if (!(p >= -1e-9))
                throw ContractViolation("target row " + std::to_string(i) +
                                        " has a negative entry");
            sum += p;
        }
        if (!(std::abs(sum - 1.0) <= 1e-6))
            throw ContractViolation("target row " + std::to_string(i) +
                                    " does not sum to 1");
    }

    std::vector<int> live;
    live.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (mask.empty() || mask[i] != 0)
            live.push_back(static_cast<int>(i));
    if (live.empty())
        throw ConfigError("the mask removed every training sample");

    StudentRun run;
    run.model = neural::make_lenet(rng::derive_seed(seed, "init"),
                                   config.dropout_rate, k);
    neural::Adam opt(config.learning_rate);
    const std::vector<neural::Tensor *> params = run.model.parameters();

    {
        const EvalStats before = student_eval(run.model, data, targets, live);
        run.log.initial_loss = before.mean_loss;
    }

    std::vector<int> order = live;
    std::vector<int> batch_idx;
    long step = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng::Stream shuffle(rng::derive_seed(seed, "shuffle",
                                             static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle.next_below(i)]);

        double loss_sum = 0.0;
        long correct = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(order.size(),
                         start + static_cast<std::size_t>(config.batch_size));
            batch_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
            const neural::Tensor x = datakit::image_batch(data, batch_idx);
            neural::Tensor t = neural::Tensor::zeros(
                {static_cast<int>(batch_idx.size()), k});
            for (std::size_t r = 0; r < batch_idx.size(); ++r)
                std::copy_n(targets.data.begin() +
                                static_cast<std::size_t>(batch_idx[r]) * k,
                            k, t.data.begin() + r * static_cast<std::size_t>(k));

            run.model.zero_grad();
            const neural::Tensor logits = run.model.forward(x, true);
            const neural::LossGrad lg = neural::softmax_cross_entropy(logits, t);
            if (!std::isfinite(lg.loss))
                throw TrainingError(
                    "student training diverged (non-finite loss) at epoch " +
                    std::to_string(epoch) + ", step " + std::to_string(step + 1));
            run.model.backward(lg.dlogits);
            opt.step(params);
            ++step;

            loss_sum += lg.loss * static_cast<double>(batch_idx.size());
            for (std::size_t r = 0; r < batch_idx.size(); ++r) {
                const std::span<const double> row{
                    logits.data.data() + r * static_cast<std::size_t>(k),
                    static_cast<std::size_t>(k)};
                if (neural::argmax(row) ==
                    data.labels[static_cast<std::size_t>(batch_idx[r])])
                    ++correct;
            }
        }
        labeler::EpochStats stats;
        stats.epoch = epoch;
        stats.mean_loss = loss_sum / static_cast<double>(order.size());
        stats.accuracy =
            static_cast<double>(correct) / static_cast<double>(order.size());
        stats.learning_rate = config.learning_rate;
        run.log.epochs.push_back(stats);
    }
    run.log.steps = step;
    run.log.final_loss = run.log.epochs.empty()
                             ? run.log.initial_loss
                             : run.log.epochs.back().mean_loss;
    run.log.final_accuracy =
        student_eval(run.model, data, targets, live).accuracy;
    return run;
}

EvalReport evaluate_grid(const neural::Model &model,
                         const datakit::ImageDataset &test,
                         const std::vector<datakit::CorruptionSpec> &grid,
                         std::uint64_t seed, int num_classes,
                         std::size_t num_threads, int num_exemplars) {
    if (test.size() == 0)
        throw ConfigError("evaluate_grid needs a nonempty test set");
    if (grid.empty())
        throw ConfigError("evaluate_grid needs at least one corruption cell");
    if (num_classes < 2)
        throw ConfigError("evaluate_grid needs at least 2 classes");
    if (num_exemplars < 0)
        throw ConfigError("num_exemplars must be nonnegative");
    for (std::size_t i = 0; i < test.size(); ++i)
        hard_label_checked(test, i, num_classes);

    const std::size_t cells = grid.size();
    const std::size_t workers =
        std::min(par::resolve_threads(num_threads), cells);
    std::vector<neural::Model> clones(workers, model);
    std::vector<CellReport> slot(cells);
    par::parallel_for(cells, workers, [&](std::size_t worker, std::size_t c) {
        const datakit::ImageDataset corrupted =
            datakit::corrupt(test, grid[c], rng::derive_seed(seed, "cell", c));
        slot[c] = evaluate_cell(clones[worker], corrupted, grid[c],
                                num_classes, num_exemplars);
    });

    EvalReport report;
    report.num_classes = num_classes;
    report.cells = std::move(slot);
    return report;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json cells_json = nlohmann::json::array();
    for (const CellReport &cell : cells) {
        nlohmann::json confusion = nlohmann::json::array();
        for (int t = 0; t < num_classes; ++t) {
            nlohmann::json row = nlohmann::json::array();
            for (int p = 0; p < num_classes; ++p)
                row.push_back(cell.confusion_at(t, p, num_classes));
            confusion.push_back(std::move(row));
        }
        nlohmann::json exemplars = nlohmann::json::array();
        for (const Exemplar &e : cell.lowest_confidence)
            exemplars.push_back({{"sample_index", e.sample_index},
                                 {"true_label", e.true_label},
                                 {"top1", e.top1},
                                 {"p1", e.p1},
                                 {"top2", e.top2},
                                 {"p2", e.p2}});
        cells_json.push_back({{"corruption", cell.corruption.to_json()},
                              {"accuracy", cell.accuracy},
                              {"mean_entropy", cell.mean_entropy},
                              {"confusion", std::move(confusion)},
                              {"lowest_confidence", std::move(exemplars)}});
    }
    return {{"num_classes", num_classes}, {"cells", std::move(cells_json)}};
}

EvalReport EvalReport::from_json(const nlohmann::json &j) {
    EvalReport report;
    try {
        report.num_classes = j.at("num_classes").get<int>();
        if (report.num_classes < 2)
            throw IngestionError("evaluation report has fewer than 2 classes");
        const std::size_t k = static_cast<std::size_t>(report.num_classes);
        for (const nlohmann::json &cj : j.at("cells")) {
            CellReport cell;
            cell.corruption =
                datakit::CorruptionSpec::from_json(cj.at("corruption"));
            cell.accuracy = cj.at("accuracy").get<double>();
            cell.mean_entropy = cj.at("mean_entropy").get<double>();
            const nlohmann::json &rows = cj.at("confusion");
            if (rows.size() != k)
                throw IngestionError("confusion matrix is not K x K");
            cell.confusion.reserve(k * k);
            for (const nlohmann::json &row : rows) {
                if (row.size() != k)
                    throw IngestionError("confusion matrix is not K x K");
                for (const nlohmann::json &v : row)
                    cell.confusion.push_back(v.get<long>());
            }
            for (const nlohmann::json &ej : cj.at("lowest_confidence")) {
                Exemplar e;
                e.sample_index = ej.at("sample_index").get<std::size_t>();
                e.true_label = ej.at("true_label").get<int>();
                e.top1 = ej.at("top1").get<int>();
                e.p1 = ej.at("p1").get<double>();
                e.top2 = ej.at("top2").get<int>();
                e.p2 = ej.at("p2").get<double>();
                cell.lowest_confidence.push_back(e);
            }
            report.cells.push_back(std::move(cell));
        }
    } catch (const nlohmann::json::exception &e) {
        throw IngestionError(std::string("malformed evaluation report: ") +
                             e.what());
    }
    return report;
}

const char *const kResultsCsvHeader =
    "method,gaussian_std,rotation_degrees,accuracy,mean_entropy";
const char *const kExemplarsCsvHeader =
    "method,gaussian_std,rotation_degrees,sample_index,true_label,top1,p1,"
    "top2,p2";

void write_report(const std::vector<MethodReport> &methods,
                  const std::string &out_dir) {
    if (methods.empty())
        throw ContractViolation("write_report needs at least one evaluated "
                                "method");
    std::set<std::string> names;
    for (const MethodReport &m : methods)
        if (!names.insert(m.method).second)
            throw ConfigError("duplicate method name in report: " + m.method);

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    std::string results;
    results += kResultsCsvHeader;
    results += '\n';
    for (const MethodReport &m : methods)
        for (const CellReport &cell : m.eval.cells) {
            results += m.method;
            results += ',';
            results += format_g(cell.corruption.gaussian_std);
            results += ',';
            results += format_g(cell.corruption.rotation_degrees);
            results += ',';
            results += format_g9(cell.accuracy);
            results += ',';
            results += format_g9(cell.mean_entropy);
            results += '\n';
        }
    write_text_file(dir / "results.csv", results);

    nlohmann::json all = nlohmann::json::array();
    for (const MethodReport &m : methods)
        all.push_back({{"method", m.method}, {"eval", m.eval.to_json()}});
    write_text_file(dir / "results.json",
                    nlohmann::json{{"methods", std::move(all)}}.dump(2) + "\n");

    for (const MethodReport &m : methods)
        for (const CellReport &cell : m.eval.cells) {
            const int k = m.eval.num_classes;
            std::string body;
            for (int t = 0; t < k; ++t) {
                for (int p = 0; p < k; ++p) {
                    if (p > 0)
                        body += ',';
                    body += std::to_string(cell.confusion_at(t, p, k));
                }
                body += '\n';
            }
            const std::string name =
                "confusion_" + m.method + "_std" +
                format_g(cell.corruption.gaussian_std) + "_rot" +
                format_g(cell.corruption.rotation_degrees) + ".csv";
            write_text_file(dir / name, body);
        }

    std::string exemplars;
    exemplars += kExemplarsCsvHeader;
    exemplars += '\n';
    for (const MethodReport &m : methods)
        for (const CellReport &cell : m.eval.cells)
            for (const Exemplar &e : cell.lowest_confidence) {
                exemplars += m.method;
                exemplars += ',';
                exemplars += format_g(cell.corruption.gaussian_std);
                exemplars += ',';
                exemplars += format_g(cell.corruption.rotation_degrees);
                exemplars += ',';
                exemplars += std::to_string(e.sample_index);
                exemplars += ',';
                exemplars += std::to_string(e.true_label);
                exemplars += ',';
                exemplars += std::to_string(e.top1);
                exemplars += ',';
                exemplars += format_g9(e.p1);
                exemplars += ',';
                exemplars += std::to_string(e.top2);
                exemplars += ',';
                exemplars += format_g9(e.p2);
                exemplars += '\n';
            }
    write_text_file(dir / "exemplars.csv", exemplars);
}

vqc::CircuitSpec ExperimentConfig::circuit() const {
    vqc::CircuitSpec c;
    c.num_qubits = circuit_qubits;
    c.encoding = vqc::Encoding::Angle;
    c.num_layers = circuit_layers;
    c.entanglement = circuit_topology;
    c.reduction = vqc::Reduction::PostNetwork;
    c.rotation = circuit_rotation;
    return c;
}

void ExperimentConfig::validate() const {
    // "fashion" loads the same IDX layout from a different --data-dir
    if (dataset != "mnist" && dataset != "fashion" && dataset != "blobs")
        throw ConfigError(
            "dataset must be \"mnist\", \"fashion\" or \"blobs\", got \"" +
            dataset + "\"");
    if (num_classes < 2)
        throw ConfigError("num_classes must be at least 2");
    if (dataset == "blobs" && blob_image_size < 2)
        throw ConfigError("blob_image_size must be at least 2");
    if (circuit_qubits < 1 || circuit_qubits > 24)
        throw ConfigError("circuit_qubits must lie in 1..24");
    if ((std::size_t{1} << circuit_qubits) <
        static_cast<std::size_t>(num_classes))
        throw ConfigError("the circuit needs 2^qubits >= num_classes");
    if (circuit_layers < 0)
        throw ConfigError("circuit_layers must be nonnegative");
    if (shots < 1)
        throw ConfigError("shots must be at least 1");
    if (labeler_train.epochs < 0 || labeler_train.batch_size < 1 ||
        !(labeler_train.learning_rate > 0.0))
        throw ConfigError("labeler hyperparameters out of range");
    if (student.epochs < 0 || student.batch_size < 1 ||
        !(student.learning_rate > 0.0))
        throw ConfigError("student hyperparameters out of range");
    if (methods.empty())
        throw ConfigError("the run needs at least one method");
    for (const MethodSpec &m : methods)
        m.validate();
    if (grid.empty())
        throw ConfigError("the corruption grid must not be empty");
    for (const datakit::CorruptionSpec &g : grid)
        if (!(g.gaussian_std >= 0.0))
            throw ConfigError("corruption std must be nonnegative");
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json methods_json = nlohmann::json::array();
    for (const MethodSpec &m : methods)
        methods_json.push_back(m.to_json());
    nlohmann::json grid_json = nlohmann::json::array();
    for (const datakit::CorruptionSpec &g : grid)
        grid_json.push_back(g.to_json());
    return {{"dataset", dataset},
            {"train_subsample", train_subsample},
            {"test_subsample", test_subsample},
            {"num_classes", num_classes},
            {"blob_image_size", blob_image_size},
            {"master_seed", master_seed},
            {"num_threads", num_threads},
            {"circuit",
             {{"qubits", circuit_qubits},
              {"layers", circuit_layers},
              {"entanglement", vqc::to_string(circuit_topology)},
              {"rotation", vqc::to_string(circuit_rotation)}}},
            {"labeler", labeler_train.to_json()},
            {"shots", shots},
            {"labels_path", labels_path},
            {"methods", std::move(methods_json)},
            {"student", student.to_json()},
            {"grid", std::move(grid_json)}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json &j) {
    ExperimentConfig c = desk_defaults();
    try {
        c.dataset = j.value("dataset", c.dataset);
        c.train_subsample = j.value("train_subsample", c.train_subsample);
        c.test_subsample = j.value("test_subsample", c.test_subsample);
        c.num_classes = j.value("num_classes", c.num_classes);
        c.blob_image_size = j.value("blob_image_size", c.blob_image_size);
        c.master_seed = j.value("master_seed", c.master_seed);
        c.num_threads = j.value("num_threads", c.num_threads);
        if (j.contains("circuit")) {
            const nlohmann::json &cj = j.at("circuit");
            c.circuit_qubits = cj.value("qubits", c.circuit_qubits);
            c.circuit_layers = cj.value("layers", c.circuit_layers);
            if (cj.contains("entanglement"))
                c.circuit_topology = vqc::entanglement_from_string(
                    cj.at("entanglement").get<std::string>());
            if (cj.contains("rotation"))
                c.circuit_rotation = vqc::rotation_from_string(
                    cj.at("rotation").get<std::string>());
        }
        if (j.contains("labeler"))
            c.labeler_train = labeler::TrainConfig::from_json(j.at("labeler"));
        c.shots = j.value("shots", c.shots);
        c.labels_path = j.value("labels_path", c.labels_path);
        if (j.contains("methods")) {
            c.methods.clear();
            for (const nlohmann::json &mj : j.at("methods"))
                c.methods.push_back(MethodSpec::from_json(mj));
        }
        if (j.contains("student"))
            c.student = StudentConfig::from_json(j.at("student"));
        if (j.contains("grid")) {
            c.grid.clear();
            for (const nlohmann::json &gj : j.at("grid"))
                c.grid.push_back(datakit::CorruptionSpec::from_json(gj));
        }
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed experiment config: ") +
                          e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig desk_defaults() {
    ExperimentConfig c;
    // The desk-scale teacher needs a longer high-rate phase than the
    // full-scale recipe: on 5k samples the labeler plateaus for several
    // hundred steps before fitting, and dropping the rate too early
    // freezes it there. Stopping at 12 epochs keeps the labels soft.
    c.labeler_train.epochs = 12;
    c.labeler_train.lr_drop_after_epoch = 9;
    MethodSpec spec;
    for (const Method m : {Method::M1, Method::M2, Method::M3, Method::M4,
                           Method::BNN, Method::RS}) {
        spec.method = m;
        c.methods.push_back(spec);
    }
    c.grid.push_back({});
    for (const double rot : {0.0, 20.0})
        for (int i = 1; i <= 5; ++i) {
            datakit::CorruptionSpec g;
            g.gaussian_std = static_cast<double>(i) / 10.0;
            g.rotation_degrees = rot;
            c.grid.push_back(g);
        }
    return c;
}

MethodRun run_method(const MethodSpec &method,
                     const datakit::ImageDataset &train,
                     const labeler::SoftLabelSet *soft,
                     const StudentConfig &config, int num_classes,
                     std::uint64_t master_seed, std::size_t num_threads) {
    method.validate();
    const std::uint64_t teacher_seed =
        rng::derive_seed(master_seed, "teacher-train");
    const std::uint64_t label_seed = rng::derive_seed(master_seed, "label-gen");
    const std::uint64_t student_seed =
        rng::derive_seed(master_seed, "student-train");

    LabelArtifacts artifacts;
    artifacts.soft_labels = soft;
    StudentRun teacher;
    const bool needs_teacher =
        method.method == Method::BNN || method.method == Method::RS;
    if (needs_teacher) {
        StudentConfig teacher_config = config;
        teacher_config.dropout_rate =
            method.method == Method::BNN ? method.dropout_rate : 0.0;
        MethodSpec hard;
        hard.method = Method::M1;
        const TargetSet one_hot = build_targets(hard, train, {}, num_classes,
                                                label_seed, num_threads);
        teacher = train_student(one_hot.targets, one_hot.mask, train,
                                teacher_config, teacher_seed);
        artifacts.teacher = &teacher.model;
    }

    const TargetSet targets = build_targets(method, train, artifacts,
                                            num_classes, label_seed,
                                            num_threads);
    MethodRun run;
    run.method = method;
    run.masked_out = targets.masked_out;
    run.student = train_student(targets.targets, targets.mask, train, config,
                                student_seed);
    return run;
}

std::vector<SweepPoint>
sweep_labeler_grid(const std::vector<int> &qubit_counts,
                   const std::vector<int> &layer_counts,
                   const std::vector<vqc::Entanglement> &topologies,
                   const datakit::ImageDataset &train, int num_classes,
                   const labeler::TrainConfig &config, std::uint64_t seed) {
    if (qubit_counts.empty() || layer_counts.empty() || topologies.empty())
        throw ConfigError("the sweep needs at least one qubit count, layer "
                          "count and topology");
    std::vector<SweepPoint> points;
    std::uint64_t index = 0;
    for (const int q : qubit_counts)
        for (const int l : layer_counts)
            for (const vqc::Entanglement topo : topologies) {
                vqc::CircuitSpec c;
                c.num_qubits = q;
                c.encoding = vqc::Encoding::Angle;
                c.num_layers = l;
                c.entanglement = topo;
                c.reduction = vqc::Reduction::PostNetwork;
                c.rotation = vqc::Rotation::Ry;
                labeler::HybridLabeler lab = labeler::make_labeler(
                    static_cast<int>(train.pixels_per_image()), c, num_classes,
                    rng::derive_seed(seed, "sweep-init", index));
                const labeler::TrainLog log = labeler::train_labeler(
                    lab, train, config,
                    rng::derive_seed(seed, "labeler-train", index));
                SweepPoint p;
                p.qubits = q;
                p.layers = l;
                p.topology = topo;
                p.final_loss = log.final_loss;
                p.final_accuracy = log.final_accuracy;
                points.push_back(p);
                ++index;
            }
    return points;
}

} // namespace qplr::bench
