#include "qplr/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "qplr/errors.hpp"
#include "qplr/parallel.hpp"
#include "qplr/qgrad.hpp"
#include "qplr/rng.hpp"
#include "qplr/statevec.hpp"

namespace qplr::labeler {

using neural::Tensor;

vqc::CircuitSpec mnist_circuit() {
    vqc::CircuitSpec spec;
    spec.num_qubits = 10;
    spec.encoding = vqc::Encoding::Angle;
    spec.num_layers = 3;
    spec.entanglement = vqc::Entanglement::Ring;
    spec.reduction = vqc::Reduction::PostNetwork;
    spec.rotation = vqc::Rotation::Ry;
    return spec;
}

HybridLabeler make_labeler(int input_dim, vqc::CircuitSpec circuit,
                           int num_classes, std::uint64_t init_seed) {
    if (input_dim < 1)
        throw ConfigError("labeler input dimension must be >= 1");
    if (num_classes < 2)
        throw ConfigError("labeler needs at least two classes");
    if (circuit.encoding != vqc::Encoding::Angle)
        throw ConfigError(
            "the hybrid labeler drives its circuit through angle encoding");
    if (circuit.num_qubits < 1)
        throw ConfigError("labeler circuit needs at least one qubit");
    if (circuit.dim() < static_cast<std::size_t>(num_classes))
        throw ConfigError("labeler circuit has " +
                          std::to_string(circuit.dim()) +
                          " outcomes, fewer than " +
                          std::to_string(num_classes) + " classes");
    if (circuit.theta.empty() && circuit.num_theta() > 0) {
        rng::Stream init(rng::derive_seed(init_seed, "theta"));
        circuit.theta.resize(circuit.num_theta());
        for (double &t : circuit.theta) t = init.next_uniform(-M_PI, M_PI);
    }
    circuit.validate();

    HybridLabeler l;
    l.input_dim = input_dim;
    l.num_classes = num_classes;
    l.pre_net = neural::make_mlp({input_dim, 128, 128, circuit.num_qubits},
                                 rng::derive_seed(init_seed, "pre-network"),
                                 /*pi_sigmoid_output=*/true);
    l.post_net = neural::make_mlp(
        {static_cast<int>(circuit.dim()), 128, num_classes},
        rng::derive_seed(init_seed, "post-network"));
    l.circuit = std::move(circuit);
    return l;
}

namespace {

Tensor row_tensor(std::span<const float> image) {
    std::vector<double> vals(image.begin(), image.end());
    const int width = static_cast<int>(vals.size());
    return Tensor::from({1, width}, std::move(vals));
}

std::vector<double> pipeline_probs(HybridLabeler &l,
                                   std::span<const float> image,
                                   std::uint64_t shots, std::uint64_t seed,
                                   bool exact) {
    if (image.size() != static_cast<std::size_t>(l.input_dim))
        throw ContractViolation("labeler got an image of " +
                                std::to_string(image.size()) +
                                " pixels, expected " +
                                std::to_string(l.input_dim));
    Tensor x = row_tensor(image);
    Tensor angles = l.pre_net.forward(x);
    const vqc::EncodedInput enc = vqc::encode(angles.data, l.circuit);
    std::vector<double> born;
    if (exact) {
        born = vqc::forward(l.circuit, enc);
    } else {
        const sv::StateVector state = vqc::run(l.circuit, enc);
        const std::vector<std::uint64_t> counts =
            sv::sample_shots(state, shots, seed);
        born.resize(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i)
            born[i] =
                static_cast<double>(counts[i]) / static_cast<double>(shots);
    }
    const int width = static_cast<int>(born.size());
    Tensor logits = l.post_net.forward(Tensor::from({1, width}, std::move(born)));
    return neural::softmax(logits.data);
}

} // namespace

std::vector<double> class_probabilities(HybridLabeler &l,
                                        std::span<const float> image) {
    return pipeline_probs(l, image, 0, 0, /*exact=*/true);
}

std::vector<double> sampled_class_probabilities(HybridLabeler &l,
                                                std::span<const float> image,
                                                std::uint64_t shots,
                                                std::uint64_t seed) {
    if (shots == 0)
        throw ContractViolation("sampled_class_probabilities needs shots >= 1");
    return pipeline_probs(l, image, shots, seed, /*exact=*/false);
}

BatchGradients backprop_batch(HybridLabeler &l, const Tensor &x,
                              const Tensor &targets,
                              std::size_t num_threads) {
    if (x.shape.size() != 2 || x.dim(1) != l.input_dim)
        throw ContractViolation("backprop_batch: x must be [B, input_dim]");
    if (targets.shape.size() != 2 || targets.dim(0) != x.dim(0) ||
        targets.dim(1) != l.num_classes)
        throw ContractViolation("backprop_batch: targets must be [B, K]");
    const int batch = x.dim(0);
    const std::size_t n = static_cast<std::size_t>(l.circuit.num_qubits);
    const std::size_t dim = l.circuit.dim();

    Tensor angles = l.pre_net.forward(x, /*training=*/true); // [B, n]
    std::vector<vqc::EncodedInput> encoded(batch);
    Tensor born = Tensor::zeros({batch, static_cast<int>(dim)});
    par::parallel_for(batch, num_threads, [&](std::size_t, std::size_t b) {
        const std::span<const double> row{angles.data.data() + b * n, n};
        encoded[b] = vqc::encode(row, l.circuit);
        const std::vector<double> probs = vqc::forward(l.circuit, encoded[b]);
        std::copy(probs.begin(), probs.end(), born.data.begin() + b * dim);
    });

    Tensor logits = l.post_net.forward(born, /*training=*/true); // [B, K]
    const neural::LossGrad lg = neural::softmax_cross_entropy(logits, targets);
    Tensor d_born = l.post_net.backward(lg.dlogits); // [B, 2^n]

    Tensor d_phi = Tensor::zeros({batch, static_cast<int>(n)});
    std::vector<std::vector<double>> theta_parts(batch);
    par::parallel_for(batch, num_threads, [&](std::size_t, std::size_t b) {
        const std::span<const double> w{d_born.data.data() + b * dim, dim};
        qgrad::QuantumVjp vjp = qgrad::adjoint_vjp(l.circuit, encoded[b], w);
        theta_parts[b] = std::move(vjp.d_theta);
        std::copy(vjp.d_phi.begin(), vjp.d_phi.end(),
                  d_phi.data.begin() + b * n);
    });
    l.pre_net.backward(d_phi);

    BatchGradients out;
    out.loss = lg.loss;
    out.theta_grad.assign(l.circuit.num_theta(), 0.0);
    // dlogits already carries the 1/B mean scaling; summing the per-sample
    // terms in index order gives the batch-mean gradient deterministically
    // for any thread count.
    for (int b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < out.theta_grad.size(); ++p)
            out.theta_grad[p] += theta_parts[b][p];

    const std::size_t k = static_cast<std::size_t>(l.num_classes);
    for (int b = 0; b < batch; ++b) {
        const std::span<const double> zrow{logits.data.data() + b * k, k};
        const std::span<const double> trow{targets.data.data() + b * k, k};
        if (neural::argmax(zrow) == neural::argmax(trow)) ++out.correct;
    }
    return out;
}

namespace {

struct PassStats {
    double mean_loss = 0.0;
    double accuracy = 0.0;
};

/// Forward-only full pass: mean loss and argmax accuracy against the hard
/// labels.
PassStats eval_pass(HybridLabeler &l, const datakit::ImageDataset &data,
                    int batch_size, std::size_t num_threads) {
    const std::size_t total = data.size();
    const std::size_t n = static_cast<std::size_t>(l.circuit.num_qubits);
    const std::size_t dim = l.circuit.dim();
    const std::size_t k = static_cast<std::size_t>(l.num_classes);
    double loss_sum = 0.0;
    long correct = 0;
    for (std::size_t start = 0; start < total;
         start += static_cast<std::size_t>(batch_size)) {
        const int rows = static_cast<int>(
            std::min<std::size_t>(batch_size, total - start));
        std::vector<int> idx(rows);
        std::iota(idx.begin(), idx.end(), static_cast<int>(start));
        Tensor x = datakit::flat_batch(data, idx);
        std::vector<int> batch_labels(rows);
        for (int r = 0; r < rows; ++r)
            batch_labels[r] = data.labels[start + r];
        Tensor targets = neural::one_hot_batch(batch_labels, l.num_classes);

        Tensor angles = l.pre_net.forward(x);
        Tensor born = Tensor::zeros({rows, static_cast<int>(dim)});
        par::parallel_for(rows, num_threads, [&](std::size_t, std::size_t b) {
            const std::span<const double> row{angles.data.data() + b * n, n};
            const vqc::EncodedInput enc = vqc::encode(row, l.circuit);
            const std::vector<double> probs = vqc::forward(l.circuit, enc);
            std::copy(probs.begin(), probs.end(), born.data.begin() + b * dim);
        });
        Tensor logits = l.post_net.forward(born);
        const neural::LossGrad lg =
            neural::softmax_cross_entropy(logits, targets);
        loss_sum += lg.loss * rows;
        for (int b = 0; b < rows; ++b) {
            const std::span<const double> zrow{logits.data.data() + b * k, k};
            if (neural::argmax(zrow) == batch_labels[b]) ++correct;
        }
    }
    PassStats out;
    out.mean_loss = loss_sum / static_cast<double>(total);
    out.accuracy = static_cast<double>(correct) / static_cast<double>(total);
    return out;
}

} // namespace

TrainLog train_labeler(HybridLabeler &l, const datakit::ImageDataset &data,
                       const TrainConfig &config, std::uint64_t seed) {
    if (data.size() == 0)
        throw ContractViolation("train_labeler: empty dataset");
    if (data.corrupted)
        throw ConfigError(
            "train_labeler: refusing a corrupted dataset; train on clean "
            "images");
    if (data.pixels_per_image() != static_cast<std::size_t>(l.input_dim))
        throw ContractViolation("train_labeler: dataset images have " +
                                std::to_string(data.pixels_per_image()) +
                                " pixels, labeler expects " +
                                std::to_string(l.input_dim));
    for (const int label : data.labels)
        if (label < 0 || label >= l.num_classes)
            throw ContractViolation(
                "train_labeler: label " + std::to_string(label) +
                " outside [0, " + std::to_string(l.num_classes) + ")");
    if (config.batch_size < 1 || config.epochs < 0 ||
        config.learning_rate <= 0.0 || config.lr_drop_factor <= 0.0)
        throw ConfigError("train_labeler: invalid hyperparameters");

    TrainLog log;
    log.initial_loss =
        eval_pass(l, data, config.batch_size, config.num_threads).mean_loss;

    // a layer-free circuit has no angles; the networks still train
    Tensor theta;
    if (l.circuit.num_theta() > 0) {
        theta = Tensor::from({static_cast<int>(l.circuit.num_theta())},
                             l.circuit.theta);
        theta.ensure_grad();
    }
    std::vector<Tensor *> params = l.pre_net.parameters();
    if (!theta.data.empty()) params.push_back(&theta);
    for (Tensor *p : l.post_net.parameters()) params.push_back(p);
    neural::Adam opt(config.learning_rate);

    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    long step = 0;
    bool stopped = false;
    for (int epoch = 1; epoch <= config.epochs && !stopped; ++epoch) {
        const double lr =
            config.learning_rate *
            (epoch > config.lr_drop_after_epoch ? config.lr_drop_factor : 1.0);
        opt.set_lr(lr);
        rng::Stream shuffle(rng::derive_seed(seed, "shuffle", epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = shuffle.next_below(i);
            std::swap(order[i - 1], order[j]);
        }

        double loss_sum = 0.0;
        long correct = 0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size() && !stopped;
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t rows = std::min<std::size_t>(
                config.batch_size, order.size() - start);
            const std::span<const int> idx{order.data() + start, rows};
            Tensor x = datakit::flat_batch(data, idx);
            std::vector<int> batch_labels(rows);
            for (std::size_t r = 0; r < rows; ++r)
                batch_labels[r] = data.labels[static_cast<std::size_t>(idx[r])];
            Tensor targets = neural::one_hot_batch(batch_labels, l.num_classes);

            l.pre_net.zero_grad();
            l.post_net.zero_grad();
            const BatchGradients bg =
                backprop_batch(l, x, targets, config.num_threads);
            if (!std::isfinite(bg.loss))
                throw TrainingError(
                    "labeler training diverged (non-finite loss) at epoch " +
                    std::to_string(epoch) + ", step " +
                    std::to_string(step + 1));
            std::copy(bg.theta_grad.begin(), bg.theta_grad.end(),
                      theta.grad.begin());
            opt.step(params);
            l.circuit.theta = theta.data;

            loss_sum += bg.loss * static_cast<double>(rows);
            correct += bg.correct;
            seen += rows;
            ++step;
            if (config.max_steps > 0 && step >= config.max_steps)
                stopped = true;
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_loss = loss_sum / static_cast<double>(seen);
        stats.accuracy = static_cast<double>(correct) / static_cast<double>(seen);
        stats.learning_rate = lr;
        log.epochs.push_back(stats);
    }
    log.steps = step;
    log.final_loss =
        log.epochs.empty() ? log.initial_loss : log.epochs.back().mean_loss;
    log.final_accuracy =
        eval_pass(l, data, config.batch_size, config.num_threads).accuracy;
    return log;
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"lr_drop_after_epoch", lr_drop_after_epoch},
            {"lr_drop_factor", lr_drop_factor},
            {"max_steps", max_steps},
            {"num_threads", num_threads}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json &j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_drop_after_epoch = j.value("lr_drop_after_epoch", c.lr_drop_after_epoch);
    c.lr_drop_factor = j.value("lr_drop_factor", c.lr_drop_factor);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.num_threads = j.value("num_threads", c.num_threads);
    return c;
}

nlohmann::json TrainLog::to_json() const {
    nlohmann::json epoch_rows = nlohmann::json::array();
    for (const EpochStats &e : epochs)
        epoch_rows.push_back({{"epoch", e.epoch},
                              {"loss", e.mean_loss},
                              {"accuracy", e.accuracy},
                              {"learning_rate", e.learning_rate}});
    return {{"initial_loss", initial_loss},
            {"epochs", std::move(epoch_rows)},
            {"steps", steps},
            {"final_loss", final_loss},
            {"final_accuracy", final_accuracy}};
}

void SoftLabelSet::validate() const {
    if (num_classes < 1)
        throw ContractViolation("soft labels: class count must be >= 1");
    const double conf_floor = 1.0 / num_classes - 1e-9;
    for (const SoftLabel &sl : labels) {
        const std::string where =
            " at sample " + std::to_string(sl.sample_index);
        if (sl.probs.size() != static_cast<std::size_t>(num_classes))
            throw ContractViolation("soft labels: wrong vector width" + where);
        double sum = 0.0;
        double max_p = 0.0;
        for (const double p : sl.probs) {
            if (!(p >= -1e-12))
                throw ContractViolation("soft labels: negative probability" +
                                        where);
            sum += p;
            max_p = std::max(max_p, p);
        }
        if (std::abs(sum - 1.0) > 1e-8)
            throw ContractViolation("soft labels: vector sums to " +
                                    std::to_string(sum) + where);
        if (sl.confidence < conf_floor || sl.confidence > 1.0 + 1e-9)
            throw ContractViolation("soft labels: confidence outside [1/K, 1]" +
                                    where);
        if (std::abs(sl.confidence - max_p) > 1e-8)
            throw ContractViolation(
                "soft labels: confidence disagrees with max probability" +
                where);
    }
}

SoftLabelSet generate_soft_labels(const HybridLabeler &l,
                                  const datakit::ImageDataset &data,
                                  std::uint64_t shots, std::uint64_t seed,
                                  bool exact, std::size_t num_threads) {
    if (!exact && shots == 0)
        throw ContractViolation("generate_soft_labels needs shots >= 1");
    const std::size_t total = data.size();
    const std::size_t workers_wanted =
        std::min(par::resolve_threads(num_threads),
                 std::max<std::size_t>(total, 1));
    // Each worker gets its own labeler copy because forward passes refresh
    // layer caches.
    std::vector<HybridLabeler> workers(workers_wanted, l);

    SoftLabelSet out;
    out.num_classes = l.num_classes;
    out.shots = exact ? 0 : shots;
    out.circuit_hash = l.circuit.content_hash();
    out.seed = seed;
    out.labels.resize(total);
    par::parallel_for(total, workers_wanted, [&](std::size_t w, std::size_t i) {
        HybridLabeler &lab = workers[w];
        std::vector<double> probs =
            exact ? class_probabilities(lab, data.image(i))
                  : sampled_class_probabilities(
                        lab, data.image(i), shots,
                        rng::derive_seed(seed, "shots", data.content_hash(i)));
        SoftLabel &sl = out.labels[i];
        sl.sample_index = i;
        sl.hard_label = data.labels[i];
        sl.confidence = *std::max_element(probs.begin(), probs.end());
        sl.probs = std::move(probs);
    });
    return out;
}

ConfidenceFilter filter_by_confidence(const SoftLabelSet &labels,
                                      double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ConfigError("confidence threshold must lie in [0, 1], got " +
                          std::to_string(threshold));
    ConfidenceFilter out;
    out.kept.num_classes = labels.num_classes;
    out.kept.shots = labels.shots;
    out.kept.circuit_hash = labels.circuit_hash;
    out.kept.seed = labels.seed;
    out.keep_mask.assign(labels.labels.size(), 0);
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        if (labels.labels[i].confidence >= threshold) {
            out.keep_mask[i] = 1;
            out.kept.labels.push_back(labels.labels[i]);
        }
    }
    out.retained_fraction =
        labels.labels.empty()
            ? 0.0
            : static_cast<double>(out.kept.labels.size()) /
                  static_cast<double>(labels.labels.size());
    return out;
}

namespace {

std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_double(const std::string &s, const std::string &context) {
    char *end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw IngestionError(context + ": bad number '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string &s, const std::string &context) {
    char *end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || s[0] == '-')
        throw IngestionError(context + ": bad count '" + s + "'");
    return static_cast<std::uint64_t>(v);
}

} // namespace

void save_soft_labels(const SoftLabelSet &set, const std::string &path) {
    set.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IngestionError("cannot open " + path + " for writing");
    out << "qplr-labels v1, K=" << set.num_classes << ", M=" << set.shots
        << ", circuit=" << set.circuit_hash << "\n";
    for (const SoftLabel &sl : set.labels) {
        out << sl.sample_index << ',' << sl.hard_label;
        for (const double p : sl.probs) out << ',' << format_g9(p);
        out << ',' << format_g9(sl.confidence) << '\n';
    }
    out.flush();
    if (!out)
        throw IngestionError("short write to " + path);
}

SoftLabelSet load_soft_labels(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestionError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw IngestionError(path + ": missing header line");

    const std::string magic = "qplr-labels v1, K=";
    if (line.rfind(magic, 0) != 0)
        throw IngestionError(path + ": not a qplr-labels v1 file");
    SoftLabelSet set;
    const char *p = line.c_str() + magic.size();
    char *end = nullptr;
    const long k = std::strtol(p, &end, 10);
    if (end == p || k < 1)
        throw IngestionError(path + ": bad class count in header");
    set.num_classes = static_cast<int>(k);
    p = end;
    const char *m_tag = ", M=";
    if (std::strncmp(p, m_tag, std::strlen(m_tag)) != 0)
        throw IngestionError(path + ": malformed header (missing shot count)");
    p += std::strlen(m_tag);
    const unsigned long long shots = std::strtoull(p, &end, 10);
    if (end == p)
        throw IngestionError(path + ": bad shot count in header");
    set.shots = shots;
    p = end;
    const char *c_tag = ", circuit=";
    if (std::strncmp(p, c_tag, std::strlen(c_tag)) != 0)
        throw IngestionError(path + ": malformed header (missing circuit hash)");
    p += std::strlen(c_tag);
    set.circuit_hash = std::string(p);
    if (set.circuit_hash.empty() ||
        set.circuit_hash.find(',') != std::string::npos)
        throw IngestionError(path + ": bad circuit hash in header");

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        const std::string context = path + " line " + std::to_string(row);
        const std::vector<std::string> fields = split_csv(line);
        const std::size_t expected = 2 + static_cast<std::size_t>(k) + 1;
        if (fields.size() != expected)
            throw IngestionError(context + ": expected " +
                                 std::to_string(expected) + " fields, got " +
                                 std::to_string(fields.size()));
        SoftLabel sl;
        sl.sample_index = parse_u64(fields[0], context);
        const double hard = parse_double(fields[1], context);
        if (hard != std::floor(hard) || hard < 0 || hard >= k)
            throw IngestionError(context + ": bad hard label '" + fields[1] +
                                 "'");
        sl.hard_label = static_cast<int>(hard);
        sl.probs.resize(static_cast<std::size_t>(k));
        for (long i = 0; i < k; ++i)
            sl.probs[static_cast<std::size_t>(i)] =
                parse_double(fields[2 + static_cast<std::size_t>(i)], context);
        sl.confidence = parse_double(fields.back(), context);
        set.labels.push_back(std::move(sl));
    }
    try {
        set.validate();
    } catch (const ContractViolation &e) {
        throw IngestionError(path + ": " + e.what());
    }
    return set;
}

void save_labeler(HybridLabeler &l, const std::string &prefix) {
    const nlohmann::json meta = {{"input_dim", l.input_dim},
                                 {"num_classes", l.num_classes},
                                 {"circuit", l.circuit.to_json()}};
    const std::string meta_path = prefix + ".labeler.json";
    std::ofstream out(meta_path, std::ios::binary);
    if (!out)
        throw IngestionError("cannot open " + meta_path + " for writing");
    out << meta.dump(2) << "\n";
    if (!out)
        throw IngestionError("short write to " + meta_path);
    neural::save_checkpoint(l.pre_net, prefix + ".pre.ckpt");
    neural::save_checkpoint(l.post_net, prefix + ".post.ckpt");
}

HybridLabeler load_labeler(const std::string &prefix) {
    const std::string meta_path = prefix + ".labeler.json";
    std::ifstream in(meta_path, std::ios::binary);
    if (!in)
        throw IngestionError("cannot open " + meta_path);
    nlohmann::json meta;
    int input_dim = 0;
    int num_classes = 0;
    vqc::CircuitSpec circuit;
    try {
        meta = nlohmann::json::parse(in);
        input_dim = meta.at("input_dim").get<int>();
        num_classes = meta.at("num_classes").get<int>();
        circuit = vqc::CircuitSpec::from_json(meta.at("circuit"));
    } catch (const nlohmann::json::exception &e) {
        throw IngestionError(meta_path + ": " + e.what());
    }
    HybridLabeler l =
        make_labeler(input_dim, std::move(circuit), num_classes, 0);
    neural::load_checkpoint(l.pre_net, prefix + ".pre.ckpt");
    neural::load_checkpoint(l.post_net, prefix + ".post.ckpt");
    return l;
}

} // namespace qplr::labeler
