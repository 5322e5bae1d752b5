#include "qplr/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "qplr/errors.hpp"

namespace qplr::neural {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLogFloor = 1e-12;

std::size_t shape_product(const std::vector<int> &shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ContractViolation("tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for both weights and biases.
// Keeps the initial logits of a deep stack near zero, so the starting loss
// of a K-class head sits at the ln K guess baseline.
void fan_in_uniform(Tensor &weight, Tensor &bias, int fan_in,
                    rng::Stream &init) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double &w : weight.data) w = init.next_uniform(-bound, bound);
    for (double &b : bias.data) b = init.next_uniform(-bound, bound);
}

void check_rank(const Tensor &x, std::size_t rank, const char *who) {
    if (x.shape.size() != rank)
        throw ContractViolation(std::string(who) + ": wrong tensor rank");
}

} // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    t.data.assign(shape_product(shape), 0.0);
    t.shape = std::move(shape);
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    if (shape_product(shape) != values.size())
        throw ContractViolation("tensor data length does not match shape");
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    return t;
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() { grad.assign(data.size(), 0.0); }

// ---- Dense ----

Dense::Dense(int in_features, int out_features, rng::Stream &init)
    : in_(in_features), out_(out_features) {
    weight = Tensor::zeros({out_, in_});
    bias = Tensor::zeros({out_});
    fan_in_uniform(weight, bias, in_, init);
}

Tensor Dense::forward(const Tensor &x, bool) {
    check_rank(x, 2, "dense");
    if (x.dim(1) != in_) throw ContractViolation("dense: input width mismatch");
    const int n = x.dim(0);
    cached_input_ = x;
    Tensor y = Tensor::zeros({n, out_});
    for (int i = 0; i < n; ++i) {
        const double *xi = x.data.data() + static_cast<std::size_t>(i) * in_;
        double *yi = y.data.data() + static_cast<std::size_t>(i) * out_;
        for (int o = 0; o < out_; ++o) {
            const double *wo = weight.data.data() +
                               static_cast<std::size_t>(o) * in_;
            double acc = bias.data[o];
            for (int k = 0; k < in_; ++k) acc += wo[k] * xi[k];
            yi[o] = acc;
        }
    }
    return y;
}

Tensor Dense::backward(const Tensor &dy) {
    check_rank(dy, 2, "dense");
    const int n = dy.dim(0);
    weight.ensure_grad();
    bias.ensure_grad();
    Tensor dx = Tensor::zeros({n, in_});
    for (int i = 0; i < n; ++i) {
        const double *xi =
            cached_input_.data.data() + static_cast<std::size_t>(i) * in_;
        const double *gi = dy.data.data() + static_cast<std::size_t>(i) * out_;
        double *dxi = dx.data.data() + static_cast<std::size_t>(i) * in_;
        for (int o = 0; o < out_; ++o) {
            const double g = gi[o];
            if (g == 0.0) continue;
            const double *wo = weight.data.data() +
                               static_cast<std::size_t>(o) * in_;
            double *dwo = weight.grad.data() +
                          static_cast<std::size_t>(o) * in_;
            bias.grad[o] += g;
            for (int k = 0; k < in_; ++k) {
                dwo[k] += g * xi[k];
                dxi[k] += g * wo[k];
            }
        }
    }
    return dx;
}

nlohmann::json Dense::manifest() const {
    return {{"type", "dense"}, {"in", in_}, {"out", out_}};
}

std::unique_ptr<Layer> Dense::clone() const {
    return std::make_unique<Dense>(*this);
}

// ---- ReLU ----

Tensor ReLU::forward(const Tensor &x, bool) {
    Tensor y = x;
    mask_.assign(x.size(), false);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        if (y.data[i] > 0.0) {
            mask_[i] = true;
        } else {
            y.data[i] = 0.0;
        }
    }
    return y;
}

Tensor ReLU::backward(const Tensor &dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        if (!mask_[i]) dx.data[i] = 0.0;
    return dx;
}

nlohmann::json ReLU::manifest() const { return {{"type", "relu"}}; }

std::unique_ptr<Layer> ReLU::clone() const {
    return std::make_unique<ReLU>(*this);
}

// ---- Conv2d ----

Conv2d::Conv2d(int in_channels, int out_channels, int kernel,
               rng::Stream &init)
    : in_(in_channels), out_(out_channels), kernel_(kernel) {
    weight = Tensor::zeros({out_, in_, kernel_, kernel_});
    bias = Tensor::zeros({out_});
    fan_in_uniform(weight, bias, in_ * kernel_ * kernel_, init);
}

Tensor Conv2d::forward(const Tensor &x, bool) {
    check_rank(x, 4, "conv2d");
    if (x.dim(1) != in_) throw ContractViolation("conv2d: channel mismatch");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = h - kernel_ + 1, ow = w - kernel_ + 1;
    if (oh < 1 || ow < 1)
        throw ContractViolation("conv2d: input smaller than kernel");
    cached_input_ = x;
    Tensor y = Tensor::zeros({n, out_, oh, ow});
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    const std::size_t ker_plane = static_cast<std::size_t>(kernel_) * kernel_;
    for (int img = 0; img < n; ++img) {
        const double *xb =
            x.data.data() + static_cast<std::size_t>(img) * in_ * in_plane;
        double *yb =
            y.data.data() + static_cast<std::size_t>(img) * out_ * out_plane;
        for (int o = 0; o < out_; ++o) {
            double *yo = yb + static_cast<std::size_t>(o) * out_plane;
            for (std::size_t p = 0; p < out_plane; ++p) yo[p] = bias.data[o];
            for (int c = 0; c < in_; ++c) {
                const double *xc = xb + static_cast<std::size_t>(c) * in_plane;
                const double *wc = weight.data.data() +
                                   (static_cast<std::size_t>(o) * in_ + c) *
                                       ker_plane;
                for (int r = 0; r < oh; ++r) {
                    for (int s = 0; s < ow; ++s) {
                        double acc = 0.0;
                        for (int i = 0; i < kernel_; ++i) {
                            const double *row = xc + (r + i) * w + s;
                            const double *krow = wc + i * kernel_;
                            for (int j = 0; j < kernel_; ++j)
                                acc += krow[j] * row[j];
                        }
                        yo[static_cast<std::size_t>(r) * ow + s] += acc;
                    }
                }
            }
        }
    }
    return y;
}

Tensor Conv2d::backward(const Tensor &dy) {
    check_rank(dy, 4, "conv2d");
    const Tensor &x = cached_input_;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = dy.dim(2), ow = dy.dim(3);
    weight.ensure_grad();
    bias.ensure_grad();
    Tensor dx = Tensor::zeros(x.shape);
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    const std::size_t ker_plane = static_cast<std::size_t>(kernel_) * kernel_;
    for (int img = 0; img < n; ++img) {
        const double *xb =
            x.data.data() + static_cast<std::size_t>(img) * in_ * in_plane;
        double *dxb =
            dx.data.data() + static_cast<std::size_t>(img) * in_ * in_plane;
        const double *gb =
            dy.data.data() + static_cast<std::size_t>(img) * out_ * out_plane;
        for (int o = 0; o < out_; ++o) {
            const double *go = gb + static_cast<std::size_t>(o) * out_plane;
            for (std::size_t p = 0; p < out_plane; ++p) bias.grad[o] += go[p];
            for (int c = 0; c < in_; ++c) {
                const double *xc = xb + static_cast<std::size_t>(c) * in_plane;
                double *dxc = dxb + static_cast<std::size_t>(c) * in_plane;
                const std::size_t wbase =
                    (static_cast<std::size_t>(o) * in_ + c) * ker_plane;
                const double *wc = weight.data.data() + wbase;
                double *dwc = weight.grad.data() + wbase;
                for (int r = 0; r < oh; ++r) {
                    for (int s = 0; s < ow; ++s) {
                        const double g = go[static_cast<std::size_t>(r) * ow + s];
                        if (g == 0.0) continue;
                        for (int i = 0; i < kernel_; ++i) {
                            const double *xrow = xc + (r + i) * w + s;
                            double *dxrow = dxc + (r + i) * w + s;
                            const double *krow = wc + i * kernel_;
                            double *dkrow = dwc + i * kernel_;
                            for (int j = 0; j < kernel_; ++j) {
                                dkrow[j] += g * xrow[j];
                                dxrow[j] += g * krow[j];
                            }
                        }
                    }
                }
            }
        }
    }
    return dx;
}

nlohmann::json Conv2d::manifest() const {
    return {{"type", "conv2d"},
            {"in_channels", in_},
            {"out_channels", out_},
            {"kernel", kernel_}};
}

std::unique_ptr<Layer> Conv2d::clone() const {
    return std::make_unique<Conv2d>(*this);
}

// ---- MaxPool2 ----

Tensor MaxPool2::forward(const Tensor &x, bool) {
    check_rank(x, 4, "maxpool2");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0)
        throw ContractViolation("maxpool2: spatial dims must be even");
    const int oh = h / 2, ow = w / 2;
    input_shape_ = x.shape;
    Tensor y = Tensor::zeros({n, c, oh, ow});
    argmax_.assign(y.size(), 0);
    std::size_t out_idx = 0;
    for (int plane = 0; plane < n * c; ++plane) {
        const double *xp = x.data.data() +
                           static_cast<std::size_t>(plane) * h * w;
        const std::size_t plane_base = static_cast<std::size_t>(plane) * h * w;
        for (int r = 0; r < oh; ++r) {
            for (int s = 0; s < ow; ++s) {
                const int r0 = 2 * r, s0 = 2 * s;
                std::size_t best = static_cast<std::size_t>(r0) * w + s0;
                double best_val = xp[best];
                for (int i = 0; i < 2; ++i) {
                    for (int j = 0; j < 2; ++j) {
                        const std::size_t idx =
                            static_cast<std::size_t>(r0 + i) * w + (s0 + j);
                        if (xp[idx] > best_val) {
                            best_val = xp[idx];
                            best = idx;
                        }
                    }
                }
                y.data[out_idx] = best_val;
                argmax_[out_idx] = plane_base + best;
                ++out_idx;
            }
        }
    }
    return y;
}

Tensor MaxPool2::backward(const Tensor &dy) {
    Tensor dx = Tensor::zeros(input_shape_);
    for (std::size_t i = 0; i < dy.data.size(); ++i)
        dx.data[argmax_[i]] += dy.data[i];
    return dx;
}

nlohmann::json MaxPool2::manifest() const { return {{"type", "maxpool2"}}; }

std::unique_ptr<Layer> MaxPool2::clone() const {
    return std::make_unique<MaxPool2>(*this);
}

// ---- Flatten ----

Tensor Flatten::forward(const Tensor &x, bool) {
    input_shape_ = x.shape;
    const int n = x.dim(0);
    Tensor y = x;
    y.shape = {n, static_cast<int>(x.size()) / n};
    return y;
}

Tensor Flatten::backward(const Tensor &dy) {
    Tensor dx = dy;
    dx.shape = input_shape_;
    return dx;
}

nlohmann::json Flatten::manifest() const { return {{"type", "flatten"}}; }

std::unique_ptr<Layer> Flatten::clone() const {
    return std::make_unique<Flatten>(*this);
}

// ---- Dropout ----

Dropout::Dropout(double rate, std::uint64_t seed)
    : rate_(rate), stream_(seed) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("dropout rate must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor &x, bool training) {
    if (!training || rate_ == 0.0) {
        mask_.clear();
        return x;
    }
    const double keep = 1.0 - rate_;
    const double scale = 1.0 / keep;
    Tensor y = x;
    mask_.assign(x.size(), 0.0);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        if (stream_.next_unit() < rate_) {
            y.data[i] = 0.0;
        } else {
            mask_[i] = scale;
            y.data[i] *= scale;
        }
    }
    return y;
}

Tensor Dropout::backward(const Tensor &dy) {
    if (mask_.empty()) return dy;
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= mask_[i];
    return dx;
}

nlohmann::json Dropout::manifest() const {
    return {{"type", "dropout"}, {"rate", rate_}};
}

std::unique_ptr<Layer> Dropout::clone() const {
    return std::make_unique<Dropout>(*this);
}

void Dropout::reseed(std::uint64_t seed) { stream_ = rng::Stream(seed); }

// ---- PiSigmoid ----

Tensor PiSigmoid::forward(const Tensor &x, bool) {
    Tensor y = x;
    for (double &v : y.data) v = kPi / (1.0 + std::exp(-v));
    cached_output_ = y;
    return y;
}

Tensor PiSigmoid::backward(const Tensor &dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
        const double y = cached_output_.data[i];
        dx.data[i] *= y * (kPi - y) / kPi;
    }
    return dx;
}

nlohmann::json PiSigmoid::manifest() const {
    return {{"type", "pi_sigmoid"}};
}

std::unique_ptr<Layer> PiSigmoid::clone() const {
    return std::make_unique<PiSigmoid>(*this);
}

// ---- Model ----

Model::Model(const Model &other) {
    layers_.reserve(other.layers_.size());
    for (const auto &layer : other.layers_) layers_.push_back(layer->clone());
}

Model &Model::operator=(const Model &other) {
    if (this == &other) return *this;
    layers_.clear();
    layers_.reserve(other.layers_.size());
    for (const auto &layer : other.layers_) layers_.push_back(layer->clone());
    return *this;
}

Tensor Model::forward(const Tensor &x, bool training) {
    Tensor cur = x;
    for (auto &layer : layers_) cur = layer->forward(cur, training);
    return cur;
}

Tensor Model::backward(const Tensor &dy) {
    Tensor cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        cur = (*it)->backward(cur);
    return cur;
}

std::vector<Tensor *> Model::parameters() {
    std::vector<Tensor *> out;
    for (auto &layer : layers_)
        for (Tensor *p : layer->params()) out.push_back(p);
    return out;
}

std::size_t Model::num_params() {
    std::size_t n = 0;
    for (Tensor *p : parameters()) n += p->size();
    return n;
}

void Model::zero_grad() {
    for (Tensor *p : parameters()) p->zero_grad();
}

nlohmann::json Model::manifest() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto &layer : layers_) layers.push_back(layer->manifest());
    return layers;
}

void Model::reseed_stochastic(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->reseed(rng::derive_seed(seed, "dropout", i));
}

Model make_lenet(std::uint64_t init_seed, double dropout_rate,
                 int num_classes) {
    if (num_classes < 2) throw ConfigError("lenet needs at least 2 classes");
    rng::Stream init(init_seed);
    Model m;
    m.add<Conv2d>(1, 6, 5, init);
    m.add<ReLU>();
    m.add<MaxPool2>();
    m.add<Conv2d>(6, 16, 5, init);
    m.add<ReLU>();
    m.add<MaxPool2>();
    m.add<Flatten>();
    m.add<Dense>(256, 120, init);
    m.add<ReLU>();
    if (dropout_rate > 0.0) m.add<Dropout>(dropout_rate);
    m.add<Dense>(120, 84, init);
    m.add<ReLU>();
    if (dropout_rate > 0.0) m.add<Dropout>(dropout_rate);
    m.add<Dense>(84, num_classes, init);
    return m;
}

Model make_mlp(const std::vector<int> &dims, std::uint64_t init_seed,
               bool pi_sigmoid_output) {
    if (dims.size() < 2) throw ConfigError("mlp needs at least 2 dims");
    rng::Stream init(init_seed);
    Model m;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        m.add<Dense>(dims[i], dims[i + 1], init);
        if (i + 2 < dims.size()) m.add<ReLU>();
    }
    if (pi_sigmoid_output) m.add<PiSigmoid>();
    return m;
}

// ---- losses ----

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        sum += out[i];
    }
    for (double &v : out) v /= sum;
    return out;
}

LossGrad softmax_cross_entropy(const Tensor &logits, const Tensor &targets) {
    check_rank(logits, 2, "softmax_cross_entropy");
    if (logits.shape != targets.shape)
        throw ContractViolation("softmax_cross_entropy: shape mismatch");
    const int n = logits.dim(0), k = logits.dim(1);
    LossGrad out;
    out.dlogits = Tensor::zeros(logits.shape);
    for (int i = 0; i < n; ++i) {
        const std::span<const double> row(
            logits.data.data() + static_cast<std::size_t>(i) * k,
            static_cast<std::size_t>(k));
        const double *t = targets.data.data() + static_cast<std::size_t>(i) * k;
        const std::vector<double> p = softmax(row);
        double *g = out.dlogits.data.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            if (t[j] > 0.0)
                out.loss -= t[j] * std::log(std::max(p[j], kLogFloor));
            g[j] = (p[j] - t[j]) / n;
        }
    }
    out.loss /= n;
    return out;
}

double soft_cross_entropy(std::span<const double> pred,
                          std::span<const double> target) {
    if (pred.size() != target.size())
        throw ContractViolation("soft_cross_entropy: length mismatch");
    double target_sum = 0.0;
    for (double t : target) target_sum += t;
    if (std::abs(target_sum - 1.0) > 1e-6)
        throw ContractViolation("soft_cross_entropy: target is not normalized");
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (target[i] > 0.0)
            loss -= target[i] * std::log(std::max(pred[i], kLogFloor));
    return loss;
}

std::vector<double> smooth_labels(int klass, int num_classes, double eps) {
    if (eps < 0.0 || eps >= 1.0)
        throw ConfigError("smoothing epsilon must be in [0, 1)");
    if (klass < 0 || klass >= num_classes)
        throw ContractViolation("smooth_labels: class out of range");
    std::vector<double> out(num_classes,
                            num_classes > 1 ? eps / (num_classes - 1) : 0.0);
    out[klass] = 1.0 - eps;
    return out;
}

Tensor one_hot_batch(std::span<const int> labels, int num_classes) {
    Tensor t = Tensor::zeros({static_cast<int>(labels.size()), num_classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw ContractViolation("one_hot_batch: label out of range");
        t.data[i * num_classes + labels[i]] = 1.0;
    }
    return t;
}

int argmax(std::span<const double> values) {
    if (values.empty()) throw ContractViolation("argmax of empty vector");
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = static_cast<int>(i);
    return best;
}

// ---- Adam ----

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<Tensor *> &params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i]->size(), 0.0);
            v_[i].assign(params[i]->size(), 0.0);
        }
    }
    if (m_.size() != params.size())
        throw ContractViolation("adam: parameter list changed size");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, step_count_);
    const double bc2 = 1.0 - std::pow(beta2_, step_count_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor &p = *params[i];
        if (p.grad.size() != p.data.size())
            throw ContractViolation("adam: missing gradient");
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            const double g = p.grad[j];
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

Tensor dropout_forward(const Tensor &x, double rate, bool training,
                       std::uint64_t seed) {
    Dropout layer(rate, seed);
    return layer.forward(x, training);
}

// ---- checkpoints ----

namespace {
constexpr char kMagic[] = "QPLRNN1";
constexpr std::size_t kMagicLen = 7;
} // namespace

void save_checkpoint(Model &model, const std::string &path,
                     const nlohmann::json &extra) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot open checkpoint for writing: " + path);
    const nlohmann::json header = {{"layers", model.manifest()},
                                   {"extra", extra}};
    const std::string manifest = header.dump();
    out.write(kMagic, kMagicLen);
    const std::uint32_t len = static_cast<std::uint32_t>(manifest.size());
    // Header length and parameter blocks are little-endian; the supported
    // targets are all little-endian so raw writes serialize correctly.
    out.write(reinterpret_cast<const char *>(&len), sizeof len);
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    for (Tensor *p : model.parameters())
        out.write(reinterpret_cast<const char *>(p->data.data()),
                  static_cast<std::streamsize>(p->data.size() * sizeof(double)));
    if (!out) throw IngestionError("failed writing checkpoint: " + path);
}

nlohmann::json load_checkpoint(Model &model, const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open checkpoint: " + path);
    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw IngestionError("bad checkpoint magic: " + path);
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char *>(&len), sizeof len);
    if (!in || len == 0 || len > (1u << 26))
        throw IngestionError("bad checkpoint manifest length: " + path);
    std::string manifest(len, '\0');
    in.read(manifest.data(), len);
    if (!in) throw IngestionError("truncated checkpoint manifest: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(manifest);
    } catch (const nlohmann::json::exception &e) {
        throw IngestionError(std::string("unparsable checkpoint manifest: ") +
                             e.what());
    }
    if (header.at("layers") != model.manifest())
        throw IngestionError("checkpoint architecture does not match model");
    for (Tensor *p : model.parameters()) {
        in.read(reinterpret_cast<char *>(p->data.data()),
                static_cast<std::streamsize>(p->data.size() * sizeof(double)));
        if (!in) throw IngestionError("truncated checkpoint parameters: " + path);
    }
    char probe;
    if (in.read(&probe, 1))
        throw IngestionError("checkpoint has trailing bytes: " + path);
    return header.value("extra", nlohmann::json::object());
}

} // namespace qplr::neural
