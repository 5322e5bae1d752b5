#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qplr/rng.hpp"

namespace qplr::neural {

/// Row-major dense tensor. grad is empty until a backward pass (or
/// ensure_grad) materializes it; when present it has the same length as
/// data.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;

    Tensor() = default;
    static Tensor zeros(std::vector<int> shape);
    static Tensor from(std::vector<int> shape, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    int dim(int i) const { return shape.at(i); }
    void ensure_grad();
    void zero_grad();
};

/// Sequential layer: forward caches whatever backward needs, backward
/// returns the input gradient and accumulates parameter gradients.
class Layer {
  public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor &x, bool training) = 0;
    virtual Tensor backward(const Tensor &dy) = 0;
    virtual std::vector<Tensor *> params() { return {}; }
    virtual nlohmann::json manifest() const = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;
    virtual void reseed(std::uint64_t) {}
};

class Dense : public Layer {
  public:
    Dense(int in_features, int out_features, rng::Stream &init);
    Tensor forward(const Tensor &x, bool training) override;
    Tensor backward(const Tensor &dy) override;
    std::vector<Tensor *> params() override { return {&weight, &bias}; }
    nlohmann::json manifest() const override;
    std::unique_ptr<Layer> clone() const override;

    Tensor weight; // [out, in]
    Tensor bias;   // [out]

  private:
    int in_ = 0, out_ = 0;
    Tensor cached_input_;
};

class ReLU : public Layer {
  public:
    Tensor forward(const Tensor &x, bool training) override;
    Tensor backward(const Tensor &dy) override;
    nlohmann::json manifest() const override;
    std::unique_ptr<Layer> clone() const override;

  private:
    std::vector<bool> mask_;
};

/// Valid convolution, stride 1, square kernels.
class Conv2d : public Layer {
  public:
    Conv2d(int in_channels, int out_channels, int kernel, rng::Stream &init);
    Tensor forward(const Tensor &x, bool training) override;
    Tensor backward(const Tensor &dy) override;
    std::vector<Tensor *> params() override { return {&weight, &bias}; }
    nlohmann::json manifest() const override;
    std::unique_ptr<Layer> clone() const override;

    Tensor weight; // [out, in, k, k]
    Tensor bias;   // [out]

  private:
    int in_ = 0, out_ = 0, kernel_ = 0;
    Tensor cached_input_;
};

/// 2x2 max pooling, stride 2; input height/width must be even.
class MaxPool2 : public Layer {
  public:
    Tensor forward(const Tensor &x, bool training) override;
    Tensor backward(const Tensor &dy) override;
    nlohmann::json manifest() const override;
    std::unique_ptr<Layer> clone() const override;

  private:
    std::vector<int> input_shape_;
    std::vector<std::size_t> argmax_;
};

class Flatten : public Layer {
  public:
    Tensor forward(const Tensor &x, bool training) override;
    Tensor backward(const Tensor &dy) override;
    nlohmann::json manifest() const override;
    std::unique_ptr<Layer> clone() const override;

  private:
    std::vector<int> input_shape_;
};

/// Inverted dropout: zeroes units with probability rate during training (or
/// MC sampling) and scales survivors by 1/(1-rate); identity otherwise.
class Dropout : public Layer {
  public:
    explicit Dropout(double rate, std::uint64_t seed = 0);
    Tensor forward(const Tensor &x, bool training) override;
    Tensor backward(const Tensor &dy) override;
    nlohmann::json manifest() const override;
    std::unique_ptr<Layer> clone() const override;
    void reseed(std::uint64_t seed) override;

  private:
    double rate_ = 0.0;
    rng::Stream stream_;
    std::vector<double> mask_;
};

/// y = pi * sigmoid(x): squashes pre-network outputs into (0, pi) so they
/// are valid encoding angles.
class PiSigmoid : public Layer {
  public:
    Tensor forward(const Tensor &x, bool training) override;
    Tensor backward(const Tensor &dy) override;
    nlohmann::json manifest() const override;
    std::unique_ptr<Layer> clone() const override;

  private:
    Tensor cached_output_;
};

class Model {
  public:
    Model() = default;
    Model(const Model &other);
    Model &operator=(const Model &other);
    Model(Model &&) = default;
    Model &operator=(Model &&) = default;

    template <typename L, typename... Args> void add(Args &&...args) {
        layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    }

    Tensor forward(const Tensor &x, bool training = false);
    /// Propagates dy through all layers; parameter gradients accumulate.
    /// Returns the gradient with respect to the model input (the hybrid
    /// pipeline chains it into the quantum stage).
    Tensor backward(const Tensor &dy);
    std::vector<Tensor *> parameters();
    std::size_t num_params();
    void zero_grad();
    nlohmann::json manifest() const;
    /// Derives an independent stream per stochastic layer.
    void reseed_stochastic(std::uint64_t seed);
    std::vector<std::unique_ptr<Layer>> &layers() { return layers_; }

  private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// LeNet student: conv(1->6,5) pool conv(6->16,5) pool fc 256->120->84->K.
/// dropout_rate > 0 inserts dropout after fc1 and fc2 (the Bayesian
/// student's MC-dropout sites).
Model make_lenet(std::uint64_t init_seed, double dropout_rate = 0.0,
                 int num_classes = 10);

/// Fully connected stack with ReLU between layers; optionally a PiSigmoid
/// on the output (pre-network) instead of a bare linear head.
Model make_mlp(const std::vector<int> &dims, std::uint64_t init_seed,
               bool pi_sigmoid_output = false);

// ---- losses ----

std::vector<double> softmax(std::span<const double> logits);

/// Mean soft-target cross-entropy over the batch plus its logit gradient,
/// dlogits = (softmax - target) / N.
struct LossGrad {
    double loss = 0.0;
    Tensor dlogits;
};
LossGrad softmax_cross_entropy(const Tensor &logits, const Tensor &targets);

/// -sum target_k log(pred_k) on probability vectors, with a 1e-12 floor
/// inside the log. target must sum to 1 within 1e-6.
double soft_cross_entropy(std::span<const double> pred,
                          std::span<const double> target);

std::vector<double> smooth_labels(int klass, int num_classes, double eps);

Tensor one_hot_batch(std::span<const int> labels, int num_classes);

/// Lowest index wins ties.
int argmax(std::span<const double> values);

// ---- optimizer ----

class Adam {
  public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);
    void step(const std::vector<Tensor *> &params);
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

  private:
    double lr_, beta1_, beta2_, eps_;
    long step_count_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Standalone dropout application with a one-shot seed (MC sampling).
Tensor dropout_forward(const Tensor &x, double rate, bool training,
                       std::uint64_t seed);

// ---- checkpoints ----

/// Binary format: magic "QPLRNN1", u32 little-endian manifest byte count,
/// manifest JSON, then each parameter tensor as little-endian doubles in
/// Model::parameters() order.
void save_checkpoint(Model &model, const std::string &path,
                     const nlohmann::json &extra = nlohmann::json::object());
/// Loads parameters into an architecturally identical model; returns the
/// extra metadata stored alongside the manifest.
nlohmann::json load_checkpoint(Model &model, const std::string &path);

} // namespace qplr::neural
