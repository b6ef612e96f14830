#pragma once

#include <memory>
#include <string>
#include <vector>

#include "creadiff/rng.hpp"
#include "creadiff/tensor.hpp"

namespace creadiff::nn {

// Named view of one parameter blob and its gradient accumulator.
struct ParamView {
    std::string name;
    std::vector<double>* value;
    std::vector<double>* grad;
};

// Single-path layer: forward caches whatever backward needs, backward returns
// the gradient w.r.t. the layer input and accumulates parameter gradients.
// Layers are single-writer during training; frozen forward passes are safe to
// share across threads only when training=false and the layer has no dropout.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<ParamView> params() { return {}; }
    // Non-trainable state (e.g. normalization running stats); grad is null.
    virtual std::vector<ParamView> state() { return {}; }
};

class Dense : public Layer {
public:
    Dense(int in_features, int out_features, bool bias, Rng& init_rng, const std::string& name);
    Tensor forward(const Tensor& x, bool training) override;  // x: (B, in)
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamView> params() override;

    int in_features() const { return in_; }
    int out_features() const { return out_; }

    Tensor weight;  // (out, in)
    std::vector<double> bias_v, grad_weight, grad_bias;
    bool has_bias;

private:
    int in_, out_;
    std::string name_;
    Tensor cached_input_;
};

class Conv2d : public Layer {
public:
    // NHWC input; weight layout (cout, k, k, cin).
    Conv2d(int cin, int cout, int kernel, int stride, int pad, bool bias, Rng& init_rng,
           const std::string& name);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamView> params() override;

    int out_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }

    std::vector<double> weight, bias_v, grad_weight, grad_bias;
    bool has_bias;

private:
    int cin_, cout_, kernel_, stride_, pad_;
    std::string name_;
    Tensor cached_input_;
};

class ConvTranspose2d : public Layer {
public:
    // NHWC input; weight layout (cin, k, k, cout). Output spatial size is
    // (in - 1) * stride - 2 * pad + kernel.
    ConvTranspose2d(int cin, int cout, int kernel, int stride, int pad, bool bias, Rng& init_rng,
                    const std::string& name);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamView> params() override;

    int out_size(int in) const { return (in - 1) * stride_ - 2 * pad_ + kernel_; }

    std::vector<double> weight, bias_v, grad_weight, grad_bias;
    bool has_bias;

private:
    int cin_, cout_, kernel_, stride_, pad_;
    std::string name_;
    Tensor cached_input_;
};

class BatchNorm2d : public Layer {
public:
    BatchNorm2d(int channels, const std::string& name, double eps = 1e-5, double momentum = 0.1);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamView> params() override;
    std::vector<ParamView> state() override;

    std::vector<double> gamma, beta, grad_gamma, grad_beta;
    std::vector<double> running_mean, running_var;

private:
    int channels_;
    double eps_, momentum_;
    std::string name_;
    bool trained_forward_ = false;
    Tensor cached_input_, cached_xhat_;
    std::vector<double> cached_mean_, cached_istd_;
};

class LeakyReLU : public Layer {
public:
    explicit LeakyReLU(double negative_slope = 0.2) : slope_(negative_slope) {}
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    double slope_;
    Tensor cached_input_;
};

class Tanh : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor cached_output_;
};

class Dropout : public Layer {
public:
    Dropout(double p, std::uint64_t seed) : p_(p), rng_(seed) {}
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    double p_;
    Rng rng_;
    std::vector<double> mask_;
};

class Flatten : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<int> cached_shape_;
};

class Sequential : public Layer {
public:
    Sequential() = default;
    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamView> params() override;
    std::vector<ParamView> state() override;
    std::size_t num_layers() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Adam / AdamW over a fixed parameter list. decoupled_weight_decay=true gives
// AdamW; false folds decay into the gradient (classic L2, disabled at decay 0).
class Adam {
public:
    struct Options {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.0;
        bool decoupled_weight_decay = false;
    };

    Adam(std::vector<ParamView> params, Options opts);
    void step();
    void zero_grad();
    const Options& options() const { return opts_; }
    void set_lr(double lr) { opts_.lr = lr; }

    // Serialization hooks for checkpointing.
    std::vector<ParamView> params() const { return params_; }
    std::vector<std::vector<double>>& moment1() { return m_; }
    std::vector<std::vector<double>>& moment2() { return v_; }
    std::int64_t& step_count() { return t_; }

private:
    std::vector<ParamView> params_;
    Options opts_;
    std::vector<std::vector<double>> m_, v_;
    std::int64_t t_ = 0;
};

double total_param_count(const std::vector<ParamView>& params);
double grad_norm(const std::vector<ParamView>& params);
void zero_grads(const std::vector<ParamView>& params);

// FNV-1a over the raw bytes of every parameter value, for freeze contracts.
std::uint64_t param_checksum(const std::vector<ParamView>& params);

}  // namespace creadiff::nn
