#pragma once

#include <memory>
#include <vector>

#include "creadiff/diffusion.hpp"
#include "creadiff/nn.hpp"

namespace creadiff {

// Sinusoidal step features shared by the desk-scale predictors.
std::vector<double> time_features(int t, int n_features = 8);

// Small fully-connected eps-predictor: [flatten(x_t), time features, context]
// -> hidden MLP -> image shape. Good enough to learn low-dimensional toy
// distributions end to end.
class MlpNoisePredictor : public NoisePredictor {
public:
    MlpNoisePredictor(std::vector<int> image_shape, int hidden, int context_dim, std::uint64_t seed);

    Tensor predict(const Tensor& x_t, int t, const Context& c) override;
    Tensor forward_train(const Tensor& x_t, int t, const Context& c) override;
    void backward(const Tensor& grad_eps) override;
    std::vector<nn::ParamView> trainable_params() override { return net_.params(); }

private:
    Tensor run(const Tensor& x_t, int t, const Context& c, bool training);
    Tensor make_input(const Tensor& x_t, int t, const Context& c) const;

    std::vector<int> image_shape_;
    int context_dim_;
    int input_dim_;
    nn::Sequential net_;
};

// Dense map with a frozen base and trainable low-rank factors:
// y = W x + b + (alpha / r) * B (A x). B starts at zero so a fresh adapter
// leaves the base map unchanged.
class LoraDense {
public:
    LoraDense(int in_features, int out_features, int rank, double alpha, Rng& init_rng,
              const std::string& name);

    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& grad_out);  // accumulates base + adapter grads

    std::vector<nn::ParamView> base_params();
    std::vector<nn::ParamView> adapter_params();

    Tensor weight;  // (out, in)
    std::vector<double> bias, grad_weight, grad_bias;
    Tensor lora_a;  // (rank, in)
    Tensor lora_b;  // (out, rank)
    std::vector<double> grad_lora_a, grad_lora_b;

private:
    int in_, out_, rank_;
    double scale_;
    std::string name_;
    Tensor cached_input_, cached_ax_;
};

// Trainable low-rank factor pairs attached to the predictor's cross-attention
// maps, plus the freeze contract handle.
struct AdapterSet {
    int rank = 4;
    double alpha = 4.0;
    std::vector<nn::ParamView> factors;
    std::uint64_t base_checksum = 0;
};

// Desk-scale conditional eps-predictor with one cross-attention block: pixel
// tokens attend over [prompt token, learned register token]. LoRA factors sit
// on the q/k/v/out projections; everything else is base.
class CrossAttentionNoisePredictor : public NoisePredictor {
public:
    CrossAttentionNoisePredictor(std::vector<int> image_shape, int context_dim, int d_model,
                                 int lora_rank, double lora_alpha, std::uint64_t seed);

    Tensor predict(const Tensor& x_t, int t, const Context& c) override;
    Tensor forward_train(const Tensor& x_t, int t, const Context& c) override;
    void backward(const Tensor& grad_eps) override;

    // Adapter mode (default): only LoRA factors. Base mode: everything, for
    // desk-scale pretraining before fine-tuning.
    void set_train_adapters_only(bool adapters_only) { adapters_only_ = adapters_only; }
    std::vector<nn::ParamView> trainable_params() override;
    std::vector<nn::ParamView> base_params();
    AdapterSet adapters();

    int context_dim() const { return context_dim_; }
    const std::vector<int>& image_shape() const { return image_shape_; }

private:
    Tensor run(const Tensor& x_t, int t, const Context& c, bool training);
    Tensor tokens_from_image(const Tensor& x_t) const;
    Tensor context_tokens(const Context& c) const;

    std::vector<int> image_shape_;
    int context_dim_, d_model_, n_tokens_, channels_;
    int lora_rank_;
    double lora_alpha_;
    bool adapters_only_ = true;

    std::unique_ptr<nn::Dense> in_proj_, time_proj_, ctx_proj_, mlp1_, out_proj_;
    std::unique_ptr<LoraDense> wq_, wk_, wv_, wo_;
    std::vector<double> null_token_, register_token_;
    std::vector<double> grad_null_token_, grad_register_token_;

    // Forward caches for the hand-written attention backward.
    struct Cache {
        Tensor tokens_in, ctx_in;
        Tensor h, q, k, v, attn_probs, attn_out, h2, m1, h3;
        Context context;
        bool valid = false;
    } cache_;
};

}  // namespace creadiff
