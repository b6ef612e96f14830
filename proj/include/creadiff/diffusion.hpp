#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "creadiff/nn.hpp"
#include "creadiff/rng.hpp"
#include "creadiff/tensor.hpp"

namespace creadiff {

// Beta schedule with its derived products. Steps are 1-based: t in [1, T].
// alpha_bar(0) == 1 by definition, which makes sigma(1) == 0 and the final
// denoising step deterministic.
class NoiseSchedule {
public:
    static NoiseSchedule linear(double beta_start, double beta_end, int T);
    static NoiseSchedule from_betas(std::vector<double> betas);

    int T() const { return static_cast<int>(beta_.size()); }
    double beta(int t) const { return beta_[check(t)]; }
    double alpha(int t) const { return alpha_[check(t)]; }
    double alpha_bar(int t) const {
        if (t == 0) return 1.0;
        return alpha_bar_[check(t)];
    }
    // sigma_t^2 = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t
    double sigma_sq(int t) const { return sigma_sq_[check(t)]; }
    double sigma(int t) const;

    const std::vector<double>& betas() const { return beta_; }

private:
    NoiseSchedule() = default;
    std::size_t check(int t) const;
    std::vector<double> beta_, alpha_, alpha_bar_, sigma_sq_;
};

// Conditioning context: an embedded prompt, or the null token.
struct Context {
    std::vector<double> embedding;
    bool is_null = true;

    static Context null() { return Context{}; }
    static Context from_embedding(std::vector<double> e) { return Context{std::move(e), false}; }
};

// eps_theta(x_t, t, c). predict() must be deterministic given (parameters,
// inputs). Trainable predictors additionally support forward_train/backward.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual Tensor predict(const Tensor& x_t, int t, const Context& c) = 0;

    virtual Tensor forward_train(const Tensor& x_t, int t, const Context& c) {
        return predict(x_t, t, c);
    }
    virtual void backward(const Tensor& /*grad_eps*/) {
        throw DomainError("this noise predictor is not trainable");
    }
    virtual std::vector<nn::ParamView> trainable_params() { return {}; }
};

// Pixel <-> latent boundary. Identity at desk scale; a pretrained codec is a
// plugin behind this interface.
class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual Tensor encode(const Tensor& image) const = 0;
    virtual Tensor decode(const Tensor& latent) const = 0;
    virtual double reconstruction_tolerance() const = 0;
};

class IdentityCodec : public LatentCodec {
public:
    Tensor encode(const Tensor& image) const override { return image; }
    Tensor decode(const Tensor& latent) const override { return latent; }
    double reconstruction_tolerance() const override { return 0.0; }
};

// Closed-form forward marginal: sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& noise, const NoiseSchedule& schedule);

struct DenoisingLossResult {
    double loss;
    int t;
};

// Samples t ~ U[1,T] and eps ~ N(0,I); returns mean squared error between eps
// and eps_theta(forward_diffuse(x0,t,eps), t, c). When with_grad is set the
// gradient of the loss is pushed through predictor.backward().
DenoisingLossResult denoising_loss(NoisePredictor& predictor, const Tensor& x0, const Context& c,
                                   const NoiseSchedule& schedule, Rng& rng, bool with_grad = false);

struct ReverseStepResult {
    Tensor x_prev;
    Tensor mean;
    double stddev;
};

// x_{t-1} = 1/sqrt(alpha_t) (x_t - (1-alpha_t)/sqrt(1-abar_t) eps_theta) + sigma_t z.
// mean and stddev are exposed so the policy log-probability is computable.
ReverseStepResult reverse_step(const Tensor& x_t, int t, NoisePredictor& predictor, const Context& c,
                               const NoiseSchedule& schedule, const Tensor& z);

// Sum over elements of log N(x_i; mean_i, stddev^2).
double gaussian_log_prob(const Tensor& x, const Tensor& mean, double stddev);

// One recorded reverse-diffusion step. stochastic=false marks sigma_t == 0
// steps, which carry no density and are excluded from policy objectives.
struct TrajectoryStep {
    int t;
    Tensor state_x;   // x_t
    Tensor action;    // x_{t-1}
    double log_prob;  // log pi(action | state) under N(mean, sigma_t^2 I); 0 when !stochastic
    bool stochastic;
};

struct DenoisingTrajectory {
    std::vector<TrajectoryStep> steps;
    Context context;
    Tensor final_image;  // clamped to [-1, 1]
};

struct SampleResult {
    Tensor x0;  // clamped to [-1, 1]
    std::optional<DenoisingTrajectory> trajectory;
};

// Ancestral sampler: x_T ~ N(0, I), then reverse_step for t = T..1. The final
// image is clamped into the pixel range; recorded actions stay raw so stored
// log-probs replay exactly.
SampleResult sample(NoisePredictor& predictor, const Context& c, const NoiseSchedule& schedule,
                    const std::vector<int>& image_shape, Rng& rng, bool record_trajectory);

}  // namespace creadiff
