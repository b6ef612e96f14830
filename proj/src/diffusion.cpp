#include "creadiff/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace creadiff {

NoiseSchedule NoiseSchedule::linear(double beta_start, double beta_end, int T) {
    if (T < 1) throw ScheduleError("schedule needs T >= 1, got " + std::to_string(T));
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        betas[static_cast<std::size_t>(t)] =
            T == 1 ? beta_start : beta_start + (beta_end - beta_start) * t / static_cast<double>(T - 1);
    }
    return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
    if (betas.empty()) throw ScheduleError("empty beta sequence");
    NoiseSchedule s;
    s.beta_ = std::move(betas);
    s.alpha_.resize(s.beta_.size());
    s.alpha_bar_.resize(s.beta_.size());
    s.sigma_sq_.resize(s.beta_.size());
    double abar = 1.0;
    for (std::size_t i = 0; i < s.beta_.size(); ++i) {
        const double b = s.beta_[i];
        if (!(b > 0.0 && b < 1.0)) {
            throw ScheduleError("beta_" + std::to_string(i + 1) + " = " + std::to_string(b) +
                                " outside (0, 1)");
        }
        const double abar_prev = abar;
        s.alpha_[i] = 1.0 - b;
        abar *= s.alpha_[i];
        s.alpha_bar_[i] = abar;
        s.sigma_sq_[i] = (1.0 - abar_prev) / (1.0 - abar) * b;
    }
    return s;
}

std::size_t NoiseSchedule::check(int t) const {
    if (t < 1 || t > T()) {
        throw RangeError("step t = " + std::to_string(t) + " outside [1, " + std::to_string(T()) + "]");
    }
    return static_cast<std::size_t>(t - 1);
}

double NoiseSchedule::sigma(int t) const { return std::sqrt(sigma_sq(t)); }

Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& noise, const NoiseSchedule& schedule) {
    require_same_shape(x0, noise, "forward_diffuse");
    if (t < 1 || t > schedule.T()) {
        throw RangeError("step t = " + std::to_string(t) + " outside [1, " + std::to_string(schedule.T()) + "]");
    }
    const double abar = schedule.alpha_bar(t);
    const double a = std::sqrt(abar);
    const double b = std::sqrt(1.0 - abar);
    Tensor out = Tensor::zeros_like(x0);
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * noise[i];
    return out;
}

DenoisingLossResult denoising_loss(NoisePredictor& predictor, const Tensor& x0, const Context& c,
                                   const NoiseSchedule& schedule, Rng& rng, bool with_grad) {
    const int t = static_cast<int>(rng.uniform_int(1, schedule.T()));
    Tensor eps = Tensor::zeros_like(x0);
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
    const Tensor x_t = forward_diffuse(x0, t, eps, schedule);
    const Tensor pred = with_grad ? predictor.forward_train(x_t, t, c) : predictor.predict(x_t, t, c);
    require_same_shape(pred, eps, "denoising_loss");
    if (!pred.all_finite()) {
        throw NumericError("non-finite predictor output at t = " + std::to_string(t));
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double d = pred[i] - eps[i];
        loss += d * d;
    }
    loss /= static_cast<double>(eps.size());
    if (with_grad) {
        Tensor grad = Tensor::zeros_like(eps);
        const double scale = 2.0 / static_cast<double>(eps.size());
        for (std::size_t i = 0; i < eps.size(); ++i) grad[i] = scale * (pred[i] - eps[i]);
        predictor.backward(grad);
    }
    return {loss, t};
}

ReverseStepResult reverse_step(const Tensor& x_t, int t, NoisePredictor& predictor, const Context& c,
                               const NoiseSchedule& schedule, const Tensor& z) {
    require_same_shape(x_t, z, "reverse_step");
    const double alpha = schedule.alpha(t);  // validates t, so t = 0 raises RangeError
    const double abar = schedule.alpha_bar(t);
    const double sigma = schedule.sigma(t);
    if (!std::isfinite(sigma)) throw ScheduleError("sigma undefined at t = " + std::to_string(t));
    const Tensor eps = predictor.predict(x_t, t, c);
    require_same_shape(eps, x_t, "reverse_step predictor output");
    if (!eps.all_finite()) throw NumericError("non-finite predictor output at t = " + std::to_string(t));
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    const double eps_coef = (1.0 - alpha) / std::sqrt(1.0 - abar);
    ReverseStepResult r{Tensor::zeros_like(x_t), Tensor::zeros_like(x_t), sigma};
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        r.mean[i] = inv_sqrt_alpha * (x_t[i] - eps_coef * eps[i]);
        r.x_prev[i] = r.mean[i] + sigma * z[i];
    }
    return r;
}

double gaussian_log_prob(const Tensor& x, const Tensor& mean, double stddev) {
    require_same_shape(x, mean, "gaussian_log_prob");
    if (!(stddev > 0.0)) throw DomainError("gaussian_log_prob needs stddev > 0, got " + std::to_string(stddev));
    constexpr double ln_2pi = 1.8378770664093454835606594728112;
    const double var = stddev * stddev;
    double lp = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - mean[i];
        lp += -0.5 * (ln_2pi + std::log(var)) - d * d / (2.0 * var);
    }
    return lp;
}

SampleResult sample(NoisePredictor& predictor, const Context& c, const NoiseSchedule& schedule,
                    const std::vector<int>& image_shape, Rng& rng, bool record_trajectory) {
    Tensor x(image_shape);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();

    SampleResult result;
    if (record_trajectory) {
        result.trajectory = DenoisingTrajectory{};
        result.trajectory->context = c;
        result.trajectory->steps.reserve(static_cast<std::size_t>(schedule.T()));
    }
    for (int t = schedule.T(); t >= 1; --t) {
        const double sigma = schedule.sigma(t);
        Tensor z = Tensor::zeros_like(x);
        if (sigma > 0.0) {
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
        }
        ReverseStepResult step = reverse_step(x, t, predictor, c, schedule, z);
        if (!step.x_prev.all_finite()) {
            throw NumericError("non-finite sample state leaving t = " + std::to_string(t));
        }
        if (record_trajectory) {
            TrajectoryStep rec;
            rec.t = t;
            rec.state_x = x;
            rec.action = step.x_prev;
            rec.stochastic = sigma > 0.0;
            rec.log_prob = rec.stochastic ? gaussian_log_prob(step.x_prev, step.mean, sigma) : 0.0;
            result.trajectory->steps.push_back(std::move(rec));
        }
        x = std::move(step.x_prev);
    }
    Tensor clamped = x;
    for (std::size_t i = 0; i < clamped.size(); ++i) clamped[i] = std::clamp(clamped[i], -1.0, 1.0);
    result.x0 = clamped;
    if (record_trajectory) result.trajectory->final_image = clamped;
    return result;
}

}  // namespace creadiff
