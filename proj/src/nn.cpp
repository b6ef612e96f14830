#include "creadiff/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace creadiff::nn {

namespace {

// He-style fan-in scaling keeps activations O(1) through leaky-ReLU stacks.
void init_gaussian(std::vector<double>& w, std::size_t fan_in, Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : w) v = rng.normal(0.0, std);
}

}  // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(int in_features, int out_features, bool bias, Rng& init_rng, const std::string& name)
    : weight({out_features, in_features}),
      has_bias(bias),
      in_(in_features),
      out_(out_features),
      name_(name) {
    init_gaussian(weight.vec(), static_cast<std::size_t>(in_features), init_rng);
    grad_weight.assign(weight.size(), 0.0);
    if (has_bias) {
        bias_v.assign(static_cast<std::size_t>(out_features), 0.0);
        grad_bias.assign(static_cast<std::size_t>(out_features), 0.0);
    }
}

Tensor Dense::forward(const Tensor& x, bool training) {
    if (x.ndim() != 2 || x.dim(1) != in_) {
        throw ShapeError(name_ + ": expected (B, " + std::to_string(in_) + "), got " + x.shape_str());
    }
    if (training) cached_input_ = x;
    Tensor out = matmul_tb(x, weight);  // (B,in) * (out,in)^T
    if (has_bias) {
        for (int b = 0; b < out.dim(0); ++b)
            for (int j = 0; j < out_; ++j) out.at2(b, j) += bias_v[static_cast<std::size_t>(j)];
    }
    return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
    const Tensor& x = cached_input_;
    // dW = g^T * x
    for (int j = 0; j < out_; ++j) {
        for (int b = 0; b < x.dim(0); ++b) {
            const double g = grad_out.at2(b, j);
            if (g == 0.0) continue;
            double* gw = grad_weight.data() + static_cast<std::size_t>(j) * in_;
            const double* xv = x.data() + static_cast<std::size_t>(b) * in_;
            for (int i = 0; i < in_; ++i) gw[i] += g * xv[i];
            if (has_bias) grad_bias[static_cast<std::size_t>(j)] += g;
        }
    }
    return matmul(grad_out, weight);  // (B,out) * (out,in)
}

std::vector<ParamView> Dense::params() {
    std::vector<ParamView> p{{name_ + ".weight", &weight.vec(), &grad_weight}};
    if (has_bias) p.push_back({name_ + ".bias", &bias_v, &grad_bias});
    return p;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int cin, int cout, int kernel, int stride, int pad, bool bias, Rng& init_rng,
               const std::string& name)
    : has_bias(bias), cin_(cin), cout_(cout), kernel_(kernel), stride_(stride), pad_(pad), name_(name) {
    weight.assign(static_cast<std::size_t>(cout) * kernel * kernel * cin, 0.0);
    init_gaussian(weight, static_cast<std::size_t>(kernel) * kernel * cin, init_rng);
    grad_weight.assign(weight.size(), 0.0);
    if (has_bias) {
        bias_v.assign(static_cast<std::size_t>(cout), 0.0);
        grad_bias.assign(static_cast<std::size_t>(cout), 0.0);
    }
}

Tensor Conv2d::forward(const Tensor& x, bool training) {
    if (x.ndim() != 4 || x.dim(3) != cin_) {
        throw ShapeError(name_ + ": expected NHWC with C=" + std::to_string(cin_) + ", got " + x.shape_str());
    }
    if (training) cached_input_ = x;
    const int B = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int OH = out_size(H), OW = out_size(W);
    Tensor out({B, OH, OW, cout_});
    const std::size_t kslice = static_cast<std::size_t>(kernel_) * kernel_ * cin_;
    for (int n = 0; n < B; ++n) {
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                double* outp = &out.at(n, oy, ox, 0);
                for (int ky = 0; ky < kernel_; ++ky) {
                    const int iy = oy * stride_ - pad_ + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < kernel_; ++kx) {
                        const int ix = ox * stride_ - pad_ + kx;
                        if (ix < 0 || ix >= W) continue;
                        const double* inp = &x.at(n, iy, ix, 0);
                        const std::size_t woff = (static_cast<std::size_t>(ky) * kernel_ + kx) * cin_;
                        for (int co = 0; co < cout_; ++co) {
                            const double* wp = weight.data() + static_cast<std::size_t>(co) * kslice + woff;
                            double s = 0.0;
                            for (int ci = 0; ci < cin_; ++ci) s += inp[ci] * wp[ci];
                            outp[co] += s;
                        }
                    }
                }
                if (has_bias) {
                    for (int co = 0; co < cout_; ++co) outp[co] += bias_v[static_cast<std::size_t>(co)];
                }
            }
        }
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const Tensor& x = cached_input_;
    const int B = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int OH = grad_out.dim(1), OW = grad_out.dim(2);
    Tensor grad_in = Tensor::zeros_like(x);
    const std::size_t kslice = static_cast<std::size_t>(kernel_) * kernel_ * cin_;
    for (int n = 0; n < B; ++n) {
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                const double* gp = &grad_out.at(n, oy, ox, 0);
                for (int ky = 0; ky < kernel_; ++ky) {
                    const int iy = oy * stride_ - pad_ + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < kernel_; ++kx) {
                        const int ix = ox * stride_ - pad_ + kx;
                        if (ix < 0 || ix >= W) continue;
                        const double* inp = &x.at(n, iy, ix, 0);
                        double* gip = &grad_in.at(n, iy, ix, 0);
                        const std::size_t woff = (static_cast<std::size_t>(ky) * kernel_ + kx) * cin_;
                        for (int co = 0; co < cout_; ++co) {
                            const double g = gp[co];
                            if (g == 0.0) continue;
                            const double* wp = weight.data() + static_cast<std::size_t>(co) * kslice + woff;
                            double* gwp = grad_weight.data() + static_cast<std::size_t>(co) * kslice + woff;
                            for (int ci = 0; ci < cin_; ++ci) {
                                gip[ci] += g * wp[ci];
                                gwp[ci] += g * inp[ci];
                            }
                        }
                    }
                }
                if (has_bias) {
                    for (int co = 0; co < cout_; ++co) grad_bias[static_cast<std::size_t>(co)] += gp[co];
                }
            }
        }
    }
    return grad_in;
}

std::vector<ParamView> Conv2d::params() {
    std::vector<ParamView> p{{name_ + ".weight", &weight, &grad_weight}};
    if (has_bias) p.push_back({name_ + ".bias", &bias_v, &grad_bias});
    return p;
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int cin, int cout, int kernel, int stride, int pad, bool bias,
                                 Rng& init_rng, const std::string& name)
    : has_bias(bias), cin_(cin), cout_(cout), kernel_(kernel), stride_(stride), pad_(pad), name_(name) {
    weight.assign(static_cast<std::size_t>(cin) * kernel * kernel * cout, 0.0);
    init_gaussian(weight, static_cast<std::size_t>(cin), init_rng);
    grad_weight.assign(weight.size(), 0.0);
    if (has_bias) {
        bias_v.assign(static_cast<std::size_t>(cout), 0.0);
        grad_bias.assign(static_cast<std::size_t>(cout), 0.0);
    }
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool training) {
    if (x.ndim() != 4 || x.dim(3) != cin_) {
        throw ShapeError(name_ + ": expected NHWC with C=" + std::to_string(cin_) + ", got " + x.shape_str());
    }
    if (training) cached_input_ = x;
    const int B = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int OH = out_size(H), OW = out_size(W);
    Tensor out({B, OH, OW, cout_});
    if (has_bias) {
        for (int n = 0; n < B; ++n)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    double* outp = &out.at(n, oy, ox, 0);
                    for (int co = 0; co < cout_; ++co) outp[co] = bias_v[static_cast<std::size_t>(co)];
                }
    }
    for (int n = 0; n < B; ++n) {
        for (int iy = 0; iy < H; ++iy) {
            for (int ix = 0; ix < W; ++ix) {
                const double* inp = &x.at(n, iy, ix, 0);
                for (int ky = 0; ky < kernel_; ++ky) {
                    const int oy = iy * stride_ - pad_ + ky;
                    if (oy < 0 || oy >= OH) continue;
                    for (int kx = 0; kx < kernel_; ++kx) {
                        const int ox = ix * stride_ - pad_ + kx;
                        if (ox < 0 || ox >= OW) continue;
                        double* outp = &out.at(n, oy, ox, 0);
                        const std::size_t woff = (static_cast<std::size_t>(ky) * kernel_ + kx) * cout_;
                        for (int ci = 0; ci < cin_; ++ci) {
                            const double v = inp[ci];
                            if (v == 0.0) continue;
                            const double* wp = weight.data() +
                                (static_cast<std::size_t>(ci) * kernel_ * kernel_) * cout_ + woff;
                            for (int co = 0; co < cout_; ++co) outp[co] += v * wp[co];
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out) {
    const Tensor& x = cached_input_;
    const int B = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int OH = grad_out.dim(1), OW = grad_out.dim(2);
    Tensor grad_in = Tensor::zeros_like(x);
    for (int n = 0; n < B; ++n) {
        for (int iy = 0; iy < H; ++iy) {
            for (int ix = 0; ix < W; ++ix) {
                const double* inp = &x.at(n, iy, ix, 0);
                double* gip = &grad_in.at(n, iy, ix, 0);
                for (int ky = 0; ky < kernel_; ++ky) {
                    const int oy = iy * stride_ - pad_ + ky;
                    if (oy < 0 || oy >= OH) continue;
                    for (int kx = 0; kx < kernel_; ++kx) {
                        const int ox = ix * stride_ - pad_ + kx;
                        if (ox < 0 || ox >= OW) continue;
                        const double* gp = &grad_out.at(n, oy, ox, 0);
                        const std::size_t woff = (static_cast<std::size_t>(ky) * kernel_ + kx) * cout_;
                        for (int ci = 0; ci < cin_; ++ci) {
                            const double* wp = weight.data() +
                                (static_cast<std::size_t>(ci) * kernel_ * kernel_) * cout_ + woff;
                            double* gwp = grad_weight.data() +
                                (static_cast<std::size_t>(ci) * kernel_ * kernel_) * cout_ + woff;
                            double acc = 0.0;
                            const double v = inp[ci];
                            for (int co = 0; co < cout_; ++co) {
                                acc += gp[co] * wp[co];
                                gwp[co] += gp[co] * v;
                            }
                            gip[ci] += acc;
                        }
                    }
                }
            }
        }
    }
    if (has_bias) {
        for (int n = 0; n < B; ++n)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    const double* gp = &grad_out.at(n, oy, ox, 0);
                    for (int co = 0; co < cout_; ++co) grad_bias[static_cast<std::size_t>(co)] += gp[co];
                }
    }
    return grad_in;
}

std::vector<ParamView> ConvTranspose2d::params() {
    std::vector<ParamView> p{{name_ + ".weight", &weight, &grad_weight}};
    if (has_bias) p.push_back({name_ + ".bias", &bias_v, &grad_bias});
    return p;
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, const std::string& name, double eps, double momentum)
    : gamma(static_cast<std::size_t>(channels), 1.0),
      beta(static_cast<std::size_t>(channels), 0.0),
      grad_gamma(static_cast<std::size_t>(channels), 0.0),
      grad_beta(static_cast<std::size_t>(channels), 0.0),
      running_mean(static_cast<std::size_t>(channels), 0.0),
      running_var(static_cast<std::size_t>(channels), 1.0),
      channels_(channels),
      eps_(eps),
      momentum_(momentum),
      name_(name) {}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
    if (x.ndim() != 4 || x.dim(3) != channels_) {
        throw ShapeError(name_ + ": expected NHWC with C=" + std::to_string(channels_) + ", got " + x.shape_str());
    }
    const int B = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t m = static_cast<std::size_t>(B) * H * W;
    Tensor out = Tensor::zeros_like(x);
    trained_forward_ = training;
    if (training) {
        cached_input_ = x;
        cached_mean_.assign(static_cast<std::size_t>(channels_), 0.0);
        cached_istd_.assign(static_cast<std::size_t>(channels_), 0.0);
        std::vector<double> var(static_cast<std::size_t>(channels_), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) cached_mean_[i % channels_] += x[i];
        for (double& v : cached_mean_) v /= static_cast<double>(m);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - cached_mean_[i % channels_];
            var[i % channels_] += d * d;
        }
        for (double& v : var) v /= static_cast<double>(m);
        for (int c = 0; c < channels_; ++c) {
            cached_istd_[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps_);
            running_mean[static_cast<std::size_t>(c)] =
                (1.0 - momentum_) * running_mean[static_cast<std::size_t>(c)] + momentum_ * cached_mean_[static_cast<std::size_t>(c)];
            running_var[static_cast<std::size_t>(c)] =
                (1.0 - momentum_) * running_var[static_cast<std::size_t>(c)] + momentum_ * var[static_cast<std::size_t>(c)];
        }
        cached_xhat_ = Tensor::zeros_like(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const std::size_t c = i % channels_;
            cached_xhat_[i] = (x[i] - cached_mean_[c]) * cached_istd_[c];
            out[i] = gamma[c] * cached_xhat_[i] + beta[c];
        }
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const std::size_t c = i % channels_;
            out[i] = gamma[c] * (x[i] - running_mean[c]) / std::sqrt(running_var[c] + eps_) + beta[c];
        }
    }
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
    const int C = channels_;
    if (!trained_forward_) {
        // Eval-mode backward: a per-channel affine map.
        Tensor grad_in = Tensor::zeros_like(grad_out);
        for (std::size_t i = 0; i < grad_out.size(); ++i) {
            const std::size_t c = i % C;
            grad_in[i] = grad_out[i] * gamma[c] / std::sqrt(running_var[c] + eps_);
        }
        return grad_in;
    }
    const Tensor& x = cached_input_;
    const std::size_t m = x.size() / static_cast<std::size_t>(C);
    std::vector<double> sum_g(static_cast<std::size_t>(C), 0.0), sum_gx(static_cast<std::size_t>(C), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t c = i % C;
        sum_g[c] += grad_out[i];
        sum_gx[c] += grad_out[i] * cached_xhat_[i];
    }
    for (int c = 0; c < C; ++c) {
        grad_gamma[static_cast<std::size_t>(c)] += sum_gx[static_cast<std::size_t>(c)];
        grad_beta[static_cast<std::size_t>(c)] += sum_g[static_cast<std::size_t>(c)];
    }
    Tensor grad_in = Tensor::zeros_like(x);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t c = i % C;
        grad_in[i] = gamma[c] * cached_istd_[c] *
                     (grad_out[i] - inv_m * sum_g[c] - cached_xhat_[i] * inv_m * sum_gx[c]);
    }
    return grad_in;
}

std::vector<ParamView> BatchNorm2d::params() {
    return {{name_ + ".gamma", &gamma, &grad_gamma}, {name_ + ".beta", &beta, &grad_beta}};
}

std::vector<ParamView> BatchNorm2d::state() {
    return {{name_ + ".running_mean", &running_mean, nullptr},
            {name_ + ".running_var", &running_var, nullptr}};
}

// ------------------------------------------------------------ activations

Tensor LeakyReLU::forward(const Tensor& x, bool training) {
    if (training) cached_input_ = x;
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 0.0) out[i] *= slope_;
    }
    return out;
}

Tensor LeakyReLU::backward(const Tensor& grad_out) {
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
        if (cached_input_[i] < 0.0) grad_in[i] *= slope_;
    }
    return grad_in;
}

Tensor Tanh::forward(const Tensor& x, bool training) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    if (training) cached_output_ = out;
    return out;
}

Tensor Tanh::backward(const Tensor& grad_out) {
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
        grad_in[i] *= 1.0 - cached_output_[i] * cached_output_[i];
    }
    return grad_in;
}

Tensor Dropout::forward(const Tensor& x, bool training) {
    if (!training || p_ <= 0.0) {
        mask_.clear();
        return x;
    }
    Tensor out = x;
    mask_.assign(x.size(), 0.0);
    const double scale = 1.0 / (1.0 - p_);
    for (std::size_t i = 0; i < x.size(); ++i) {
        mask_[i] = rng_.uniform() < p_ ? 0.0 : scale;
        out[i] *= mask_[i];
    }
    return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
    if (mask_.empty()) return grad_out;
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] *= mask_[i];
    return grad_in;
}

Tensor Flatten::forward(const Tensor& x, bool training) {
    if (training) cached_shape_ = x.shape();
    const int B = x.dim(0);
    return x.reshaped({B, static_cast<int>(x.size()) / B});
}

Tensor Flatten::backward(const Tensor& grad_out) { return grad_out.reshaped(cached_shape_); }

// ------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, bool training) {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, training);
    return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<ParamView> Sequential::params() {
    std::vector<ParamView> all;
    for (auto& l : layers_) {
        auto p = l->params();
        all.insert(all.end(), p.begin(), p.end());
    }
    return all;
}

std::vector<ParamView> Sequential::state() {
    std::vector<ParamView> all;
    for (auto& l : layers_) {
        auto s = l->state();
        all.insert(all.end(), s.begin(), s.end());
    }
    return all;
}

// ------------------------------------------------------------------- Adam

Adam::Adam(std::vector<ParamView> params, Options opts) : params_(std::move(params)), opts_(opts) {
    for (const auto& p : params_) {
        m_.emplace_back(p.value->size(), 0.0);
        v_.emplace_back(p.value->size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& value = *params_[pi].value;
        auto& grad = *params_[pi].grad;
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < value.size(); ++i) {
            double g = grad[i];
            if (opts_.weight_decay != 0.0 && !opts_.decoupled_weight_decay) g += opts_.weight_decay * value[i];
            m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g;
            v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            if (opts_.weight_decay != 0.0 && opts_.decoupled_weight_decay) {
                value[i] -= opts_.lr * opts_.weight_decay * value[i];
            }
            value[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (const auto& p : params_) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

double total_param_count(const std::vector<ParamView>& params) {
    double n = 0.0;
    for (const auto& p : params) n += static_cast<double>(p.value->size());
    return n;
}

double grad_norm(const std::vector<ParamView>& params) {
    double s = 0.0;
    for (const auto& p : params)
        for (double g : *p.grad) s += g * g;
    return std::sqrt(s);
}

void zero_grads(const std::vector<ParamView>& params) {
    for (const auto& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

std::uint64_t param_checksum(const std::vector<ParamView>& params) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : params) {
        for (double d : *p.value) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, sizeof(bits));
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xffu;
                h *= 1099511628211ull;
            }
        }
    }
    return h;
}

}  // namespace creadiff::nn
