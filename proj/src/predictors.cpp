#include "creadiff/predictors.hpp"

#include <cmath>

namespace creadiff {

std::vector<double> time_features(int t, int n_features) {
    std::vector<double> f(static_cast<std::size_t>(n_features));
    for (int i = 0; i < n_features / 2; ++i) {
        const double freq = std::pow(10.0, -2.0 * i / std::max(1, n_features / 2));
        f[static_cast<std::size_t>(2 * i)] = std::sin(freq * t);
        f[static_cast<std::size_t>(2 * i + 1)] = std::cos(freq * t);
    }
    return f;
}

// ------------------------------------------------------ MlpNoisePredictor

MlpNoisePredictor::MlpNoisePredictor(std::vector<int> image_shape, int hidden, int context_dim,
                                     std::uint64_t seed)
    : image_shape_(std::move(image_shape)), context_dim_(context_dim) {
    Rng rng(seed);
    int numel = 1;
    for (int d : image_shape_) numel *= d;
    input_dim_ = numel + 8 + context_dim_;
    net_.add(std::make_unique<nn::Dense>(input_dim_, hidden, true, rng, "mlp.fc1"));
    net_.add(std::make_unique<nn::LeakyReLU>(0.2));
    net_.add(std::make_unique<nn::Dense>(hidden, hidden, true, rng, "mlp.fc2"));
    net_.add(std::make_unique<nn::LeakyReLU>(0.2));
    net_.add(std::make_unique<nn::Dense>(hidden, numel, true, rng, "mlp.fc3"));
}

Tensor MlpNoisePredictor::make_input(const Tensor& x_t, int t, const Context& c) const {
    Tensor in({1, input_dim_});
    std::size_t off = 0;
    for (std::size_t i = 0; i < x_t.size(); ++i) in[off++] = x_t[i];
    for (double f : time_features(t)) in[off++] = f;
    if (!c.is_null) {
        if (static_cast<int>(c.embedding.size()) != context_dim_) {
            throw ShapeError("context embedding has dim " + std::to_string(c.embedding.size()) +
                             ", predictor expects " + std::to_string(context_dim_));
        }
        for (double v : c.embedding) in[off++] = v;
    }
    return in;
}

Tensor MlpNoisePredictor::run(const Tensor& x_t, int t, const Context& c, bool training) {
    if (x_t.shape() != image_shape_) {
        throw ShapeError("predictor expects " + Tensor(image_shape_).shape_str() + ", got " +
                         x_t.shape_str());
    }
    Tensor out = net_.forward(make_input(x_t, t, c), training);
    return out.reshaped(image_shape_);
}

Tensor MlpNoisePredictor::predict(const Tensor& x_t, int t, const Context& c) {
    return run(x_t, t, c, false);
}

Tensor MlpNoisePredictor::forward_train(const Tensor& x_t, int t, const Context& c) {
    return run(x_t, t, c, true);
}

void MlpNoisePredictor::backward(const Tensor& grad_eps) {
    int numel = 1;
    for (int d : image_shape_) numel *= d;
    net_.backward(grad_eps.reshaped({1, numel}));
}

// --------------------------------------------------------------- LoraDense

LoraDense::LoraDense(int in_features, int out_features, int rank, double alpha, Rng& init_rng,
                     const std::string& name)
    : weight({out_features, in_features}),
      lora_a({rank, in_features}),
      lora_b({out_features, rank}),
      in_(in_features),
      out_(out_features),
      rank_(rank),
      scale_(alpha / static_cast<double>(rank)),
      name_(name) {
    const double std_w = std::sqrt(2.0 / static_cast<double>(in_features));
    for (auto& v : weight.vec()) v = init_rng.normal(0.0, std_w);
    bias.assign(static_cast<std::size_t>(out_features), 0.0);
    const double std_a = 1.0 / std::sqrt(static_cast<double>(in_features));
    for (auto& v : lora_a.vec()) v = init_rng.normal(0.0, std_a);
    lora_b.fill(0.0);
    grad_weight.assign(weight.size(), 0.0);
    grad_bias.assign(bias.size(), 0.0);
    grad_lora_a.assign(lora_a.size(), 0.0);
    grad_lora_b.assign(lora_b.size(), 0.0);
}

Tensor LoraDense::forward(const Tensor& x, bool training) {
    if (x.ndim() != 2 || x.dim(1) != in_) {
        throw ShapeError(name_ + ": expected (B, " + std::to_string(in_) + "), got " + x.shape_str());
    }
    if (training) cached_input_ = x;
    Tensor out = matmul_tb(x, weight);
    Tensor ax = matmul_tb(x, lora_a);  // (B, rank)
    if (training) cached_ax_ = ax;
    Tensor bax = matmul_tb(ax, lora_b);  // (B, out)
    for (int b = 0; b < out.dim(0); ++b) {
        for (int j = 0; j < out_; ++j) {
            out.at2(b, j) += scale_ * bax.at2(b, j) + bias[static_cast<std::size_t>(j)];
        }
    }
    return out;
}

Tensor LoraDense::backward(const Tensor& grad_out) {
    const Tensor& x = cached_input_;
    const int B = x.dim(0);
    // Base path.
    for (int j = 0; j < out_; ++j) {
        for (int b = 0; b < B; ++b) {
            const double g = grad_out.at2(b, j);
            if (g == 0.0) continue;
            grad_bias[static_cast<std::size_t>(j)] += g;
            double* gw = grad_weight.data() + static_cast<std::size_t>(j) * in_;
            const double* xv = x.data() + static_cast<std::size_t>(b) * in_;
            for (int i = 0; i < in_; ++i) gw[i] += g * xv[i];
        }
    }
    // Adapter path: y_l = scale * B (A x).
    for (int b = 0; b < B; ++b) {
        for (int r = 0; r < rank_; ++r) {
            double g_ax = 0.0;
            for (int j = 0; j < out_; ++j) {
                const double g = grad_out.at2(b, j);
                grad_lora_b[static_cast<std::size_t>(j) * rank_ + r] += scale_ * g * cached_ax_.at2(b, r);
                g_ax += scale_ * g * lora_b.at2(j, r);
            }
            double* ga = grad_lora_a.data() + static_cast<std::size_t>(r) * in_;
            const double* xv = x.data() + static_cast<std::size_t>(b) * in_;
            for (int i = 0; i < in_; ++i) ga[i] += g_ax * xv[i];
        }
    }
    // Input gradient: W^T g + scale * A^T B^T g.
    Tensor grad_in = matmul(grad_out, weight);
    Tensor bt_g = matmul(grad_out, lora_b);  // (B, rank)
    Tensor a_contrib = matmul(bt_g, lora_a);  // (B, in)
    for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] += scale_ * a_contrib[i];
    return grad_in;
}

std::vector<nn::ParamView> LoraDense::base_params() {
    return {{name_ + ".weight", &weight.vec(), &grad_weight}, {name_ + ".bias", &bias, &grad_bias}};
}

std::vector<nn::ParamView> LoraDense::adapter_params() {
    return {{name_ + ".lora_a", &lora_a.vec(), &grad_lora_a},
            {name_ + ".lora_b", &lora_b.vec(), &grad_lora_b}};
}

// ------------------------------------------- CrossAttentionNoisePredictor

CrossAttentionNoisePredictor::CrossAttentionNoisePredictor(std::vector<int> image_shape,
                                                           int context_dim, int d_model,
                                                           int lora_rank, double lora_alpha,
                                                           std::uint64_t seed)
    : image_shape_(std::move(image_shape)),
      context_dim_(context_dim),
      d_model_(d_model),
      lora_rank_(lora_rank),
      lora_alpha_(lora_alpha) {
    if (image_shape_.size() != 4 || image_shape_[0] != 1) {
        throw ShapeError("predictor image shape must be (1, H, W, C)");
    }
    n_tokens_ = image_shape_[1] * image_shape_[2];
    channels_ = image_shape_[3];
    Rng rng(seed);
    in_proj_ = std::make_unique<nn::Dense>(channels_ + 2, d_model, true, rng, "xattn.in_proj");
    time_proj_ = std::make_unique<nn::Dense>(8, d_model, true, rng, "xattn.time_proj");
    ctx_proj_ = std::make_unique<nn::Dense>(context_dim, d_model, true, rng, "xattn.ctx_proj");
    wq_ = std::make_unique<LoraDense>(d_model, d_model, lora_rank, lora_alpha, rng, "xattn.wq");
    wk_ = std::make_unique<LoraDense>(d_model, d_model, lora_rank, lora_alpha, rng, "xattn.wk");
    wv_ = std::make_unique<LoraDense>(d_model, d_model, lora_rank, lora_alpha, rng, "xattn.wv");
    wo_ = std::make_unique<LoraDense>(d_model, d_model, lora_rank, lora_alpha, rng, "xattn.wo");
    mlp1_ = std::make_unique<nn::Dense>(d_model, d_model, true, rng, "xattn.mlp1");
    out_proj_ = std::make_unique<nn::Dense>(d_model, channels_, true, rng, "xattn.out_proj");
    null_token_.resize(static_cast<std::size_t>(d_model));
    register_token_.resize(static_cast<std::size_t>(d_model));
    for (auto& v : null_token_) v = rng.normal(0.0, 0.1);
    for (auto& v : register_token_) v = rng.normal(0.0, 0.1);
    grad_null_token_.assign(null_token_.size(), 0.0);
    grad_register_token_.assign(register_token_.size(), 0.0);
}

Tensor CrossAttentionNoisePredictor::tokens_from_image(const Tensor& x_t) const {
    const int H = image_shape_[1], W = image_shape_[2];
    Tensor tok({n_tokens_, channels_ + 2});
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int row = y * W + x;
            for (int c = 0; c < channels_; ++c) tok.at2(row, c) = x_t.at(0, y, x, c);
            tok.at2(row, channels_) = (2.0 * x + 1.0) / W - 1.0;
            tok.at2(row, channels_ + 1) = (2.0 * y + 1.0) / H - 1.0;
        }
    }
    return tok;
}

Tensor CrossAttentionNoisePredictor::run(const Tensor& x_t, int t, const Context& c, bool training) {
    if (x_t.shape() != image_shape_) {
        throw ShapeError("predictor expects " + Tensor(image_shape_).shape_str() + ", got " +
                         x_t.shape_str());
    }
    Tensor tokens = tokens_from_image(x_t);
    Tensor h = in_proj_->forward(tokens, training);  // (Ntok, d)

    Tensor tf({1, 8});
    {
        const auto f = time_features(t);
        for (int i = 0; i < 8; ++i) tf.at2(0, i) = f[static_cast<std::size_t>(i)];
    }
    Tensor temb = time_proj_->forward(tf, training);  // (1, d)
    for (int r = 0; r < n_tokens_; ++r)
        for (int j = 0; j < d_model_; ++j) h.at2(r, j) += temb.at2(0, j);

    // Context tokens: [prompt or null, register].
    Tensor ctx({2, d_model_});
    Tensor ctx_in({1, context_dim_});
    if (!c.is_null) {
        if (static_cast<int>(c.embedding.size()) != context_dim_) {
            throw ShapeError("context embedding has dim " + std::to_string(c.embedding.size()) +
                             ", predictor expects " + std::to_string(context_dim_));
        }
        for (int i = 0; i < context_dim_; ++i) ctx_in.at2(0, i) = c.embedding[static_cast<std::size_t>(i)];
        Tensor pe = ctx_proj_->forward(ctx_in, training);
        for (int j = 0; j < d_model_; ++j) ctx.at2(0, j) = pe.at2(0, j);
    } else {
        for (int j = 0; j < d_model_; ++j) ctx.at2(0, j) = null_token_[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < d_model_; ++j) ctx.at2(1, j) = register_token_[static_cast<std::size_t>(j)];

    Tensor q = wq_->forward(h, training);    // (Ntok, d)
    Tensor k = wk_->forward(ctx, training);  // (2, d)
    Tensor v = wv_->forward(ctx, training);  // (2, d)

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_model_));
    Tensor probs({n_tokens_, 2});
    for (int r = 0; r < n_tokens_; ++r) {
        std::vector<double> scores(2);
        for (int s = 0; s < 2; ++s) {
            double acc = 0.0;
            for (int j = 0; j < d_model_; ++j) acc += q.at2(r, j) * k.at2(s, j);
            scores[static_cast<std::size_t>(s)] = acc * inv_sqrt_d;
        }
        const auto p = softmax(scores);
        probs.at2(r, 0) = p[0];
        probs.at2(r, 1) = p[1];
    }
    Tensor attn = matmul(probs, v);                    // (Ntok, d)
    Tensor attn_o = wo_->forward(attn, training);      // (Ntok, d)
    Tensor h2 = h;
    for (std::size_t i = 0; i < h2.size(); ++i) h2[i] += attn_o[i];

    Tensor m1 = mlp1_->forward(h2, training);
    Tensor h3 = h2;
    for (std::size_t i = 0; i < h3.size(); ++i) h3[i] += std::tanh(m1[i]);

    Tensor out_tok = out_proj_->forward(h3, training);  // (Ntok, C)
    Tensor out(image_shape_);
    const int W = image_shape_[2];
    for (int r = 0; r < n_tokens_; ++r)
        for (int cc = 0; cc < channels_; ++cc) out.at(0, r / W, r % W, cc) = out_tok.at2(r, cc);

    if (training) {
        cache_.tokens_in = tokens;
        cache_.ctx_in = ctx_in;
        cache_.h = h;
        cache_.q = q;
        cache_.k = k;
        cache_.v = v;
        cache_.attn_probs = probs;
        cache_.attn_out = attn;
        cache_.h2 = h2;
        cache_.m1 = m1;
        cache_.h3 = h3;
        cache_.context = c;
        cache_.valid = true;
    }
    return out;
}

Tensor CrossAttentionNoisePredictor::predict(const Tensor& x_t, int t, const Context& c) {
    return run(x_t, t, c, false);
}

Tensor CrossAttentionNoisePredictor::forward_train(const Tensor& x_t, int t, const Context& c) {
    return run(x_t, t, c, true);
}

void CrossAttentionNoisePredictor::backward(const Tensor& grad_eps) {
    if (!cache_.valid) throw DomainError("backward without forward_train");
    const int W = image_shape_[2];
    Tensor g_out_tok({n_tokens_, channels_});
    for (int r = 0; r < n_tokens_; ++r)
        for (int cc = 0; cc < channels_; ++cc) g_out_tok.at2(r, cc) = grad_eps.at(0, r / W, r % W, cc);

    Tensor g_h3 = out_proj_->backward(g_out_tok);  // (Ntok, d)

    // h3 = h2 + tanh(m1)
    Tensor g_m1 = g_h3;
    for (std::size_t i = 0; i < g_m1.size(); ++i) {
        const double th = std::tanh(cache_.m1[i]);
        g_m1[i] *= 1.0 - th * th;
    }
    Tensor g_h2 = mlp1_->backward(g_m1);
    for (std::size_t i = 0; i < g_h2.size(); ++i) g_h2[i] += g_h3[i];

    // h2 = h + wo(attn)
    Tensor g_attn = wo_->backward(g_h2);  // (Ntok, d)
    Tensor g_h = g_h2;

    // attn = probs * v
    Tensor g_probs = matmul_tb(g_attn, cache_.v);        // (Ntok, 2)
    Tensor g_v = matmul_ta(cache_.attn_probs, g_attn);   // (2, d)

    // probs = softmax(q k^T / sqrt(d)) rows
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_model_));
    Tensor g_scores({n_tokens_, 2});
    for (int r = 0; r < n_tokens_; ++r) {
        const double p0 = cache_.attn_probs.at2(r, 0), p1 = cache_.attn_probs.at2(r, 1);
        const double dp0 = g_probs.at2(r, 0), dp1 = g_probs.at2(r, 1);
        const double weighted = dp0 * p0 + dp1 * p1;
        g_scores.at2(r, 0) = p0 * (dp0 - weighted);
        g_scores.at2(r, 1) = p1 * (dp1 - weighted);
    }
    Tensor g_q = matmul(g_scores, cache_.k);      // (Ntok, d)
    Tensor g_k = matmul_ta(g_scores, cache_.q);   // (2, d)
    for (std::size_t i = 0; i < g_q.size(); ++i) g_q[i] *= inv_sqrt_d;
    for (std::size_t i = 0; i < g_k.size(); ++i) g_k[i] *= inv_sqrt_d;

    Tensor g_h_from_q = wq_->backward(g_q);
    for (std::size_t i = 0; i < g_h.size(); ++i) g_h[i] += g_h_from_q[i];

    Tensor g_ctx = wk_->backward(g_k);
    {
        Tensor g_ctx_v = wv_->backward(g_v);
        for (std::size_t i = 0; i < g_ctx.size(); ++i) g_ctx[i] += g_ctx_v[i];
    }

    // ctx rows: [prompt|null, register]
    if (!cache_.context.is_null) {
        Tensor g_pe({1, d_model_});
        for (int j = 0; j < d_model_; ++j) g_pe.at2(0, j) = g_ctx.at2(0, j);
        ctx_proj_->backward(g_pe);
    } else {
        for (int j = 0; j < d_model_; ++j) grad_null_token_[static_cast<std::size_t>(j)] += g_ctx.at2(0, j);
    }
    for (int j = 0; j < d_model_; ++j) grad_register_token_[static_cast<std::size_t>(j)] += g_ctx.at2(1, j);

    // h = in_proj(tokens) + temb broadcast
    Tensor g_temb({1, d_model_});
    for (int r = 0; r < n_tokens_; ++r)
        for (int j = 0; j < d_model_; ++j) g_temb.at2(0, j) += g_h.at2(r, j);
    time_proj_->backward(g_temb);
    in_proj_->backward(g_h);
    cache_.valid = false;
}

std::vector<nn::ParamView> CrossAttentionNoisePredictor::base_params() {
    std::vector<nn::ParamView> p;
    for (auto* d : {in_proj_.get(), time_proj_.get(), ctx_proj_.get(), mlp1_.get(), out_proj_.get()}) {
        auto dp = d->params();
        p.insert(p.end(), dp.begin(), dp.end());
    }
    for (auto* l : {wq_.get(), wk_.get(), wv_.get(), wo_.get()}) {
        auto bp = l->base_params();
        p.insert(p.end(), bp.begin(), bp.end());
    }
    p.push_back({"xattn.null_token", &null_token_, &grad_null_token_});
    p.push_back({"xattn.register_token", &register_token_, &grad_register_token_});
    return p;
}

AdapterSet CrossAttentionNoisePredictor::adapters() {
    AdapterSet set;
    set.rank = lora_rank_;
    set.alpha = lora_alpha_;
    for (auto* l : {wq_.get(), wk_.get(), wv_.get(), wo_.get()}) {
        auto ap = l->adapter_params();
        set.factors.insert(set.factors.end(), ap.begin(), ap.end());
    }
    set.base_checksum = nn::param_checksum(base_params());
    return set;
}

std::vector<nn::ParamView> CrossAttentionNoisePredictor::trainable_params() {
    if (adapters_only_) return adapters().factors;
    auto p = base_params();
    auto a = adapters().factors;
    p.insert(p.end(), a.begin(), a.end());
    return p;
}

}  // namespace creadiff
