#include "creadiff/can.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace creadiff {

namespace {

int int_log2(int v) {
    int p = 0;
    while ((1 << p) < v) ++p;
    if ((1 << p) != v) throw ConfigError("image_dim must be a power of two, got " + std::to_string(v));
    return p;
}

int floored_div(int channels, int divisor) { return std::max(4, channels / divisor); }

// Stable softplus; -log sigmoid(x) = softplus(-x).
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ------------------------------------------------------------------ specs

int GeneratorSpec::stages() const { return int_log2(image_dim) - 3; }

int GeneratorSpec::channels_at(int stage) const {
    return floored_div(base_channels >> stage, channel_divisor);
}

void GeneratorSpec::validate() const {
    if (noise_dim < 1) throw ConfigError("generator noise_dim must be >= 1");
    if (image_dim < 8) throw ConfigError("generator image_dim must be >= 8");
    int_log2(image_dim);
    if (channel_divisor < 1) throw ConfigError("channel_divisor must be >= 1");
}

int DiscriminatorSpec::doubling_stages() const { return int_log2(image_dim) - 4; }

int DiscriminatorSpec::flatten_dim() const {
    // Spatial size after the stem, the doubling stages and two constant
    // stages is always 2; channels double only in the doubling stages.
    const int c_last = floored_div(stem_channels << doubling_stages(), channel_divisor);
    return 4 * c_last;
}

void DiscriminatorSpec::validate() const {
    if (image_dim < 32) {
        throw ConfigError("discriminator image_dim must be >= 32, got " + std::to_string(image_dim));
    }
    int_log2(image_dim);
    if (num_styles < 2) throw ConfigError("discriminator needs at least 2 style classes");
    if (channel_divisor < 1) throw ConfigError("channel_divisor must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

long long generator_param_count(const GeneratorSpec& spec) {
    spec.validate();
    const long long k2 = 16;  // 4x4 kernels
    long long count = 0;
    long long c_prev = spec.channels_at(0);
    count += static_cast<long long>(spec.noise_dim) * c_prev * k2;  // initial, no bias
    count += 2 * c_prev;                                            // BN affine
    for (int s = 1; s <= spec.stages(); ++s) {
        const long long c = spec.channels_at(s);
        count += c_prev * c * k2 + 2 * c;
        c_prev = c;
    }
    count += c_prev * 3 * k2;  // final transpose conv, no bias
    return count;
}

long long discriminator_param_count(const DiscriminatorSpec& spec) {
    spec.validate();
    const long long k2 = 16;
    long long count = 0;
    long long c = floored_div(spec.stem_channels, spec.channel_divisor);
    count += 3 * c * k2 + c;  // stem conv with bias (no BN follows)
    for (int s = 0; s < spec.doubling_stages(); ++s) {
        const long long c2 = floored_div(spec.stem_channels << (s + 1), spec.channel_divisor);
        count += c * c2 * k2 + 2 * c2;
        c = c2;
    }
    count += 2 * (c * c * k2 + 2 * c);  // two constant-channel stages
    const long long f = spec.flatten_dim();
    count += f + 1;  // binary head
    const long long h1 = floored_div(spec.style_hidden1, spec.channel_divisor);
    const long long h2 = floored_div(spec.style_hidden2, spec.channel_divisor);
    count += f * h1 + h1 + h1 * h2 + h2 + h2 * spec.num_styles + spec.num_styles;
    return count;
}

// ------------------------------------------------------------- generator

CanGenerator::CanGenerator(GeneratorSpec spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng(seed);
    const int c0 = spec_.channels_at(0);
    net_.add(std::make_unique<nn::ConvTranspose2d>(spec_.noise_dim, c0, 4, 1, 0, false, rng, "gen.initial"));
    net_.add(std::make_unique<nn::BatchNorm2d>(c0, "gen.bn0"));
    net_.add(std::make_unique<nn::LeakyReLU>(spec_.leaky_slope));
    int c_prev = c0;
    for (int s = 1; s <= spec_.stages(); ++s) {
        const int c = spec_.channels_at(s);
        const std::string base = "gen.up" + std::to_string(s);
        net_.add(std::make_unique<nn::ConvTranspose2d>(c_prev, c, 4, 2, 1, false, rng, base));
        net_.add(std::make_unique<nn::BatchNorm2d>(c, base + ".bn"));
        net_.add(std::make_unique<nn::LeakyReLU>(spec_.leaky_slope));
        c_prev = c;
    }
    net_.add(std::make_unique<nn::ConvTranspose2d>(c_prev, 3, 4, 2, 1, false, rng, "gen.final"));
    net_.add(std::make_unique<nn::Tanh>());
}

Tensor CanGenerator::forward(const Tensor& z, bool training) {
    if (z.ndim() != 2 || z.dim(1) != spec_.noise_dim) {
        throw ShapeError("generator expects noise (B, " + std::to_string(spec_.noise_dim) + "), got " +
                         z.shape_str());
    }
    const Tensor z4 = z.reshaped({z.dim(0), 1, 1, spec_.noise_dim});
    return net_.forward(z4, training);
}

void CanGenerator::backward(const Tensor& grad_images) { net_.backward(grad_images); }

// --------------------------------------------------------- discriminator

CanDiscriminator::CanDiscriminator(DiscriminatorSpec spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng(seed);
    const int s0 = floored_div(spec_.stem_channels, spec_.channel_divisor);
    trunk_.add(std::make_unique<nn::Conv2d>(3, s0, 4, 2, 1, true, rng, "disc.stem"));
    trunk_.add(std::make_unique<nn::LeakyReLU>(spec_.leaky_slope));
    int c = s0;
    for (int s = 0; s < spec_.doubling_stages(); ++s) {
        const int c2 = floored_div(spec_.stem_channels << (s + 1), spec_.channel_divisor);
        const std::string base = "disc.down" + std::to_string(s);
        trunk_.add(std::make_unique<nn::Conv2d>(c, c2, 4, 2, 1, false, rng, base));
        trunk_.add(std::make_unique<nn::BatchNorm2d>(c2, base + ".bn"));
        trunk_.add(std::make_unique<nn::LeakyReLU>(spec_.leaky_slope));
        c = c2;
    }
    for (int s = 0; s < 2; ++s) {
        const std::string base = "disc.const" + std::to_string(s);
        trunk_.add(std::make_unique<nn::Conv2d>(c, c, 4, 2, 1, false, rng, base));
        trunk_.add(std::make_unique<nn::BatchNorm2d>(c, base + ".bn"));
        trunk_.add(std::make_unique<nn::LeakyReLU>(spec_.leaky_slope));
    }
    trunk_.add(std::make_unique<nn::Flatten>());

    binary_head_ = std::make_unique<nn::Dense>(spec_.flatten_dim(), 1, true, rng, "disc.binary");
    const int h1 = floored_div(spec_.style_hidden1, spec_.channel_divisor);
    const int h2 = floored_div(spec_.style_hidden2, spec_.channel_divisor);
    style_head_.add(std::make_unique<nn::Dense>(spec_.flatten_dim(), h1, true, rng, "disc.style1"));
    style_head_.add(std::make_unique<nn::LeakyReLU>(spec_.leaky_slope));
    style_head_.add(std::make_unique<nn::Dropout>(spec_.dropout, seed ^ 0xd20u));
    style_head_.add(std::make_unique<nn::Dense>(h1, h2, true, rng, "disc.style2"));
    style_head_.add(std::make_unique<nn::LeakyReLU>(spec_.leaky_slope));
    style_head_.add(std::make_unique<nn::Dropout>(spec_.dropout, seed ^ 0xd21u));
    style_head_.add(std::make_unique<nn::Dense>(h2, spec_.num_styles, true, rng, "disc.style3"));
}

DiscriminatorOutputs CanDiscriminator::forward(const Tensor& images, bool training) {
    if (images.ndim() != 4 || images.dim(1) != spec_.image_dim || images.dim(2) != spec_.image_dim ||
        images.dim(3) != 3) {
        throw ShapeError("discriminator expects (B, " + std::to_string(spec_.image_dim) + ", " +
                         std::to_string(spec_.image_dim) + ", 3), got " + images.shape_str());
    }
    const Tensor feat = trunk_.forward(images, training);
    DiscriminatorOutputs out;
    out.binary_logits = binary_head_->forward(feat, training);
    out.style_logits = style_head_.forward(feat, training);
    return out;
}

Tensor CanDiscriminator::backward(const Tensor& grad_binary, const Tensor& grad_style) {
    Tensor g_feat = binary_head_->backward(grad_binary);
    const Tensor g_style = style_head_.backward(grad_style);
    for (std::size_t i = 0; i < g_feat.size(); ++i) g_feat[i] += g_style[i];
    return trunk_.backward(g_feat);
}

std::vector<nn::ParamView> CanDiscriminator::params() {
    std::vector<nn::ParamView> p = trunk_.params();
    auto bp = binary_head_->params();
    p.insert(p.end(), bp.begin(), bp.end());
    auto sp = style_head_.params();
    p.insert(p.end(), sp.begin(), sp.end());
    return p;
}

std::vector<double> CanDiscriminator::style_logits_eval(const Tensor& image) {
    const Tensor feat = trunk_.forward(image, false);
    const Tensor logits = style_head_.forward(feat, false);
    std::vector<double> out(static_cast<std::size_t>(spec_.num_styles));
    for (int i = 0; i < spec_.num_styles; ++i) out[static_cast<std::size_t>(i)] = logits.at2(0, i);
    return out;
}

double CanDiscriminator::binary_logit_eval(const Tensor& image) {
    const Tensor feat = trunk_.forward(image, false);
    return binary_head_->forward(feat, false).at2(0, 0);
}

CanStyleHead::CanStyleHead(CanDiscriminator& disc, std::vector<std::string> labels)
    : disc_(&disc), labels_(std::move(labels)) {
    if (static_cast<int>(labels_.size()) != disc.num_styles()) {
        throw ConfigError("style head has " + std::to_string(disc.num_styles()) + " outputs but " +
                          std::to_string(labels_.size()) + " labels were given");
    }
}

std::vector<double> CanStyleHead::style_logits(const Tensor& image) const {
    return disc_->style_logits_eval(image);
}

int CanStyleHead::num_classes() const { return disc_->num_styles(); }
int CanStyleHead::expected_image_dim() const { return disc_->spec().image_dim; }

// ----------------------------------------------------------------- losses

double style_classification_loss(const Tensor& style_logits, const std::vector<int>& labels) {
    const int B = style_logits.dim(0), N = style_logits.dim(1);
    if (static_cast<int>(labels.size()) != B) throw ShapeError("labels/batch size mismatch");
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
        const int label = labels[static_cast<std::size_t>(b)];
        if (label < 0 || label >= N) {
            throw DomainError("style label " + std::to_string(label) + " outside [0, " + std::to_string(N) + ")");
        }
        std::vector<double> row(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) row[static_cast<std::size_t>(i)] = style_logits.at2(b, i);
        loss += log_sum_exp(row) - row[static_cast<std::size_t>(label)];
    }
    return loss / B;
}

namespace {

// d(mean_b CE(softmax(logits_b), onehot_b)) / d logits, already averaged.
Tensor style_loss_grad(const Tensor& style_logits, const std::vector<int>& labels) {
    const int B = style_logits.dim(0), N = style_logits.dim(1);
    Tensor g({B, N});
    for (int b = 0; b < B; ++b) {
        std::vector<double> row(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) row[static_cast<std::size_t>(i)] = style_logits.at2(b, i);
        const auto p = softmax(row);
        for (int i = 0; i < N; ++i) g.at2(b, i) = p[static_cast<std::size_t>(i)] / B;
        g.at2(b, labels[static_cast<std::size_t>(b)]) -= 1.0 / B;
    }
    return g;
}

struct SaResult {
    double loss = 0.0;
    Tensor grad_style_logits;  // zero when the head's output is discarded
    Tensor grad_images;        // for embedding-based classifiers
    bool has_image_grad = false;
};

// L_SA = mean_b CE(softmax(style_logits_b), U); grad = (p - 1/N)/B.
SaResult style_ambiguity_from_head(const Tensor& style_logits) {
    const int B = style_logits.dim(0), N = style_logits.dim(1);
    SaResult r;
    r.grad_style_logits = Tensor({B, N});
    for (int b = 0; b < B; ++b) {
        std::vector<double> row(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) row[static_cast<std::size_t>(i)] = style_logits.at2(b, i);
        const auto p = softmax(row);
        double ce = 0.0;
        for (int i = 0; i < N; ++i) {
            ce -= std::log(std::max(p[static_cast<std::size_t>(i)], 1e-300)) / N;
            r.grad_style_logits.at2(b, i) = (p[static_cast<std::size_t>(i)] - 1.0 / N) / B;
        }
        r.loss += ce / B;
    }
    return r;
}

// L_SA through an embedding classifier (CLIP style): softmax over
// temperature-scaled cosine similarities, differentiated to pixels.
SaResult style_ambiguity_from_clip(const Tensor& images, const EmbeddingProvider& provider,
                                   const std::vector<std::string>& class_names, double temperature) {
    const auto* diff = dynamic_cast<const DifferentiableImageEmbedder*>(&provider);
    if (diff == nullptr) {
        throw ConfigError("CLIP-mode CAN training needs a differentiable image embedder");
    }
    const int B = images.dim(0);
    const int N = static_cast<int>(class_names.size());
    SaResult r;
    r.grad_images = Tensor::zeros_like(images);
    r.has_image_grad = true;
    std::vector<std::vector<double>> texts;
    for (const auto& name : class_names) {
        auto t = provider.embed_text(name);
        const double n = l2_norm(t);
        for (double& v : t) v /= n;
        texts.push_back(std::move(t));
    }
    for (int b = 0; b < B; ++b) {
        const Tensor img = images.slice_batch(b);
        const std::vector<double> e = provider.embed_image(img);
        const double e_norm = l2_norm(e);
        if (e_norm == 0.0) throw NumericError("zero-norm image embedding in CLIP-mode L_SA");
        std::vector<double> e_hat(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) e_hat[i] = e[i] / e_norm;
        std::vector<double> scores(static_cast<std::size_t>(N));
        for (int j = 0; j < N; ++j) scores[static_cast<std::size_t>(j)] = temperature * dot(e_hat, texts[static_cast<std::size_t>(j)]);
        const auto p = softmax(scores);
        double ce = 0.0;
        std::vector<double> g_e(e.size(), 0.0);
        for (int j = 0; j < N; ++j) {
            const double pj = std::max(p[static_cast<std::size_t>(j)], 1e-300);
            ce -= std::log(pj) / N;
            const double g_score = (p[static_cast<std::size_t>(j)] - 1.0 / N) / B;
            // d score / d e = temperature * (t_hat - (e_hat . t_hat) e_hat) / |e|
            const double cos_j = dot(e_hat, texts[static_cast<std::size_t>(j)]);
            for (std::size_t i = 0; i < e.size(); ++i) {
                g_e[i] += g_score * temperature * (texts[static_cast<std::size_t>(j)][i] - cos_j * e_hat[i]) / e_norm;
            }
        }
        r.loss += ce / B;
        const Tensor g_img = diff->embed_image_backward(img, g_e);
        for (int y = 0; y < images.dim(1); ++y)
            for (int x = 0; x < images.dim(2); ++x)
                for (int cc = 0; cc < images.dim(3); ++cc) r.grad_images.at(b, y, x, cc) += g_img.at(0, y, x, cc);
    }
    return r;
}

}  // namespace

CanStepReport can_train_step(const Tensor& real_images, const std::vector<int>& labels,
                             Generator& gen, Discriminator& disc, nn::Adam& opt_gen,
                             nn::Adam& opt_disc, Rng& rng, const CanStepOptions& opts) {
    const int B = real_images.dim(0);
    if (static_cast<int>(labels.size()) != B) throw ShapeError("labels/batch size mismatch");
    CanStepReport report;

    auto draw_noise = [&](int count) {
        Tensor z({count, gen.noise_dim()});
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
        return z;
    };

    // --- discriminator update: adversarial + L_SL on real labels.
    opt_disc.zero_grad();
    {
        const auto real_out = disc.forward(real_images, true);
        Tensor g_binary({B, 1});
        for (int b = 0; b < B; ++b) {
            const double logit = real_out.binary_logits.at2(b, 0);
            report.disc_adversarial += softplus(-logit) / B;  // -log D(x)
            g_binary.at2(b, 0) = (sigmoid(logit) - 1.0) / B;
        }
        report.disc_style = style_classification_loss(real_out.style_logits, labels);
        const Tensor g_style = style_loss_grad(real_out.style_logits, labels);
        disc.backward(g_binary, g_style);
    }
    {
        const Tensor fake = gen.forward(draw_noise(B), true);  // detached from G
        const auto fake_out = disc.forward(fake, true);
        Tensor g_binary({B, 1});
        for (int b = 0; b < B; ++b) {
            const double logit = fake_out.binary_logits.at2(b, 0);
            report.disc_adversarial += softplus(logit) / B;  // -log(1 - D(G(z)))
            g_binary.at2(b, 0) = sigmoid(logit) / B;
        }
        Tensor g_style({B, disc.num_styles()});
        disc.backward(g_binary, g_style);
    }
    report.disc_total = report.disc_adversarial + report.disc_style;
    if (!std::isfinite(report.disc_total)) {
        throw NumericError("non-finite discriminator loss (adv " + std::to_string(report.disc_adversarial) +
                           ", style " + std::to_string(report.disc_style) + ")");
    }
    opt_disc.step();
    opt_disc.zero_grad();

    // --- generator update: non-saturating adversarial + L_SA.
    opt_gen.zero_grad();
    {
        const Tensor fake = gen.forward(draw_noise(B), true);
        const auto out = disc.forward(fake, true);
        Tensor g_binary({B, 1});
        for (int b = 0; b < B; ++b) {
            const double logit = out.binary_logits.at2(b, 0);
            report.gen_adversarial += softplus(-logit) / B;  // -log D(G(z))
            g_binary.at2(b, 0) = (sigmoid(logit) - 1.0) / B;
        }
        Tensor g_style({B, disc.num_styles()});
        SaResult sa;
        switch (opts.sa_classifier) {
            case SaClassifierKind::none:
                break;
            case SaClassifierKind::dcgan:
                sa = style_ambiguity_from_head(out.style_logits);
                g_style = sa.grad_style_logits;
                break;
            case SaClassifierKind::clip:
                if (opts.clip_provider == nullptr || opts.clip_class_names == nullptr) {
                    throw ConfigError("CLIP-mode CAN training needs a provider and class names");
                }
                sa = style_ambiguity_from_clip(fake, *opts.clip_provider, *opts.clip_class_names,
                                               opts.clip_temperature);
                break;
        }
        report.gen_style_ambiguity = sa.loss;
        Tensor grad_images = disc.backward(g_binary, g_style);
        if (sa.has_image_grad) {
            for (std::size_t i = 0; i < grad_images.size(); ++i) grad_images[i] += sa.grad_images[i];
        }
        gen.backward(grad_images);
    }
    report.gen_total = report.gen_adversarial + report.gen_style_ambiguity;
    if (!std::isfinite(report.gen_total)) {
        throw NumericError("non-finite generator loss (adv " + std::to_string(report.gen_adversarial) +
                           ", sa " + std::to_string(report.gen_style_ambiguity) + ")");
    }
    opt_gen.step();
    opt_gen.zero_grad();
    opt_disc.zero_grad();  // discard generator-phase gradients accumulated in D
    return report;
}

double style_accuracy(CanDiscriminator& disc, const std::vector<Tensor>& images,
                      const std::vector<int>& labels) {
    if (images.empty() || images.size() != labels.size()) {
        throw ShapeError("style_accuracy needs matching nonempty images/labels");
    }
    int correct = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto logits = disc.style_logits_eval(images[i]);
        const int pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (pred == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(images.size());
}

double generator_style_ambiguity(Generator& gen, Discriminator& disc, const Tensor& z_panel) {
    const Tensor fake = gen.forward(z_panel, false);
    const auto out = disc.forward(fake, false);
    return style_ambiguity_from_head(out.style_logits).loss;
}

// ------------------------------------------------------------ checkpoints

namespace {

using nlohmann::json;

json params_to_json(const std::vector<nn::ParamView>& params) {
    json j = json::object();
    for (const auto& p : params) j[p.name] = *p.value;
    return j;
}

void params_from_json(const json& j, const std::vector<nn::ParamView>& params, const std::string& where) {
    for (const auto& p : params) {
        if (!j.contains(p.name)) throw IoError(where + ": missing parameter " + p.name);
        const auto& arr = j.at(p.name);
        if (arr.size() != p.value->size()) {
            throw IoError(where + ": parameter " + p.name + " has wrong size");
        }
        for (std::size_t i = 0; i < p.value->size(); ++i) (*p.value)[i] = arr[i].get<double>();
    }
}

json adam_to_json(nn::Adam& opt) {
    json j;
    j["t"] = opt.step_count();
    json m = json::object(), v = json::object();
    const auto params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[params[i].name] = opt.moment1()[i];
        v[params[i].name] = opt.moment2()[i];
    }
    j["m"] = std::move(m);
    j["v"] = std::move(v);
    return j;
}

void adam_from_json(const json& j, nn::Adam& opt) {
    opt.step_count() = j.at("t").get<std::int64_t>();
    const auto params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& m = j.at("m").at(params[i].name);
        const auto& v = j.at("v").at(params[i].name);
        for (std::size_t k = 0; k < opt.moment1()[i].size(); ++k) {
            opt.moment1()[i][k] = m[k].get<double>();
            opt.moment2()[i][k] = v[k].get<double>();
        }
    }
}

json gen_spec_to_json(const GeneratorSpec& s) {
    return json{{"noise_dim", s.noise_dim},
                {"image_dim", s.image_dim},
                {"base_channels", s.base_channels},
                {"channel_divisor", s.channel_divisor},
                {"leaky_slope", s.leaky_slope}};
}

GeneratorSpec gen_spec_from_json(const json& j) {
    GeneratorSpec s;
    s.noise_dim = j.at("noise_dim").get<int>();
    s.image_dim = j.at("image_dim").get<int>();
    s.base_channels = j.at("base_channels").get<int>();
    s.channel_divisor = j.at("channel_divisor").get<int>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    return s;
}

json disc_spec_to_json(const DiscriminatorSpec& s) {
    return json{{"image_dim", s.image_dim},     {"stem_channels", s.stem_channels},
                {"channel_divisor", s.channel_divisor}, {"num_styles", s.num_styles},
                {"leaky_slope", s.leaky_slope}, {"dropout", s.dropout},
                {"style_hidden1", s.style_hidden1}, {"style_hidden2", s.style_hidden2}};
}

DiscriminatorSpec disc_spec_from_json(const json& j) {
    DiscriminatorSpec s;
    s.image_dim = j.at("image_dim").get<int>();
    s.stem_channels = j.at("stem_channels").get<int>();
    s.channel_divisor = j.at("channel_divisor").get<int>();
    s.num_styles = j.at("num_styles").get<int>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    s.dropout = j.at("dropout").get<double>();
    s.style_hidden1 = j.at("style_hidden1").get<int>();
    s.style_hidden2 = j.at("style_hidden2").get<int>();
    return s;
}

std::vector<nn::ParamView> full_state(CanGenerator& gen) {
    auto p = gen.params();
    auto s = gen.net().state();
    p.insert(p.end(), s.begin(), s.end());
    return p;
}

std::vector<nn::ParamView> full_state(CanDiscriminator& disc) {
    auto p = disc.params();
    auto s = disc.trunk().state();
    p.insert(p.end(), s.begin(), s.end());
    return p;
}

}  // namespace

void save_can_checkpoint(const std::string& path, CanGenerator& gen, CanDiscriminator& disc,
                         nn::Adam& opt_gen, nn::Adam& opt_disc,
                         const std::vector<std::string>& registry, std::uint64_t seed) {
    json j;
    j["format"] = "creadiff-checkpoint";
    j["version"] = 1;
    j["kind"] = "can";
    j["seed"] = seed;
    j["registry"] = registry;
    j["generator_spec"] = gen_spec_to_json(gen.spec());
    j["discriminator_spec"] = disc_spec_to_json(disc.spec());
    j["generator"] = params_to_json(full_state(gen));
    j["discriminator"] = params_to_json(full_state(disc));
    j["opt_gen"] = adam_to_json(opt_gen);
    j["opt_disc"] = adam_to_json(opt_disc);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump() << "\n";
}

namespace {

json load_checkpoint_json(const std::string& path, const char* kind) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    in >> j;
    if (j.value("format", "") != "creadiff-checkpoint" || j.value("version", 0) != 1) {
        throw IoError(path + ": not a creadiff-checkpoint v1 file");
    }
    if (j.value("kind", "") != kind) {
        throw IoError(path + ": checkpoint kind is '" + j.value("kind", "") + "', expected '" + kind + "'");
    }
    return j;
}

}  // namespace

CanCheckpoint load_can_checkpoint(const std::string& path) {
    const json j = load_checkpoint_json(path, "can");
    CanCheckpoint ck;
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.registry = j.at("registry").get<std::vector<std::string>>();
    ck.generator = std::make_unique<CanGenerator>(gen_spec_from_json(j.at("generator_spec")), ck.seed);
    ck.discriminator =
        std::make_unique<CanDiscriminator>(disc_spec_from_json(j.at("discriminator_spec")), ck.seed);
    params_from_json(j.at("generator"), full_state(*ck.generator), path);
    params_from_json(j.at("discriminator"), full_state(*ck.discriminator), path);
    return ck;
}

std::unique_ptr<CanDiscriminator> load_can_style_discriminator(const std::string& path,
                                                               std::vector<std::string>* registry_out) {
    const json j = load_checkpoint_json(path, "can");
    auto disc = std::make_unique<CanDiscriminator>(disc_spec_from_json(j.at("discriminator_spec")),
                                                   j.at("seed").get<std::uint64_t>());
    params_from_json(j.at("discriminator"), full_state(*disc), path);
    if (registry_out != nullptr) *registry_out = j.at("registry").get<std::vector<std::string>>();
    return disc;
}

}  // namespace creadiff
