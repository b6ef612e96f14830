#pragma once

#include <memory>
#include <string>
#include <vector>

#include "creadiff/classifiers.hpp"
#include "creadiff/nn.hpp"
#include "creadiff/rng.hpp"
#include "creadiff/tensor.hpp"

namespace creadiff {

// DCGAN generator plan: noise -> transpose conv (k4 s1) to 4x4xC, then
// log2(image_dim) - 3 upscale-by-2 stages halving channels (BN + leaky ReLU),
// final 3-channel transpose conv with tanh. channel_divisor shrinks widths
// for desk-scale runs (1 = full scale).
struct GeneratorSpec {
    int noise_dim = 100;
    int image_dim = 64;
    int base_channels = 2048;
    int channel_divisor = 1;
    double leaky_slope = 0.2;

    int stages() const;
    int channels_at(int stage) const;  // stage 0 = the 4x4 block
    void validate() const;
};

// Discriminator plan: stem conv 3 -> 32 downscale 2 (leaky ReLU), then
// log2(image_dim) - 4 doubling stages, two constant-channel downscale stages
// (all BN + leaky ReLU), flatten, a 1-neuron binary head, and a style head
// (1024 -> 512 -> num_styles with leaky ReLU + dropout).
struct DiscriminatorSpec {
    int image_dim = 64;
    int stem_channels = 32;
    int channel_divisor = 1;
    int num_styles = 27;
    double leaky_slope = 0.2;
    double dropout = 0.5;
    int style_hidden1 = 1024;
    int style_hidden2 = 512;

    int doubling_stages() const;
    int flatten_dim() const;
    void validate() const;
};

// Closed-form parameter counts (no allocation). The generator counts at
// channel_divisor 1 reproduce the full-scale reference values exactly
// (e.g. 47,336,960 at image_dim 64).
long long generator_param_count(const GeneratorSpec& spec);
long long discriminator_param_count(const DiscriminatorSpec& spec);

// Training-facing interfaces so the CAN loop also drives toy (non-conv)
// generators and discriminators in tests.
class Generator {
public:
    virtual ~Generator() = default;
    virtual Tensor forward(const Tensor& z, bool training) = 0;
    virtual void backward(const Tensor& grad_images) = 0;
    virtual std::vector<nn::ParamView> params() = 0;
    virtual int noise_dim() const = 0;
};

struct DiscriminatorOutputs {
    Tensor binary_logits;  // (B, 1)
    Tensor style_logits;   // (B, N)
};

class Discriminator {
public:
    virtual ~Discriminator() = default;
    virtual DiscriminatorOutputs forward(const Tensor& images, bool training) = 0;
    virtual Tensor backward(const Tensor& grad_binary, const Tensor& grad_style) = 0;
    virtual std::vector<nn::ParamView> params() = 0;
    virtual int num_styles() const = 0;
};

class CanGenerator : public Generator {
public:
    CanGenerator(GeneratorSpec spec, std::uint64_t seed);

    Tensor forward(const Tensor& z, bool training) override;
    void backward(const Tensor& grad_images) override;
    std::vector<nn::ParamView> params() override { return net_.params(); }
    int noise_dim() const override { return spec_.noise_dim; }

    const GeneratorSpec& spec() const { return spec_; }
    nn::Sequential& net() { return net_; }

private:
    GeneratorSpec spec_;
    nn::Sequential net_;
};

class CanDiscriminator : public Discriminator {
public:
    CanDiscriminator(DiscriminatorSpec spec, std::uint64_t seed);

    DiscriminatorOutputs forward(const Tensor& images, bool training) override;
    Tensor backward(const Tensor& grad_binary, const Tensor& grad_style) override;
    std::vector<nn::ParamView> params() override;
    int num_styles() const override { return spec_.num_styles; }

    // Eval-mode logits for one (1, H, W, C) image; dropout off, BN running
    // stats. Not safe for concurrent callers on a shared instance.
    std::vector<double> style_logits_eval(const Tensor& image);
    double binary_logit_eval(const Tensor& image);

    const DiscriminatorSpec& spec() const { return spec_; }
    nn::Sequential& trunk() { return trunk_; }
    nn::Sequential& style_head() { return style_head_; }

private:
    DiscriminatorSpec spec_;
    nn::Sequential trunk_;
    std::unique_ptr<nn::Dense> binary_head_;
    nn::Sequential style_head_;
};

// StyleHead view over a frozen CanDiscriminator, for gan_classify.
class CanStyleHead : public StyleHead {
public:
    CanStyleHead(CanDiscriminator& disc, std::vector<std::string> labels);
    std::vector<double> style_logits(const Tensor& image) const override;
    int num_classes() const override;
    int expected_image_dim() const override;
    std::vector<std::string> class_labels() const override { return labels_; }

private:
    CanDiscriminator* disc_;
    std::vector<std::string> labels_;
};

// Mean cross entropy of softmaxed style logits against one-hot labels.
double style_classification_loss(const Tensor& style_logits, const std::vector<int>& labels);

enum class SaClassifierKind { none, dcgan, clip };

struct CanStepOptions {
    SaClassifierKind sa_classifier = SaClassifierKind::dcgan;
    // CLIP-mode dependencies; the embedder must be differentiable.
    const EmbeddingProvider* clip_provider = nullptr;
    const std::vector<std::string>* clip_class_names = nullptr;
    double clip_temperature = 100.0;
};

struct CanStepReport {
    double disc_adversarial = 0.0;
    double disc_style = 0.0;        // L_SL on real images
    double disc_total = 0.0;
    double gen_adversarial = 0.0;
    double gen_style_ambiguity = 0.0;  // L_SA; >= ln N
    double gen_total = 0.0;
};

// One discriminator update (adversarial + L_SL) followed by one generator
// update (non-saturating adversarial + L_SA). The style classifier for L_SA
// is the discriminator's own head, or an embedding classifier in CLIP mode
// ("the head's output is discarded" in that configuration).
CanStepReport can_train_step(const Tensor& real_images, const std::vector<int>& labels,
                             Generator& gen, Discriminator& disc, nn::Adam& opt_gen,
                             nn::Adam& opt_disc, Rng& rng, const CanStepOptions& opts = {});

// Style accuracy of the discriminator head on labeled images (eval mode).
double style_accuracy(CanDiscriminator& disc, const std::vector<Tensor>& images,
                      const std::vector<int>& labels);

// L_SA of the generator on a fixed noise panel (eval-style measurement).
double generator_style_ambiguity(Generator& gen, Discriminator& disc, const Tensor& z_panel);

// Versioned checkpoint with both specs, parameters (including BN running
// stats), optimizer state and the class-name registry. The discriminator
// style head loads standalone for classification.
void save_can_checkpoint(const std::string& path, CanGenerator& gen, CanDiscriminator& disc,
                         nn::Adam& opt_gen, nn::Adam& opt_disc,
                         const std::vector<std::string>& registry, std::uint64_t seed);

struct CanCheckpoint {
    std::unique_ptr<CanGenerator> generator;
    std::unique_ptr<CanDiscriminator> discriminator;
    std::vector<std::string> registry;
    std::uint64_t seed = 0;
};

CanCheckpoint load_can_checkpoint(const std::string& path);

// Loads only the discriminator (trunk + style head) from a CAN checkpoint.
std::unique_ptr<CanDiscriminator> load_can_style_discriminator(const std::string& path,
                                                               std::vector<std::string>* registry_out = nullptr);

}  // namespace creadiff
