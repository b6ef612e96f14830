#pragma once

#include <string>
#include <vector>

#include "creadiff/rng.hpp"
#include "creadiff/tensor.hpp"

namespace creadiff {

// Shared image/text embedding space. The full-scale provider (a CLIP
// checkpoint) plugs in behind this interface; the toy provider below keeps
// the whole suite self-contained.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual int dim() const = 0;
    virtual std::vector<double> embed_image(const Tensor& image) const = 0;
    virtual std::vector<double> embed_text(const std::string& text) const = 0;
};

// Providers whose image embedding is differentiable can also back-propagate
// an embedding gradient to pixels. Needed when a generator trains against an
// embedding-based style classifier.
class DifferentiableImageEmbedder {
public:
    virtual ~DifferentiableImageEmbedder() = default;
    // Returns d(loss)/d(image) given d(loss)/d(embedding) for the same image.
    virtual Tensor embed_image_backward(const Tensor& image,
                                        const std::vector<double>& grad_embedding) const = 0;
};

// Deterministic desk-scale embedder: a fixed seeded random projection of
// smooth pixel statistics (channel means and second moments, quadrant means,
// squared finite differences). Text maps to a unit vector seeded by the
// string hash. All statistics are differentiable in the image.
class ToyEmbeddingProvider : public EmbeddingProvider, public DifferentiableImageEmbedder {
public:
    explicit ToyEmbeddingProvider(int dim = 32, std::uint64_t seed = 17);

    int dim() const override { return dim_; }
    std::vector<double> embed_image(const Tensor& image) const override;
    std::vector<double> embed_text(const std::string& text) const override;
    Tensor embed_image_backward(const Tensor& image,
                                const std::vector<double>& grad_embedding) const override;

    static constexpr int kNumStats = 24;

private:
    std::vector<double> image_stats(const Tensor& image) const;
    void image_stats_backward(const Tensor& image, const std::vector<double>& grad_stats,
                              Tensor& grad_image) const;
    static const Tensor& as_single_image(const Tensor& image);

    int dim_;
    std::uint64_t seed_;
    std::vector<double> projection_;  // (dim, kNumStats) row-major
};

}  // namespace creadiff
