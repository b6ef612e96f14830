#pragma once

#include <memory>
#include <string>
#include <vector>

#include "creadiff/embeddings.hpp"
#include "creadiff/rng.hpp"
#include "creadiff/tensor.hpp"

namespace creadiff {

// Probability vector over N style classes (or clusters). Every classifier in
// the toolkit emits one of these.
struct StyleDistribution {
    std::vector<double> probs;
    std::vector<std::string> labels;

    std::size_t size() const { return probs.size(); }
    void validate(double tol = 1e-6) const;
    int argmax() const;
};

enum class ClusterSource { text, image };

// k centers in the embedding space, with fit metadata.
struct ClusterSet {
    Tensor centers;  // (k, d)
    ClusterSource source = ClusterSource::text;
    int iterations = 0;
    double inertia = 0.0;
    std::vector<double> inertia_history;  // per-Lloyd-iteration, nonincreasing

    int k() const { return centers.ndim() == 2 ? centers.dim(0) : 0; }
    int dim() const { return centers.ndim() == 2 ? centers.dim(1) : 0; }
    std::vector<double> center(int i) const;

    // Versioned text format; identical inputs produce identical bytes.
    void save(const std::string& path) const;
    static ClusterSet load(const std::string& path);
};

// Lloyd's algorithm with k-means++ seeding. Deterministic given the rng seed.
// Requires k <= number of distinct points.
ClusterSet fit_kmeans(const std::vector<std::vector<double>>& points, int k, Rng& rng,
                      int max_iterations = 100);

// Zero-shot classification: softmax over temperature-scaled cosine
// similarities between the image embedding and each class-name embedding.
StyleDistribution clip_classify(const Tensor& x0, const std::vector<std::string>& class_names,
                                const EmbeddingProvider& provider, double temperature = 100.0);

// Soft cluster assignment: softmax over inverse epsilon-stabilized Euclidean
// distances 1 / (||E(x0) - c_i|| + eps).
StyleDistribution kmeans_classify(const Tensor& x0, const ClusterSet& clusters,
                                  const EmbeddingProvider& provider, double epsilon = 1e-8);

// Style-classification head of a discriminator: raw logits for one image.
class StyleHead {
public:
    virtual ~StyleHead() = default;
    virtual std::vector<double> style_logits(const Tensor& image) const = 0;
    virtual int num_classes() const = 0;
    virtual int expected_image_dim() const = 0;
    virtual std::vector<std::string> class_labels() const = 0;
};

// Softmax over the discriminator style head. The head expects its own
// resolution; no silent resizing happens here.
StyleDistribution gan_classify(const Tensor& x0, const StyleHead& head);

// Uniform classifier-facing interface for the reward module.
class StyleClassifier {
public:
    virtual ~StyleClassifier() = default;
    virtual StyleDistribution classify(const Tensor& image) const = 0;
    virtual std::string id() const = 0;
};

class ClipStyleClassifier : public StyleClassifier {
public:
    ClipStyleClassifier(std::vector<std::string> class_names, const EmbeddingProvider& provider,
                        double temperature = 100.0);
    StyleDistribution classify(const Tensor& image) const override;
    std::string id() const override { return "clip"; }

private:
    std::vector<std::string> class_names_;
    const EmbeddingProvider& provider_;
    double temperature_;
};

class KMeansStyleClassifier : public StyleClassifier {
public:
    KMeansStyleClassifier(ClusterSet clusters, const EmbeddingProvider& provider,
                          double epsilon = 1e-8);
    StyleDistribution classify(const Tensor& image) const override;
    std::string id() const override;
    const ClusterSet& clusters() const { return clusters_; }

private:
    ClusterSet clusters_;
    const EmbeddingProvider& provider_;
    double epsilon_;
};

class GanStyleClassifier : public StyleClassifier {
public:
    explicit GanStyleClassifier(const StyleHead& head) : head_(head) {}
    StyleDistribution classify(const Tensor& image) const override { return gan_classify(image, head_); }
    std::string id() const override { return "dcgan"; }

private:
    const StyleHead& head_;
};

// Fixed-output classifier for tests and ablations.
class ConstantStyleClassifier : public StyleClassifier {
public:
    explicit ConstantStyleClassifier(StyleDistribution dist) : dist_(std::move(dist)) {}
    StyleDistribution classify(const Tensor&) const override { return dist_; }
    std::string id() const override { return "constant"; }

private:
    StyleDistribution dist_;
};

}  // namespace creadiff
