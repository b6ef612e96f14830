#include "creadiff/embeddings.hpp"

#include <cmath>

#include "creadiff/errors.hpp"

namespace creadiff {

ToyEmbeddingProvider::ToyEmbeddingProvider(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 1) throw ConfigError("embedding dim must be >= 1");
    Rng rng(seed ^ 0x70726f6a656374u);
    projection_.resize(static_cast<std::size_t>(dim) * kNumStats);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kNumStats));
    for (double& v : projection_) v = rng.normal(0.0, scale);
}

const Tensor& ToyEmbeddingProvider::as_single_image(const Tensor& image) {
    if (image.ndim() != 4 || image.dim(0) != 1) {
        throw ShapeError("embedder expects a single (1, H, W, C) image, got " + image.shape_str());
    }
    if (image.dim(3) != 3) {
        throw ShapeError("embedder expects 3 channels, got " + image.shape_str());
    }
    return image;
}

// 24 smooth statistics: per-channel mean (3), per-channel second moment (3),
// per-quadrant per-channel mean (12), per-channel mean squared horizontal and
// vertical finite differences (6).
std::vector<double> ToyEmbeddingProvider::image_stats(const Tensor& image) const {
    const Tensor& img = as_single_image(image);
    const int H = img.dim(1), W = img.dim(2);
    std::vector<double> s(kNumStats, 0.0);
    const double inv_n = 1.0 / static_cast<double>(H * W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = img.at(0, y, x, c);
                s[static_cast<std::size_t>(c)] += v * inv_n;
                s[static_cast<std::size_t>(3 + c)] += v * v * inv_n;
                const int quad = (y >= H / 2 ? 2 : 0) + (x >= W / 2 ? 1 : 0);
                s[static_cast<std::size_t>(6 + quad * 3 + c)] += v * 4.0 * inv_n;
            }
        }
    }
    const double inv_h = W > 1 ? 1.0 / static_cast<double>(H * (W - 1)) : 0.0;
    const double inv_v = H > 1 ? 1.0 / static_cast<double>((H - 1) * W) : 0.0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < 3; ++c) {
                if (x + 1 < W) {
                    const double d = img.at(0, y, x + 1, c) - img.at(0, y, x, c);
                    s[static_cast<std::size_t>(18 + c)] += d * d * inv_h;
                }
                if (y + 1 < H) {
                    const double d = img.at(0, y + 1, x, c) - img.at(0, y, x, c);
                    s[static_cast<std::size_t>(21 + c)] += d * d * inv_v;
                }
            }
        }
    }
    return s;
}

void ToyEmbeddingProvider::image_stats_backward(const Tensor& image,
                                                const std::vector<double>& g,
                                                Tensor& grad_image) const {
    const Tensor& img = as_single_image(image);
    const int H = img.dim(1), W = img.dim(2);
    const double inv_n = 1.0 / static_cast<double>(H * W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = img.at(0, y, x, c);
                const int quad = (y >= H / 2 ? 2 : 0) + (x >= W / 2 ? 1 : 0);
                grad_image.at(0, y, x, c) += g[static_cast<std::size_t>(c)] * inv_n +
                                             g[static_cast<std::size_t>(3 + c)] * 2.0 * v * inv_n +
                                             g[static_cast<std::size_t>(6 + quad * 3 + c)] * 4.0 * inv_n;
            }
        }
    }
    const double inv_h = W > 1 ? 1.0 / static_cast<double>(H * (W - 1)) : 0.0;
    const double inv_v = H > 1 ? 1.0 / static_cast<double>((H - 1) * W) : 0.0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < 3; ++c) {
                if (x + 1 < W) {
                    const double d = img.at(0, y, x + 1, c) - img.at(0, y, x, c);
                    const double gd = g[static_cast<std::size_t>(18 + c)] * 2.0 * d * inv_h;
                    grad_image.at(0, y, x + 1, c) += gd;
                    grad_image.at(0, y, x, c) -= gd;
                }
                if (y + 1 < H) {
                    const double d = img.at(0, y + 1, x, c) - img.at(0, y, x, c);
                    const double gd = g[static_cast<std::size_t>(21 + c)] * 2.0 * d * inv_v;
                    grad_image.at(0, y + 1, x, c) += gd;
                    grad_image.at(0, y, x, c) -= gd;
                }
            }
        }
    }
}

std::vector<double> ToyEmbeddingProvider::embed_image(const Tensor& image) const {
    const std::vector<double> s = image_stats(image);
    std::vector<double> e(static_cast<std::size_t>(dim_), 0.0);
    for (int i = 0; i < dim_; ++i) {
        const double* row = projection_.data() + static_cast<std::size_t>(i) * kNumStats;
        double acc = 0.0;
        for (int j = 0; j < kNumStats; ++j) acc += row[j] * s[static_cast<std::size_t>(j)];
        e[static_cast<std::size_t>(i)] = acc;
    }
    return e;
}

Tensor ToyEmbeddingProvider::embed_image_backward(const Tensor& image,
                                                  const std::vector<double>& grad_embedding) const {
    if (static_cast<int>(grad_embedding.size()) != dim_) {
        throw ShapeError("embedding gradient has wrong dimension");
    }
    std::vector<double> grad_stats(kNumStats, 0.0);
    for (int i = 0; i < dim_; ++i) {
        const double* row = projection_.data() + static_cast<std::size_t>(i) * kNumStats;
        for (int j = 0; j < kNumStats; ++j) grad_stats[static_cast<std::size_t>(j)] += grad_embedding[static_cast<std::size_t>(i)] * row[j];
    }
    Tensor grad_image = Tensor::zeros_like(image);
    image_stats_backward(image, grad_stats, grad_image);
    return grad_image;
}

std::vector<double> ToyEmbeddingProvider::embed_text(const std::string& text) const {
    Rng rng(Rng::hash_string(text) ^ seed_);
    std::vector<double> e(static_cast<std::size_t>(dim_));
    for (double& v : e) v = rng.normal();
    const double n = l2_norm(e);
    for (double& v : e) v /= n;
    return e;
}

}  // namespace creadiff
