#include "creadiff/classifiers.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "creadiff/errors.hpp"

namespace creadiff {

void StyleDistribution::validate(double tol) const {
    if (probs.empty()) throw DomainError("empty style distribution");
    if (!labels.empty() && labels.size() != probs.size()) {
        throw ShapeError("style distribution labels/probs length mismatch");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (!(p > 0.0)) throw DomainError("style distribution entry not strictly positive");
        sum += p;
    }
    if (std::abs(sum - 1.0) > tol) {
        throw DomainError("style distribution sums to " + std::to_string(sum));
    }
}

int StyleDistribution::argmax() const {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<double> ClusterSet::center(int i) const {
    std::vector<double> c(static_cast<std::size_t>(dim()));
    for (int j = 0; j < dim(); ++j) c[static_cast<std::size_t>(j)] = centers.at2(i, j);
    return c;
}

void ClusterSet::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "creadiff-clusters v1\n";
    out << "d=" << dim() << " k=" << k() << " source=" << (source == ClusterSource::text ? "text" : "image")
        << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", inertia);
    out << "iterations=" << iterations << " inertia=" << buf << "\n";
    for (int i = 0; i < k(); ++i) {
        for (int j = 0; j < dim(); ++j) {
            std::snprintf(buf, sizeof buf, "%a", centers.at2(i, j));
            out << buf << (j + 1 == dim() ? "" : " ");
        }
        out << "\n";
    }
}

ClusterSet ClusterSet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string magic, version;
    in >> magic >> version;
    if (magic != "creadiff-clusters" || version != "v1") {
        throw IoError(path + ": not a creadiff-clusters v1 file");
    }
    std::string d_kv, k_kv, src_kv, it_kv, inertia_kv;
    in >> d_kv >> k_kv >> src_kv >> it_kv >> inertia_kv;
    auto value_of = [&](const std::string& kv, const char* key) {
        const std::string prefix = std::string(key) + "=";
        if (kv.rfind(prefix, 0) != 0) throw IoError(path + ": expected " + prefix + "..., got " + kv);
        return kv.substr(prefix.size());
    };
    const int d = std::stoi(value_of(d_kv, "d"));
    const int k = std::stoi(value_of(k_kv, "k"));
    const std::string src = value_of(src_kv, "source");
    ClusterSet cs;
    cs.source = src == "text" ? ClusterSource::text : ClusterSource::image;
    cs.iterations = std::stoi(value_of(it_kv, "iterations"));
    cs.inertia = std::strtod(value_of(inertia_kv, "inertia").c_str(), nullptr);
    cs.centers = Tensor({k, d});
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < d; ++j) {
            std::string tok;
            if (!(in >> tok)) throw IoError(path + ": truncated center data");
            cs.centers.at2(i, j) = std::strtod(tok.c_str(), nullptr);
        }
    }
    return cs;
}

namespace {

double sq_distance(const std::vector<double>& a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

// Softmax with a floor so extreme score gaps (e.g. the 1/eps pole when an
// embedding sits on a cluster center) cannot underflow an entry to exact zero.
std::vector<double> softmax_positive(const std::vector<double>& scores) {
    std::vector<double> p = softmax(scores);
    double sum = 0.0;
    for (double& v : p) {
        if (v < 1e-300) v = 1e-300;
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

}  // namespace

ClusterSet fit_kmeans(const std::vector<std::vector<double>>& points, int k, Rng& rng,
                      int max_iterations) {
    if (points.empty()) throw ConfigError("fit_kmeans: no points");
    const std::size_t d = points[0].size();
    for (const auto& p : points) {
        if (p.size() != d) throw ShapeError("fit_kmeans: inconsistent point dimensions");
    }
    std::set<std::vector<double>> distinct(points.begin(), points.end());
    if (k < 1 || static_cast<std::size_t>(k) > distinct.size()) {
        throw ConfigError("fit_kmeans: k = " + std::to_string(k) + " exceeds " +
                          std::to_string(distinct.size()) + " distinct points");
    }
    const std::size_t n = points.size();

    // k-means++ seeding.
    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<std::size_t>(k));
    centers.push_back(points[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))]);
    std::vector<double> d2(n, 0.0);
    while (centers.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, sq_distance(points[i], c.data(), d));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(points[pick]);
    }

    // Lloyd iterations; within-cluster sum of squares is nonincreasing.
    std::vector<int> assignment(n, -1);
    ClusterSet cs;
    int iters = 0;
    for (; iters < max_iterations; ++iters) {
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (int c = 0; c < k; ++c) {
                const double dist = sq_distance(points[i], centers[static_cast<std::size_t>(c)].data(), d);
                if (dist < best) {
                    best = dist;
                    best_c = c;
                }
            }
            if (assignment[i] != best_c) {
                assignment[i] = best_c;
                changed = true;
            }
            inertia += best;
        }
        cs.inertia_history.push_back(inertia);
        cs.inertia = inertia;
        if (!changed && iters > 0) break;

        std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(d, 0.0));
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assignment[i]);
            ++counts[c];
            for (std::size_t j = 0; j < d; ++j) sums[c][j] += points[i][j];
        }
        for (int c = 0; c < k; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            if (counts[cc] == 0) {
                // Reseed an empty cluster at the point farthest from its center.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dist = sq_distance(
                        points[i], centers[static_cast<std::size_t>(assignment[i])].data(), d);
                    if (dist > far_d) {
                        far_d = dist;
                        far = i;
                    }
                }
                centers[cc] = points[far];
                continue;
            }
            for (std::size_t j = 0; j < d; ++j) centers[cc][j] = sums[cc][j] / static_cast<double>(counts[cc]);
        }
    }

    cs.iterations = iters;
    cs.centers = Tensor({k, static_cast<int>(d)});
    for (int c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) cs.centers.at2(c, static_cast<int>(j)) = centers[static_cast<std::size_t>(c)][j];
    for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) {
            if (sq_distance(cs.center(a), cs.center(b).data(), d) == 0.0) {
                throw NumericError("fit_kmeans produced coincident centers");
            }
        }
    }
    return cs;
}

StyleDistribution clip_classify(const Tensor& x0, const std::vector<std::string>& class_names,
                                const EmbeddingProvider& provider, double temperature) {
    if (class_names.size() < 2) throw ConfigError("clip_classify needs at least 2 class names");
    if (!(temperature > 0.0)) throw ConfigError("clip_classify temperature must be > 0");
    std::vector<double> img = provider.embed_image(x0);
    const double img_norm = l2_norm(img);
    if (img_norm == 0.0) throw NumericError("zero-norm image embedding");
    for (double& v : img) v /= img_norm;
    std::vector<double> scores(class_names.size());
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        std::vector<double> txt = provider.embed_text(class_names[i]);
        const double txt_norm = l2_norm(txt);
        scores[i] = temperature * dot(img, txt) / txt_norm;
    }
    StyleDistribution dist{softmax_positive(scores), class_names};
    dist.validate();
    return dist;
}

StyleDistribution kmeans_classify(const Tensor& x0, const ClusterSet& clusters,
                                  const EmbeddingProvider& provider, double epsilon) {
    if (!(epsilon > 0.0)) throw ConfigError("kmeans_classify epsilon must be > 0");
    const std::vector<double> e = provider.embed_image(x0);
    if (static_cast<int>(e.size()) != clusters.dim()) {
        throw ShapeError("embedding dim " + std::to_string(e.size()) + " != cluster dim " +
                         std::to_string(clusters.dim()));
    }
    std::vector<double> scores(static_cast<std::size_t>(clusters.k()));
    std::vector<std::string> labels(static_cast<std::size_t>(clusters.k()));
    for (int i = 0; i < clusters.k(); ++i) {
        const double dist = euclidean_distance(e, clusters.center(i));
        scores[static_cast<std::size_t>(i)] = 1.0 / (dist + epsilon);
        labels[static_cast<std::size_t>(i)] = "cluster-" + std::to_string(i);
    }
    StyleDistribution dist{softmax_positive(scores), std::move(labels)};
    dist.validate();
    return dist;
}

StyleDistribution gan_classify(const Tensor& x0, const StyleHead& head) {
    if (x0.ndim() != 4 || x0.dim(0) != 1) {
        throw ShapeError("gan_classify expects a single (1, H, W, C) image, got " + x0.shape_str());
    }
    if (x0.dim(1) != head.expected_image_dim() || x0.dim(2) != head.expected_image_dim()) {
        throw ShapeError("image is " + x0.shape_str() + " but the head expects " +
                         std::to_string(head.expected_image_dim()) + "x" +
                         std::to_string(head.expected_image_dim()) +
                         "; resize explicitly before classifying");
    }
    const std::vector<double> logits = head.style_logits(x0);
    StyleDistribution dist{softmax_positive(logits), head.class_labels()};
    dist.validate();
    return dist;
}

ClipStyleClassifier::ClipStyleClassifier(std::vector<std::string> class_names,
                                         const EmbeddingProvider& provider, double temperature)
    : class_names_(std::move(class_names)), provider_(provider), temperature_(temperature) {
    if (class_names_.size() < 2) throw ConfigError("ClipStyleClassifier needs at least 2 class names");
}

StyleDistribution ClipStyleClassifier::classify(const Tensor& image) const {
    return clip_classify(image, class_names_, provider_, temperature_);
}

KMeansStyleClassifier::KMeansStyleClassifier(ClusterSet clusters, const EmbeddingProvider& provider,
                                             double epsilon)
    : clusters_(std::move(clusters)), provider_(provider), epsilon_(epsilon) {}

StyleDistribution KMeansStyleClassifier::classify(const Tensor& image) const {
    return kmeans_classify(image, clusters_, provider_, epsilon_);
}

std::string KMeansStyleClassifier::id() const {
    return clusters_.source == ClusterSource::text ? "kmeans_text" : "kmeans_image";
}

}  // namespace creadiff
