#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "creadiff/classifiers.hpp"
#include "creadiff/prompts.hpp"

using namespace creadiff;

namespace {

Tensor random_image(Rng& rng, int dim = 8) {
    Tensor img({1, dim, dim, 3});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.uniform(-1.0, 1.0);
    return img;
}

// Embeds every class name to a fixed vector; lets tests pin similarities.
class TableProvider : public EmbeddingProvider {
public:
    TableProvider(int d) : d_(d) {}
    int dim() const override { return d_; }
    std::vector<double> embed_image(const Tensor&) const override { return image_embedding; }
    std::vector<double> embed_text(const std::string& s) const override { return table.at(s); }
    std::vector<double> image_embedding;
    std::map<std::string, std::vector<double>> table;

private:
    int d_;
};

}  // namespace

TEST_SUITE("clip_classify") {
    TEST_CASE("equal similarities give the uniform distribution") {
        TableProvider p(2);
        p.image_embedding = {1.0, 0.0};
        p.table["a"] = {0.5, 0.5};
        p.table["b"] = {0.5, -0.5};  // same cosine with (1,0)
        p.table["c"] = {0.5, 0.5};
        Rng rng(1);
        const auto d = clip_classify(random_image(rng), {"a", "b", "c"}, p, 100.0);
        for (double v : d.probs) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-9));
    }

    TEST_CASE("temperature-scaled scores (30, 10) give the hand-computed softmax") {
        // cos = 0.3 and 0.1 against the image direction, scaled by 100.
        TableProvider p(2);
        p.image_embedding = {2.0, 0.0};  // normalized internally
        const double a1 = std::acos(0.3), a2 = std::acos(0.1);
        p.table["hot"] = {std::cos(a1), std::sin(a1)};
        p.table["cold"] = {std::cos(a2), std::sin(a2)};
        Tensor img({1, 2, 2, 3}, 0.0);
        const auto d = clip_classify(img, {"hot", "cold"}, p, 100.0);
        CHECK(d.probs[0] == doctest::Approx(0.99999999794).epsilon(1e-9));
        CHECK(d.probs[1] == doctest::Approx(2.0611536e-9).epsilon(1e-3));
    }

    TEST_CASE("output ordering follows class_names and permutation equivariance holds") {
        ToyEmbeddingProvider provider(16, 3);
        Rng rng(4);
        const Tensor img = random_image(rng);
        const std::vector<std::string> names = {"ukiyo-e", "baroque", "pop-art", "cubism"};
        const auto d1 = clip_classify(img, names, provider);
        const std::vector<std::string> perm = {"pop-art", "ukiyo-e", "cubism", "baroque"};
        const auto d2 = clip_classify(img, perm, provider);
        CHECK(d1.probs[0] == doctest::Approx(d2.probs[1]).epsilon(1e-12));
        CHECK(d1.probs[1] == doctest::Approx(d2.probs[3]).epsilon(1e-12));
        CHECK(d1.probs[2] == doctest::Approx(d2.probs[0]).epsilon(1e-12));
        CHECK(d1.probs[3] == doctest::Approx(d2.probs[2]).epsilon(1e-12));
        CHECK(d1.labels[d1.argmax()] == d2.labels[d2.argmax()]);
    }

    TEST_CASE("config errors") {
        ToyEmbeddingProvider provider(8, 3);
        Rng rng(4);
        const Tensor img = random_image(rng);
        CHECK_THROWS_AS(clip_classify(img, {}, provider), ConfigError);
        CHECK_THROWS_AS(clip_classify(img, {"only-one"}, provider), ConfigError);
        CHECK_THROWS_AS(clip_classify(img, {"a", "b"}, provider, 0.0), ConfigError);
    }
}

TEST_SUITE("fit_kmeans") {
    TEST_CASE("4-point 2-cluster instance recovers the exhaustive optimum") {
        const std::vector<std::vector<double>> pts = {{0, 0}, {0, 0.1}, {10, 10}, {10, 10.1}};
        Rng rng(8);
        const auto cs = fit_kmeans(pts, 2, rng);
        std::vector<std::vector<double>> centers = {cs.center(0), cs.center(1)};
        std::sort(centers.begin(), centers.end());
        CHECK(centers[0][0] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(centers[0][1] == doctest::Approx(0.05).epsilon(1e-12));
        CHECK(centers[1][0] == doctest::Approx(10.0).epsilon(1e-12));
        CHECK(centers[1][1] == doctest::Approx(10.05).epsilon(1e-12));
        // Exhaustive 2-partition oracle: best within-cluster sum of squares.
        double best = 1e300;
        for (int mask = 1; mask < 15; ++mask) {
            std::vector<std::vector<double>> g1, g2;
            for (int i = 0; i < 4; ++i) ((mask >> i) & 1 ? g1 : g2).push_back(pts[static_cast<std::size_t>(i)]);
            if (g1.empty() || g2.empty()) continue;
            auto wcss = [](const std::vector<std::vector<double>>& g) {
                std::vector<double> c(2, 0.0);
                for (const auto& p : g) {
                    c[0] += p[0];
                    c[1] += p[1];
                }
                c[0] /= g.size();
                c[1] /= g.size();
                double s = 0.0;
                for (const auto& p : g) s += (p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1]);
                return s;
            };
            best = std::min(best, wcss(g1) + wcss(g2));
        }
        CHECK(cs.inertia == doctest::Approx(best).epsilon(1e-12));
    }

    TEST_CASE("k equal to point count returns the points") {
        const std::vector<std::vector<double>> pts = {{1, 2}, {3, 4}, {5, 6}};
        Rng rng(9);
        const auto cs = fit_kmeans(pts, 3, rng);
        std::vector<std::vector<double>> centers = {cs.center(0), cs.center(1), cs.center(2)};
        std::sort(centers.begin(), centers.end());
        CHECK(centers[0][0] == 1.0);
        CHECK(centers[1][0] == 3.0);
        CHECK(centers[2][0] == 5.0);
        CHECK(cs.inertia == doctest::Approx(0.0));
    }

    TEST_CASE("duplicated dataset converges to the same centers") {
        const std::vector<std::vector<double>> pts = {{0, 0}, {0, 0.1}, {10, 10}, {10, 10.1}};
        std::vector<std::vector<double>> doubled = pts;
        doubled.insert(doubled.end(), pts.begin(), pts.end());
        Rng r1(8), r2(8);
        auto a = fit_kmeans(pts, 2, r1);
        auto b = fit_kmeans(doubled, 2, r2);
        std::vector<std::vector<double>> ca = {a.center(0), a.center(1)};
        std::vector<std::vector<double>> cb = {b.center(0), b.center(1)};
        std::sort(ca.begin(), ca.end());
        std::sort(cb.begin(), cb.end());
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) CHECK(ca[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] == doctest::Approx(cb[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]).epsilon(1e-12));
    }

    TEST_CASE("k greater than distinct points is a config error") {
        const std::vector<std::vector<double>> pts = {{1, 1}, {1, 1}, {2, 2}};
        Rng rng(3);
        CHECK_THROWS_AS(fit_kmeans(pts, 3, rng), ConfigError);
        Rng rng2(3);
        CHECK_NOTHROW(fit_kmeans(pts, 2, rng2));
    }

    TEST_CASE("Lloyd inertia is monotone nonincreasing on random instances") {
        Rng meta(15);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<std::vector<double>> pts;
            const int n = 40 + static_cast<int>(meta.uniform_int(0, 40));
            for (int i = 0; i < n; ++i) pts.push_back({meta.normal(), meta.normal(), meta.normal()});
            Rng rng(100 + trial);
            const auto cs = fit_kmeans(pts, 5, rng);
            for (std::size_t i = 1; i < cs.inertia_history.size(); ++i) {
                CHECK(cs.inertia_history[i] <= cs.inertia_history[i - 1] + 1e-12);
            }
        }
    }

    TEST_CASE("deterministic given the seed") {
        Rng meta(16);
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 30; ++i) pts.push_back({meta.normal(), meta.normal()});
        Rng r1(5), r2(5);
        const auto a = fit_kmeans(pts, 4, r1);
        const auto b = fit_kmeans(pts, 4, r2);
        for (std::size_t i = 0; i < a.centers.size(); ++i) CHECK(a.centers[i] == b.centers[i]);
    }
}

TEST_SUITE("kmeans_classify") {
    TEST_CASE("singleton cluster set gives probability one") {
        ToyEmbeddingProvider provider(8, 3);
        ClusterSet cs;
        cs.centers = Tensor({1, 8}, 0.1);
        Rng rng(2);
        const auto d = kmeans_classify(random_image(rng), cs, provider);
        CHECK(d.probs.size() == 1);
        CHECK(d.probs[0] == doctest::Approx(1.0));
    }

    TEST_CASE("equidistant centers split evenly") {
        TableProvider provider(2);
        provider.image_embedding = {0.0, 0.0};
        ClusterSet cs;
        cs.centers = Tensor({2, 2});
        cs.centers.at2(0, 0) = 1.0;
        cs.centers.at2(1, 0) = -1.0;
        Tensor img({1, 2, 2, 3}, 0.0);
        const auto d = kmeans_classify(img, cs, provider);
        CHECK(d.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(d.probs[1] == doctest::Approx(0.5).epsilon(1e-12));
    }

    TEST_CASE("distances (1, 2) give softmax(1, 0.5)") {
        TableProvider provider(1);
        provider.image_embedding = {0.0};
        ClusterSet cs;
        cs.centers = Tensor({2, 1});
        cs.centers.at2(0, 0) = 1.0;
        cs.centers.at2(1, 0) = 2.0;
        Tensor img({1, 2, 2, 3}, 0.0);
        const auto d = kmeans_classify(img, cs, provider, 1e-12);
        CHECK(d.probs[0] == doctest::Approx(0.6224593).epsilon(1e-5));
        CHECK(d.probs[1] == doctest::Approx(0.3775407).epsilon(1e-5));
    }

    TEST_CASE("continuous at center coincidence: no NaN or inf") {
        TableProvider provider(2);
        provider.image_embedding = {0.3, -0.4};
        ClusterSet cs;
        cs.centers = Tensor({2, 2});
        cs.centers.at2(0, 0) = 0.3;
        cs.centers.at2(0, 1) = -0.4;  // exactly the embedding
        cs.centers.at2(1, 0) = 5.0;
        Tensor img({1, 2, 2, 3}, 0.0);
        const auto d = kmeans_classify(img, cs, provider);
        CHECK(std::isfinite(d.probs[0]));
        CHECK(std::isfinite(d.probs[1]));
        CHECK(d.probs[0] > 0.999);  // epsilon-stabilized pole dominates
        d.validate();
    }

    TEST_CASE("dimension mismatch is a shape error") {
        ToyEmbeddingProvider provider(8, 3);
        ClusterSet cs;
        cs.centers = Tensor({2, 5}, 0.1);
        Rng rng(2);
        CHECK_THROWS_AS(kmeans_classify(random_image(rng), cs, provider), ShapeError);
    }
}

TEST_SUITE("classifier properties") {
    TEST_CASE("outputs are strictly positive and sum to one") {
        ToyEmbeddingProvider provider(16, 7);
        Rng rng(21);
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 20; ++i) {
            pts.push_back(provider.embed_image(random_image(rng)));
        }
        Rng krng(3);
        auto cs = fit_kmeans(pts, 5, krng);
        cs.source = ClusterSource::image;
        for (int i = 0; i < 50; ++i) {
            const Tensor img = random_image(rng);
            for (const auto& d : {clip_classify(img, wikiart_styles(), provider),
                                  kmeans_classify(img, cs, provider)}) {
                double sum = 0.0;
                for (double p : d.probs) {
                    CHECK(p > 0.0);
                    sum += p;
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
            }
        }
    }
}

TEST_SUITE("cluster set io") {
    TEST_CASE("save/load round-trips bit-exactly") {
        Rng meta(33);
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 12; ++i) pts.push_back({meta.normal(), meta.normal(), meta.normal()});
        Rng rng(6);
        auto cs = fit_kmeans(pts, 3, rng);
        cs.source = ClusterSource::image;
        const auto path = std::filesystem::temp_directory_path() / "creadiff_clusters_test.txt";
        cs.save(path.string());
        const auto loaded = ClusterSet::load(path.string());
        CHECK(loaded.k() == cs.k());
        CHECK(loaded.dim() == cs.dim());
        CHECK(loaded.source == cs.source);
        CHECK(loaded.iterations == cs.iterations);
        CHECK(loaded.inertia == cs.inertia);
        for (std::size_t i = 0; i < cs.centers.size(); ++i) CHECK(loaded.centers[i] == cs.centers[i]);
        std::filesystem::remove(path);
    }
}

TEST_SUITE("toy embedding provider") {
    TEST_CASE("deterministic and fixed-dimension") {
        ToyEmbeddingProvider p(32, 17);
        Rng rng(2);
        const Tensor img = random_image(rng);
        const auto e1 = p.embed_image(img);
        const auto e2 = p.embed_image(img);
        CHECK(e1.size() == 32);
        for (std::size_t i = 0; i < e1.size(); ++i) CHECK(e1[i] == e2[i]);
        const auto t1 = p.embed_text("ukiyo-e");
        const auto t2 = p.embed_text("ukiyo-e");
        const auto t3 = p.embed_text("baroque");
        CHECK(l2_norm(t1) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i] == t2[i]);
        CHECK(std::abs(cosine_similarity(t1, t3)) < 0.9);
    }

    TEST_CASE("image embedding backward matches finite differences") {
        ToyEmbeddingProvider p(6, 5);
        Rng rng(9);
        Tensor img = random_image(rng, 4);
        std::vector<double> ge(6);
        for (auto& v : ge) v = rng.normal();
        const Tensor grad = p.embed_image_backward(img, ge);
        const double h = 1e-6;
        for (std::size_t i = 0; i < img.size(); i += 7) {
            Tensor ip = img, im = img;
            ip[i] += h;
            im[i] -= h;
            const double fp = dot(p.embed_image(ip), ge);
            const double fm = dot(p.embed_image(im), ge);
            CHECK(grad[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
        }
    }
}
