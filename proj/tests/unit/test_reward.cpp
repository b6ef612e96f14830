#include <doctest.h>

#include <cmath>

#include "creadiff/reward.hpp"

using namespace creadiff;

namespace {

StyleDistribution dist_of(std::vector<double> probs) {
    StyleDistribution d;
    d.probs = std::move(probs);
    return d;
}

}  // namespace

TEST_SUITE("cross_entropy_to_uniform") {
    TEST_CASE("uniform over 27 classes gives ln 27") {
        StyleDistribution d = dist_of(std::vector<double>(27, 1.0 / 27.0));
        CHECK(cross_entropy_to_uniform(d) == doctest::Approx(std::log(27.0)).epsilon(1e-12));
        CHECK(cross_entropy_to_uniform(d) == doctest::Approx(3.29584).epsilon(1e-5));
    }

    TEST_CASE("two-class (0.9, 0.1) case") {
        CHECK(cross_entropy_to_uniform(dist_of({0.9, 0.1})) == doctest::Approx(1.20397).epsilon(1e-5));
    }

    TEST_CASE("bounded below by ln N with equality iff uniform") {
        Rng rng(12);
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 2 + static_cast<int>(rng.uniform_int(0, 30));
            std::vector<double> logits(static_cast<std::size_t>(n));
            for (auto& v : logits) v = rng.normal(0.0, 2.0);
            const auto d = dist_of(softmax(logits));
            const double ce = cross_entropy_to_uniform(d);
            CHECK(ce >= std::log(static_cast<double>(n)) - 1e-12);
        }
    }

    TEST_CASE("matches direct summation on random distributions") {
        Rng rng(13);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 2 + static_cast<int>(rng.uniform_int(0, 20));
            std::vector<double> logits(static_cast<std::size_t>(n));
            for (auto& v : logits) v = rng.normal();
            const auto probs = softmax(logits);
            double direct = 0.0;
            for (double p : probs) direct -= (1.0 / n) * std::log(p);
            CHECK(cross_entropy_to_uniform(dist_of(probs)) == doctest::Approx(direct).epsilon(1e-9));
        }
    }

    TEST_CASE("permutation invariance") {
        const auto a = dist_of({0.5, 0.3, 0.2});
        const auto b = dist_of({0.2, 0.5, 0.3});
        CHECK(cross_entropy_to_uniform(a) == doctest::Approx(cross_entropy_to_uniform(b)).epsilon(1e-15));
    }

    TEST_CASE("non-positive probabilities are a domain error") {
        CHECK_THROWS_AS(cross_entropy_to_uniform(dist_of({1.0, 0.0})), DomainError);
        CHECK_THROWS_AS(cross_entropy_to_uniform(dist_of({1.2, -0.2})), DomainError);
    }
}

TEST_SUITE("style_ambiguity_reward") {
    TEST_CASE("uniform classifier attains the -ln N bound") {
        ConstantStyleClassifier c(StyleDistribution{std::vector<double>(27, 1.0 / 27.0), {}});
        Tensor img({1, 2, 2, 3}, 0.0);
        const auto rec = style_ambiguity_reward(img, c, "p");
        CHECK(rec.raw_reward == doctest::Approx(-3.29584).epsilon(1e-5));
        CHECK(rec.classifier_id == "constant");
        CHECK(rec.prompt_key == "p");
    }

    TEST_CASE("two-class (0.9, 0.1) reward") {
        ConstantStyleClassifier c(StyleDistribution{{0.9, 0.1}, {}});
        Tensor img({1, 2, 2, 3}, 0.0);
        CHECK(style_ambiguity_reward(img, c).raw_reward == doctest::Approx(-1.20397).epsilon(1e-5));
    }

    TEST_CASE("reward strictly increases from p = 0.99 toward p = 0.5") {
        Tensor img({1, 2, 2, 3}, 0.0);
        double prev = -1e300;
        for (double p = 0.99; p >= 0.5; p -= 0.07) {
            ConstantStyleClassifier c(StyleDistribution{{p, 1.0 - p}, {}});
            const double r = style_ambiguity_reward(img, c).raw_reward;
            CHECK(r > prev);
            prev = r;
        }
    }
}

TEST_SUITE("normalize_advantages") {
    TEST_CASE("identical rewards give zero advantages") {
        RunningPromptStats stats;
        std::vector<RewardRecord> recs(4);
        for (auto& r : recs) {
            r.raw_reward = -2.0;
            r.prompt_key = "same";
        }
        normalize_advantages(recs, stats);
        for (const auto& r : recs) CHECK(r.normalized_advantage == doctest::Approx(0.0));
    }

    TEST_CASE("two-point batch gives (-1, +1) within guard tolerance") {
        RunningPromptStats stats;
        std::vector<RewardRecord> recs(2);
        recs[0].raw_reward = 1.0;
        recs[1].raw_reward = 3.0;
        recs[0].prompt_key = recs[1].prompt_key = "p";
        normalize_advantages(recs, stats);
        CHECK(recs[0].normalized_advantage == doctest::Approx(-1.0).epsilon(1e-7));
        CHECK(recs[1].normalized_advantage == doctest::Approx(1.0).epsilon(1e-7));
    }

    TEST_CASE("invariant to a constant shift of every reward of a prompt") {
        auto run = [](double shift) {
            RunningPromptStats stats;
            std::vector<RewardRecord> recs(3);
            const double base[3] = {0.5, 1.5, 2.5};
            for (int i = 0; i < 3; ++i) {
                recs[static_cast<std::size_t>(i)].raw_reward = base[i] + shift;
                recs[static_cast<std::size_t>(i)].prompt_key = "p";
            }
            normalize_advantages(recs, stats);
            return std::vector<double>{recs[0].normalized_advantage, recs[1].normalized_advantage,
                                       recs[2].normalized_advantage};
        };
        const auto a = run(0.0);
        const auto b = run(100.0);
        for (int i = 0; i < 3; ++i) CHECK(a[static_cast<std::size_t>(i)] == doctest::Approx(b[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }

    TEST_CASE("stats accumulate across batches per prompt") {
        RunningPromptStats stats;
        std::vector<RewardRecord> b1(2);
        b1[0] = {1.0, 0.0, "p", "c"};
        b1[1] = {3.0, 0.0, "p", "c"};
        normalize_advantages(b1, stats);
        CHECK(stats.count("p") == 2);
        std::vector<RewardRecord> b2(1);
        b2[0] = {2.0, 0.0, "p", "c"};
        normalize_advantages(b2, stats);
        CHECK(stats.count("p") == 3);
        CHECK(stats.mean("p") == doctest::Approx(2.0));
        CHECK(b2[0].normalized_advantage == doctest::Approx(0.0).epsilon(1e-6));
    }

    TEST_CASE("empty batch is rejected") {
        RunningPromptStats stats;
        std::vector<RewardRecord> empty;
        CHECK_THROWS_AS(normalize_advantages(empty, stats), DomainError);
    }
}
