#include <doctest.h>

#include <map>
#include <set>

#include "creadiff/prompts.hpp"

using namespace creadiff;

TEST_SUITE("compose_prompt") {
    TEST_CASE("literal composition is producible and well-formed") {
        Rng rng(1);
        bool found = false;
        for (int i = 0; i < 5000 && !found; ++i) {
            const auto p = compose_prompt(rng);
            if (p.text == "picture of an animal") found = true;
        }
        CHECK(found);
    }

    TEST_CASE("null prompts have empty text; composed prompts have both parts") {
        Rng rng(2);
        for (int i = 0; i < 2000; ++i) {
            const auto p = compose_prompt(rng);
            if (p.is_null) {
                CHECK(p.text.empty());
                CHECK(p.medium.empty());
                CHECK(p.subject.empty());
            } else {
                CHECK(!p.medium.empty());
                CHECK(!p.subject.empty());
                CHECK(p.text == p.medium + p.subject);
            }
        }
    }

    TEST_CASE("frequencies over 100k draws") {
        Rng rng(3);
        int nulls = 0;
        std::map<std::string, int> combos;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const auto p = compose_prompt(rng);
            if (p.is_null) {
                ++nulls;
            } else {
                ++combos[p.text];
            }
        }
        CHECK(combos.size() == 24);
        const double null_rate = static_cast<double>(nulls) / n;
        CHECK(null_rate > 0.095);
        CHECK(null_rate < 0.105);
        for (const auto& [text, count] : combos) {
            const double rate = static_cast<double>(count) / n;
            CHECK(rate > 0.0375 - 0.003);
            CHECK(rate < 0.0375 + 0.003);
        }
    }
}

TEST_SUITE("style registry") {
    TEST_CASE("27 exact names in stable order") {
        const auto& styles = wikiart_styles();
        CHECK(styles.size() == 27);
        CHECK(styles[0] == "contemporary-realism");
        CHECK(std::find(styles.begin(), styles.end(), "ukiyo-e") != styles.end());
        CHECK(std::find(styles.begin(), styles.end(), "baroque") != styles.end());
        CHECK(std::find(styles.begin(), styles.end(), "pop-art") != styles.end());
        CHECK(std::find(styles.begin(), styles.end(), "na-ve-art-primitivism") != styles.end());
        std::set<std::string> unique(styles.begin(), styles.end());
        CHECK(unique.size() == 27);
        // Order must be identical across calls.
        const auto& again = wikiart_styles();
        for (std::size_t i = 0; i < styles.size(); ++i) CHECK(styles[i] == again[i]);
    }
}

TEST_SUITE("balance_classes") {
    TEST_CASE("class of n with n_per_class n is a permutation of itself") {
        Rng rng(5);
        std::vector<std::vector<std::size_t>> classes = {{10, 11, 12, 13, 14}};
        const auto out = balance_classes(classes, 5, rng);
        CHECK(out.per_class[0].size() == 5);
        std::set<std::size_t> seen(out.per_class[0].begin(), out.per_class[0].end());
        CHECK(seen == std::set<std::size_t>({10, 11, 12, 13, 14}));
    }

    TEST_CASE("class of 3 oversampled to 7: every item at least twice, counting oracle") {
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            Rng rng(seed);
            const auto out = balance_classes({{1, 2, 3}}, 7, rng);
            CHECK(out.per_class[0].size() == 7);
            std::map<std::size_t, int> counts;
            for (auto v : out.per_class[0]) ++counts[v];
            CHECK(counts.size() == 3);
            for (const auto& [item, count] : counts) CHECK(count >= 2);
        }
    }

    TEST_CASE("all per-class counts equal n") {
        Rng rng(6);
        const auto out = balance_classes({{1, 2}, {3, 4, 5, 6, 7}, {8}}, 4, rng);
        for (const auto& cl : out.per_class) CHECK(cl.size() == 4);
        // Undersized classes keep every original item.
        std::set<std::size_t> c0(out.per_class[0].begin(), out.per_class[0].end());
        CHECK(c0 == std::set<std::size_t>({1, 2}));
    }

    TEST_CASE("empty class names the class in the error") {
        Rng rng(7);
        try {
            balance_classes({{1}, {}}, 3, rng);
            CHECK(false);
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("1") != std::string::npos);
        }
    }
}

TEST_SUITE("styled shapes corpus") {
    TEST_CASE("deterministic, in range, labeled") {
        const auto a = make_styled_shapes(2, 3, 8, 42);
        const auto b = make_styled_shapes(2, 3, 8, 42);
        CHECK(a.images.size() == 6);
        CHECK(a.labels.size() == 6);
        for (std::size_t i = 0; i < a.images.size(); ++i) {
            CHECK(a.images[i].min() >= -1.0);
            CHECK(a.images[i].max() <= 1.0);
            for (std::size_t j = 0; j < a.images[i].size(); ++j) CHECK(a.images[i][j] == b.images[i][j]);
        }
        CHECK(a.labels[0] == 0);
        CHECK(a.labels[5] == 1);
    }
}
