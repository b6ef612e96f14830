#pragma once

#include <map>
#include <string>
#include <vector>

#include "creadiff/classifiers.hpp"
#include "creadiff/tensor.hpp"

namespace creadiff {

// The uniform target U with entries 1/N.
struct UniformTarget {
    int n;
    explicit UniformTarget(int n_classes) : n(n_classes) {
        if (n < 2) throw DomainError("uniform target needs N >= 2");
    }
    double entry() const { return 1.0 / static_cast<double>(n); }
};

struct RewardRecord {
    double raw_reward = 0.0;          // -CE(C(x0), U); bounded above by -ln N
    double normalized_advantage = 0.0;
    std::string prompt_key;
    std::string classifier_id;
};

// CE(dist, U) = -(1/N) sum_i ln p_i. Minimum ln N, attained iff uniform.
double cross_entropy_to_uniform(const StyleDistribution& dist);

RewardRecord style_ambiguity_reward(const Tensor& x0, const StyleClassifier& classifier,
                                    const std::string& prompt_key = "");

// Per-prompt running reward statistics (Welford). Single-writer: updates must
// be serialized; reads of a settled snapshot are safe anywhere.
class RunningPromptStats {
public:
    void update(const std::string& prompt_key, double reward);
    double mean(const std::string& prompt_key) const;
    double stddev(const std::string& prompt_key) const;  // population
    std::size_t count(const std::string& prompt_key) const;

private:
    struct Entry {
        std::size_t n = 0;
        double mean = 0.0;
        double m2 = 0.0;
    };
    std::map<std::string, Entry> stats_;
};

// Folds the batch into the running stats, then sets each record's advantage
// to (raw - mean[prompt]) / (std[prompt] + 1e-8).
void normalize_advantages(std::vector<RewardRecord>& records, RunningPromptStats& stats);

}  // namespace creadiff
