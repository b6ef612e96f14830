#include "creadiff/reward.hpp"

#include <cmath>

namespace creadiff {

double cross_entropy_to_uniform(const StyleDistribution& dist) {
    if (dist.probs.empty()) throw DomainError("cross_entropy_to_uniform: empty distribution");
    double s = 0.0;
    for (double p : dist.probs) {
        if (!(p > 0.0)) throw DomainError("cross_entropy_to_uniform: non-positive probability");
        s += std::log(p);
    }
    return -s / static_cast<double>(dist.probs.size());
}

RewardRecord style_ambiguity_reward(const Tensor& x0, const StyleClassifier& classifier,
                                    const std::string& prompt_key) {
    const StyleDistribution dist = classifier.classify(x0);
    if (dist.size() < 2) throw DomainError("style_ambiguity_reward needs N >= 2 classes");
    RewardRecord rec;
    rec.raw_reward = -cross_entropy_to_uniform(dist);
    rec.prompt_key = prompt_key;
    rec.classifier_id = classifier.id();
    if (!std::isfinite(rec.raw_reward)) throw NumericError("non-finite reward");
    return rec;
}

void RunningPromptStats::update(const std::string& prompt_key, double reward) {
    Entry& e = stats_[prompt_key];
    ++e.n;
    const double delta = reward - e.mean;
    e.mean += delta / static_cast<double>(e.n);
    e.m2 += delta * (reward - e.mean);
}

double RunningPromptStats::mean(const std::string& prompt_key) const {
    const auto it = stats_.find(prompt_key);
    return it == stats_.end() ? 0.0 : it->second.mean;
}

double RunningPromptStats::stddev(const std::string& prompt_key) const {
    const auto it = stats_.find(prompt_key);
    if (it == stats_.end() || it->second.n == 0) return 0.0;
    return std::sqrt(it->second.m2 / static_cast<double>(it->second.n));
}

std::size_t RunningPromptStats::count(const std::string& prompt_key) const {
    const auto it = stats_.find(prompt_key);
    return it == stats_.end() ? 0 : it->second.n;
}

void normalize_advantages(std::vector<RewardRecord>& records, RunningPromptStats& stats) {
    if (records.empty()) throw DomainError("normalize_advantages: empty batch");
    for (const RewardRecord& r : records) stats.update(r.prompt_key, r.raw_reward);
    for (RewardRecord& r : records) {
        r.normalized_advantage =
            (r.raw_reward - stats.mean(r.prompt_key)) / (stats.stddev(r.prompt_key) + 1e-8);
    }
}

}  // namespace creadiff
