#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/learner.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

/// Per-client utility/duration pair consumed by the selectors, plus the
/// loss statistics needed to recompute utility at window boundaries.
struct Feedback {
    std::string client_id;
    double utility = 0.0;
    double duration = 0.0;           // seconds, > 0 once participated
    long last_round = -1;            // -1: never participated
    std::size_t sample_count = 0;
    double sq_loss_sum = 0.0;        // sum of L(k)^2 from the last report
};

enum class PolicyKind { random, utility_greedy, dynamicfl };

struct SelectionPolicy {
    PolicyKind kind = PolicyKind::random;
    int participants = 10;           // K
    double epsilon = 0.1;            // exploration fraction
    double preferred_duration = 0.0; // T; 0 = calibrate from warm-up
    double penalty_exponent = 2.0;   // alpha
};

/// Utility of one client: |B|*F * sqrt(mean L^2), times the slow-client
/// penalty (T*F/t)^alpha applied only when t exceeds the preferred
/// duration T. F=1 recovers the baseline utility.
inline double compute_utility(std::size_t sample_count, double sq_loss_sum, double duration,
                              double bw_factor, const SelectionPolicy& policy) {
    if (duration <= 0.0) throw InvalidInput("duration must be > 0");
    if (bw_factor <= 0.0) throw InvalidInput("bandwidth factor must be > 0");
    const double n = static_cast<double>(sample_count);
    double util = n * bw_factor * std::sqrt(sq_loss_sum / std::max(n, 1.0));
    const double t_pref = policy.preferred_duration;
    if (t_pref > 0.0 && t_pref < duration)
        util *= std::pow(t_pref * bw_factor / duration, policy.penalty_exponent);
    return util;
}

inline double compute_utility(const LocalTrainReport& report, double duration, double bw_factor,
                              const SelectionPolicy& policy) {
    double sq = 0.0;
    for (double l : report.per_sample_losses) sq += l * l;
    return compute_utility(report.sample_count, sq, duration, bw_factor, policy);
}

/// Uniform sample of K clients without replacement, deterministic in rng state.
inline std::set<std::string> select_random(const std::vector<std::string>& population, int k,
                                           Rng& rng) {
    if (k > static_cast<int>(population.size())) throw CohortTooLarge{};
    std::vector<std::string> pool(population.begin(), population.end());
    std::sort(pool.begin(), pool.end());
    rng.shuffle(pool);
    return {pool.begin(), pool.begin() + k};
}

/// Exploitation/exploration split: ceil((1-eps)K) top-utility observed
/// clients (ties to ascending id), remainder drawn uniformly from
/// never-selected clients, then least-recently-selected ones.
inline std::set<std::string> select_greedy(const std::map<std::string, Feedback>& feedback,
                                           const std::vector<std::string>& population,
                                           const SelectionPolicy& policy, Rng& rng) {
    const int k = policy.participants;
    if (k > static_cast<int>(population.size())) throw CohortTooLarge{};

    std::vector<const Feedback*> observed;
    std::vector<std::string> fresh;  // never participated
    for (const auto& id : population) {
        auto it = feedback.find(id);
        if (it != feedback.end() && it->second.last_round >= 0)
            observed.push_back(&it->second);
        else
            fresh.push_back(id);
    }
    std::sort(observed.begin(), observed.end(), [](const Feedback* a, const Feedback* b) {
        if (a->utility != b->utility) return a->utility > b->utility;
        return a->client_id < b->client_id;
    });
    std::sort(fresh.begin(), fresh.end());

    const int n_exploit = static_cast<int>(std::ceil((1.0 - policy.epsilon) * k));
    std::set<std::string> cohort;
    for (int i = 0; i < n_exploit && i < static_cast<int>(observed.size()); ++i)
        cohort.insert(observed[i]->client_id);

    // exploration: uniform over never-selected first
    rng.shuffle(fresh);
    for (const auto& id : fresh) {
        if (static_cast<int>(cohort.size()) >= k) break;
        cohort.insert(id);
    }
    // then least-recently-selected observed clients
    std::vector<const Feedback*> by_staleness = observed;
    std::sort(by_staleness.begin(), by_staleness.end(), [](const Feedback* a, const Feedback* b) {
        if (a->last_round != b->last_round) return a->last_round < b->last_round;
        return a->client_id < b->client_id;
    });
    for (const auto* f : by_staleness) {
        if (static_cast<int>(cohort.size()) >= k) break;
        cohort.insert(f->client_id);
    }
    return cohort;
}

} // namespace fedsim
