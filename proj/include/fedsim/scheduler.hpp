#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/predictor.hpp"
#include "fedsim/selection.hpp"

namespace fedsim {

struct SchedulerConfig {
    double th_low = 0.3;       // bandwidth penalty threshold
    double th_high = 0.8;      // bandwidth reward threshold
    double c = 0.0;            // additive offset on both branch anchors
    double d_high = 0.0;       // slow-round threshold (seconds); 0 = 2*T
    double d_slow = 0.0;       // fast-round threshold (seconds); 0 = 0.5*T
    int w_init = 5;
    int w_min = 2;
    int w_max = 20;
    PredictorSpec predictor;
    bool use_prediction = true;  // ablation switches
    bool use_long_term = true;
    double stale_decay = 0.98;   // utility decay per window for absentees

    void validate() const {
        if (!(th_low >= 0.0 && th_low < th_high && th_high <= 1.0))
            throw InvalidConfig("scheduler thresholds must satisfy 0 <= TH_L < TH_H <= 1");
        if (!(w_min >= 1 && w_min <= w_init && w_init <= w_max))
            throw InvalidConfig("window bounds must satisfy 1 <= W_min <= W_init <= W_max");
    }
};

/// What one simulated round contributes to the window accumulators.
struct RoundObservation {
    std::map<std::string, double> durations;      // per-client t_i (seconds)
    std::map<std::string, double> effective_bw;   // bytes/second
    double round_wall_seconds = 0.0;
};

/// Observation-window accumulator. Selection happens only when frozen is
/// false (a window boundary).
struct WindowState {
    int window = 5;             // W
    int rounds_in_window = 0;   // in [0, W)
    bool frozen = false;
    int w_min = 2;
    int w_max = 20;
    std::map<std::string, BandwidthHistory> bw_history;
    std::map<std::string, double> duration_sum;
    std::map<std::string, int> participation_count;
    double window_wall_sum = 0.0;
    int window_round_count = 0;

    static WindowState make(const SchedulerConfig& cfg) {
        WindowState s;
        s.window = cfg.w_init;
        s.w_min = cfg.w_min;
        s.w_max = cfg.w_max;
        return s;
    }
};

/// Append one round's bandwidth and duration data; no selection occurs.
inline void observe_round(WindowState& state, const RoundObservation& obs,
                          const std::set<std::string>& population) {
    for (const auto& [id, dur] : obs.durations) {
        if (!population.count(id)) throw UnknownClient(id);
        state.duration_sum[id] += dur;
        state.participation_count[id] += 1;
    }
    for (const auto& [id, bw] : obs.effective_bw) {
        if (!population.count(id)) throw UnknownClient(id);
        auto& hist = state.bw_history[id];
        if (hist.client_id.empty()) hist.client_id = id;
        hist.push(bw);
    }
    state.window_wall_sum += obs.round_wall_seconds;
    state.window_round_count += 1;
    state.rounds_in_window += 1;
    if (state.rounds_in_window >= state.window) state.rounds_in_window = 0;
    state.frozen = state.rounds_in_window > 0;
}

/// Mean duration per participating client over the completed window.
inline std::map<std::string, double> long_term_durations(const WindowState& state) {
    if (state.frozen) throw WindowNotComplete{};
    std::map<std::string, double> out;
    for (const auto& [id, sum] : state.duration_sum) {
        const int count = state.participation_count.at(id);
        if (count > 0) out[id] = sum / count;
    }
    return out;
}

/// Reward/penalty factor from a normalized bandwidth prediction. Each
/// branch is anchored to 1 at its threshold: reward -ln(1-a)+c_reward with
/// c_reward = 1 + ln(1-TH_H) + c, penalty exp(a+c_penalty) with
/// c_penalty = -TH_L + c. Between the thresholds the factor is 1.
inline double feedback_factor(double alpha_pred, const SchedulerConfig& cfg) {
    if (!(alpha_pred >= 0.0 && alpha_pred <= 1.0)) throw InvalidPrediction{};
    if (alpha_pred >= cfg.th_high) {
        const double c_reward = 1.0 + std::log(1.0 - cfg.th_high) + cfg.c;
        return -std::log(1.0 - alpha_pred) + c_reward;
    }
    if (alpha_pred <= cfg.th_low) {
        const double c_penalty = -cfg.th_low + cfg.c;
        return std::exp(alpha_pred + c_penalty);
    }
    return 1.0;
}

/// U(j) *= factor, D(j) /= factor, in place.
inline void apply_feedback(std::map<std::string, Feedback>& feedback,
                           const std::map<std::string, double>& factors) {
    for (const auto& [id, f] : factors) {
        if (f <= 0.0) throw NonPositiveFactor{};
        auto it = feedback.find(id);
        if (it == feedback.end()) continue;
        it->second.utility *= f;
        it->second.duration /= f;
    }
}

/// Multiplicative window resize from the last window's mean round
/// duration: slow rounds (d >= D_H) shrink W, fast rounds (d <= D_S) grow
/// it; in between W is unchanged. Rounded and clamped to [W_min, W_max].
inline int adjust_window(int w, double mean_round_duration, const SchedulerConfig& cfg,
                         int w_min, int w_max) {
    if (mean_round_duration <= 0.0) throw InvalidDuration{};
    double next = w;
    if (cfg.d_high > 0.0 && mean_round_duration >= cfg.d_high)
        next = w * cfg.d_high / mean_round_duration;
    else if (cfg.d_slow > 0.0 && mean_round_duration <= cfg.d_slow)
        next = w * cfg.d_slow / mean_round_duration;
    const int rounded = static_cast<int>(std::lround(next));
    return std::clamp(rounded, w_min, w_max);
}

/// Window-boundary pipeline: predict each client's bandwidth, normalize
/// across the cohort, anchor reward/penalty factors, rebuild utilities on
/// window-mean durations, apply the factors, select the next cohort, and
/// resize/reset the window.
inline std::set<std::string> window_boundary_step(WindowState& state,
                                                  std::map<std::string, Feedback>& feedback,
                                                  const std::vector<std::string>& population,
                                                  const SelectionPolicy& policy,
                                                  const SchedulerConfig& cfg, Rng& rng) {
    if (state.frozen) throw WindowNotComplete{};

    // (1)-(3) bandwidth prediction -> normalized -> factor
    std::map<std::string, double> factors;
    if (cfg.use_prediction) {
        std::map<std::string, double> predictions;
        for (const auto& [id, hist] : state.bw_history)
            if (!hist.values.empty()) predictions[id] = predict(cfg.predictor, hist);
        if (!predictions.empty()) {
            for (const auto& [id, norm] : normalize(predictions))
                factors[id] = feedback_factor(norm, cfg);
        }
    }

    // (4) rebuild base utilities on long-term (window-mean) durations
    const std::map<std::string, double> durations = long_term_durations(state);
    for (const auto& [id, mean_dur] : durations) {
        auto it = feedback.find(id);
        if (it == feedback.end()) continue;
        Feedback& fb = it->second;
        if (cfg.use_long_term) fb.duration = mean_dur;
        if (fb.sample_count > 0 && fb.duration > 0)
            fb.utility = compute_utility(fb.sample_count, fb.sq_loss_sum, fb.duration, 1.0, policy);
    }

    // (5) prediction feedback
    apply_feedback(feedback, factors);

    // stale absentees decay so exploration can revisit them
    for (auto& [id, fb] : feedback)
        if (fb.last_round >= 0 && !durations.count(id)) fb.utility *= cfg.stale_decay;

    // (6) select the cohort for the next window
    std::set<std::string> cohort = select_greedy(feedback, population, policy, rng);

    // (7) resize from the completed window's mean round duration
    if (state.window_round_count > 0) {
        const double mean_round = state.window_wall_sum / state.window_round_count;
        if (mean_round > 0.0)
            state.window = adjust_window(state.window, mean_round, cfg, state.w_min, state.w_max);
    }

    // (8) reset accumulators; bandwidth history persists across windows
    state.duration_sum.clear();
    state.participation_count.clear();
    state.window_wall_sum = 0.0;
    state.window_round_count = 0;
    state.rounds_in_window = 0;
    state.frozen = false;
    return cohort;
}

} // namespace fedsim
