#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/learner.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/scheduler.hpp"
#include "fedsim/selection.hpp"
#include "fedsim/trace.hpp"

namespace fedsim {

struct ClientProfile {
    std::string client_id;
    std::string trace_id;
    double per_sample_compute_latency = 0.0;  // seconds/sample/epoch
    double pull_bytes = 0.0;
    double push_bytes = 0.0;
    std::size_t partition_index = 0;
};

struct ClientRoundTime {
    double comp_seconds = 0.0;
    double comm_seconds = 0.0;
    bool dropped = false;
};

/// Eq-style timing: compute is sample_count * epochs * per-sample latency;
/// communication is pull at round start plus push after compute, integrated
/// over the trace. A StalledTransfer marks the client dropped with the
/// stall timeout charged as its communication time.
inline ClientRoundTime client_round_time(const ClientProfile& profile, const BandwidthTrace& trace,
                                         double start, std::size_t sample_count, int epochs,
                                         double stall_timeout = 3600.0) {
    ClientRoundTime t;
    t.comp_seconds = static_cast<double>(sample_count) * epochs * profile.per_sample_compute_latency;
    try {
        const double pull = transfer_time(trace, start, profile.pull_bytes, stall_timeout);
        const double push =
            transfer_time(trace, start + pull + t.comp_seconds, profile.push_bytes, stall_timeout);
        t.comm_seconds = pull + push;
    } catch (const StalledTransfer&) {
        t.dropped = true;
        t.comm_seconds = stall_timeout;
    }
    return t;
}

struct PerClientRound {
    double comm_seconds = 0.0;
    double comp_seconds = 0.0;
    double effective_bw = 0.0;
    bool dropped = false;
};

struct RoundRecord {
    int round = 0;
    double wall_clock_start = 0.0;
    double wall_clock_end = 0.0;
    std::vector<std::string> cohort;
    std::map<std::string, PerClientRound> per_client;
    std::optional<double> test_accuracy;
    bool selection_frozen = false;
};

struct RunSettings {
    int epochs = 20;
    int batch_size = 20;
    double learning_rate = 0.01;
    AggregatorKind aggregator = AggregatorKind::yogi;
    double yogi_beta1 = 0.9, yogi_beta2 = 0.99, yogi_tau = 1e-3, yogi_server_lr = 0.01;
    int eval_every = 10;
    int max_rounds = 200;
    double max_sim_seconds = 48.0 * 3600.0;
    double target_accuracy = 0.8;
    double stall_timeout = 3600.0;
    int warmup_rounds = 5;
    double preferred_duration_factor = 1.3;  // T = factor * median warm-up round
};

struct RunResult {
    std::vector<RoundRecord> records;
    std::vector<std::pair<double, double>> accuracy_curve;  // (wall_clock_s, accuracy) per eval
    double final_accuracy = 0.0;
    bool reached_target = false;
    double time_to_target = 0.0;  // seconds, interpolated; valid iff reached_target
    int rounds_run = 0;
    bool budget_exhausted = false;
    std::string error;  // non-empty when the run aborted
};

/// First wall-clock time at which the piecewise-linear accuracy curve
/// crosses `target`; nullopt if it never does.
inline std::optional<double> time_to_accuracy(const std::vector<std::pair<double, double>>& curve,
                                              double target) {
    double prev_t = 0.0, prev_acc = 0.0;
    for (const auto& [t, acc] : curve) {
        if (acc >= target) {
            if (acc == prev_acc) return t;
            const double frac = (target - prev_acc) / (acc - prev_acc);
            return prev_t + frac * (t - prev_t);
        }
        prev_t = t;
        prev_acc = acc;
    }
    return std::nullopt;
}

/// One (policy, seed) simulation: the synchronous round loop with
/// trace-timed transfers, drop-on-stall, feedback bookkeeping and the
/// windowed selection state machine.
class Engine {
public:
    Engine(const Population& population, std::vector<ClientProfile> profiles,
           const TraceStore& traces, SelectionPolicy policy, SchedulerConfig scheduler_cfg,
           RunSettings settings, std::uint64_t seed)
        : population_(population),
          profiles_(std::move(profiles)),
          traces_(traces),
          policy_(std::move(policy)),
          scheduler_cfg_(scheduler_cfg),
          settings_(settings),
          seed_(seed),
          selection_rng_(mix_seed(seed, 0x73656cU)) {
        for (const auto& p : profiles_) {
            population_ids_.push_back(p.client_id);
            profile_by_id_[p.client_id] = &p;
        }
        std::sort(population_ids_.begin(), population_ids_.end());
        population_set_ = {population_ids_.begin(), population_ids_.end()};
        model_ = GlobalModel::zeros(
            static_cast<int>(population_.partitions.front().samples.front().features.size()),
            count_classes());
        agg_ = AggregatorState::make(settings_.aggregator, model_.parameters.size());
        agg_.beta1 = settings_.yogi_beta1;
        agg_.beta2 = settings_.yogi_beta2;
        agg_.tau = settings_.yogi_tau;
        agg_.server_lr = settings_.yogi_server_lr;
        if (settings_.aggregator == AggregatorKind::yogi)
            agg_.second_moment.assign(model_.parameters.size(), agg_.tau * agg_.tau);
        window_ = WindowState::make(scheduler_cfg_);
    }

    RunResult run() {
        RunResult result;
        try {
            run_loop(result);
        } catch (const AllClientsDropped& e) {
            result.error = e.what();
        }
        result.final_accuracy = evaluate(model_, population_.test_set);
        if (result.accuracy_curve.empty() || result.records.empty()) {
            // no eval happened (e.g. zero-round budget); record final state at current clock
            result.accuracy_curve.emplace_back(clock_, result.final_accuracy);
        }
        if (auto t = time_to_accuracy(result.accuracy_curve, settings_.target_accuracy)) {
            result.reached_target = true;
            result.time_to_target = *t;
        }
        return result;
    }

    const GlobalModel& model() const { return model_; }
    const WindowState& window_state() const { return window_; }
    const std::map<std::string, Feedback>& feedback() const { return feedback_; }
    double preferred_duration() const { return policy_.preferred_duration; }

private:
    int count_classes() const {
        int c = 0;
        for (const auto& s : population_.test_set.samples) c = std::max(c, s.label + 1);
        for (const auto& p : population_.partitions)
            for (const auto& s : p.samples) c = std::max(c, s.label + 1);
        return c;
    }

    bool uses_scheduler() const { return policy_.kind != PolicyKind::random; }

    void run_loop(RunResult& result) {
        const int warmup = uses_scheduler() ? settings_.warmup_rounds : 0;
        for (int round = 0; round < settings_.max_rounds; ++round) {
            if (clock_ >= settings_.max_sim_seconds) {
                result.budget_exhausted = true;
                return;
            }
            const bool in_warmup = round < warmup;
            if (in_warmup || policy_.kind == PolicyKind::random) {
                cohort_ = select_random(population_ids_, policy_.participants, selection_rng_);
            } else if (cohort_.empty()) {
                // first post-warm-up selection
                cohort_ = window_boundary_step(window_, feedback_, population_ids_, policy_,
                                               scheduler_cfg_, selection_rng_);
            }

            const RoundRecord record = run_round(round);
            result.records.push_back(record);
            result.rounds_run = round + 1;
            warmup_durations_.push_back(record.wall_clock_end - record.wall_clock_start);

            if (in_warmup && uses_scheduler()) {
                // warm-up rounds feed bandwidth history but not the
                // long-term accumulators; each behaves as its own window
                window_.duration_sum.clear();
                window_.participation_count.clear();
                window_.window_wall_sum = 0.0;
                window_.window_round_count = 0;
                window_.rounds_in_window = 0;
                window_.frozen = false;
                if (round + 1 == warmup) {
                    calibrate_preferred_duration();
                    cohort_ = window_boundary_step(window_, feedback_, population_ids_, policy_,
                                                   scheduler_cfg_, selection_rng_);
                }
            } else if (uses_scheduler() && !window_.frozen) {
                cohort_ = window_boundary_step(window_, feedback_, population_ids_, policy_,
                                               scheduler_cfg_, selection_rng_);
            }

            const bool eval_now = (round + 1) % settings_.eval_every == 0;
            if (eval_now) {
                const double acc = evaluate(model_, population_.test_set);
                result.records.back().test_accuracy = acc;
                result.accuracy_curve.emplace_back(clock_, acc);
                if (acc >= settings_.target_accuracy) return;
            }
        }
        result.budget_exhausted = true;
    }

    void calibrate_preferred_duration() {
        std::vector<double> d = warmup_durations_;
        std::sort(d.begin(), d.end());
        const std::size_t n = d.size();
        const double median = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
        if (policy_.preferred_duration <= 0.0)
            policy_.preferred_duration = settings_.preferred_duration_factor * median;
        if (scheduler_cfg_.d_high <= 0.0) scheduler_cfg_.d_high = 2.0 * policy_.preferred_duration;
        if (scheduler_cfg_.d_slow <= 0.0) scheduler_cfg_.d_slow = 0.5 * policy_.preferred_duration;
    }

    RoundRecord run_round(int round) {
        RoundRecord record;
        record.round = round;
        record.wall_clock_start = clock_;
        record.selection_frozen = window_.frozen;
        record.cohort.assign(cohort_.begin(), cohort_.end());

        std::vector<LocalTrainReport> reports;
        RoundObservation obs;
        double advance = 0.0;
        std::size_t client_idx = 0;
        for (const auto& id : record.cohort) {
            const ClientProfile& profile = *profile_by_id_.at(id);
            const DataPartition& part = population_.partitions[profile.partition_index];
            const BandwidthTrace& trace = traces_.for_client(id);
            const ClientRoundTime t =
                client_round_time(profile, trace, clock_, part.samples.size(), settings_.epochs,
                                  settings_.stall_timeout);

            PerClientRound pc;
            pc.comm_seconds = t.comm_seconds;
            pc.comp_seconds = t.comp_seconds;
            pc.dropped = t.dropped;
            pc.effective_bw = (profile.pull_bytes + profile.push_bytes) / t.comm_seconds;
            record.per_client[id] = pc;

            const double duration = t.dropped ? settings_.stall_timeout : t.comm_seconds + t.comp_seconds;
            obs.durations[id] = duration;
            obs.effective_bw[id] = pc.effective_bw;

            Feedback& fb = feedback_[id];
            fb.client_id = id;
            fb.last_round = round;
            fb.duration = duration;
            if (!t.dropped) {
                LocalTrainReport report =
                    local_train(model_, part, settings_.epochs, settings_.batch_size,
                                settings_.learning_rate, mix_seed(seed_, round, client_idx));
                report.compute_seconds = t.comp_seconds;
                advance = std::max(advance, t.comm_seconds + t.comp_seconds);
                fb.sample_count = report.sample_count;
                fb.sq_loss_sum = 0.0;
                for (double l : report.per_sample_losses) fb.sq_loss_sum += l * l;
                fb.utility = compute_utility(report, duration, 1.0, policy_);
                reports.push_back(std::move(report));
            } else if (fb.sample_count > 0) {
                fb.utility = compute_utility(fb.sample_count, fb.sq_loss_sum, duration, 1.0, policy_);
            }
            ++client_idx;
        }
        if (reports.empty()) throw AllClientsDropped(round);

        // canonical order for a deterministic floating-point reduction
        std::sort(reports.begin(), reports.end(),
                  [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
        aggregate(agg_, model_, reports);

        clock_ += advance;
        record.wall_clock_end = clock_;

        if (uses_scheduler()) {
            obs.round_wall_seconds = advance;
            observe_round(window_, obs, population_set_);
        }
        return record;
    }

    const Population& population_;
    std::vector<ClientProfile> profiles_;
    const TraceStore& traces_;
    SelectionPolicy policy_;
    SchedulerConfig scheduler_cfg_;
    RunSettings settings_;
    std::uint64_t seed_;

    std::vector<std::string> population_ids_;
    std::set<std::string> population_set_;
    std::map<std::string, const ClientProfile*> profile_by_id_;
    GlobalModel model_;
    AggregatorState agg_;
    WindowState window_;
    std::map<std::string, Feedback> feedback_;
    std::set<std::string> cohort_;
    Rng selection_rng_;
    double clock_ = 0.0;
    std::vector<double> warmup_durations_;
};

} // namespace fedsim
