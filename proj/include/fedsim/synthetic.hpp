#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "fedsim/rng.hpp"
#include "fedsim/trace.hpp"

namespace fedsim {

/// Generator for the synthetic trace family: a log-uniform base rate
/// modulated by a slow sinusoid (predictable component), occasional deep
/// fades (tunnel episodes), and multiplicative noise. `static_mean`
/// replaces each trace by its constant time-average, keeping the same
/// per-client mean capacity with no dynamics.
struct SyntheticTraceConfig {
    int n_traces = 40;
    std::uint64_t seed = 7;
    double duration_s = 4000.0;
    double sample_interval_s = 2.0;
    double base_bw_min = 4e5;    // bytes/s
    double base_bw_max = 1.2e7;  // bytes/s
    double sine_amplitude = 0.75;
    double sine_period_min_s = 60.0;
    double sine_period_max_s = 240.0;
    double fade_rate_per_s = 1.0 / 600.0;
    double fade_mean_duration_s = 50.0;
    double fade_depth = 0.04;
    double noise_rel = 0.05;
    bool static_mean = false;
};

inline BandwidthTrace generate_trace(const SyntheticTraceConfig& cfg, int index) {
    Rng rng(mix_seed(cfg.seed, 0x74726163u, static_cast<std::uint64_t>(index)));
    const double base = rng.log_uniform(cfg.base_bw_min, cfg.base_bw_max);
    const double period = rng.uniform(cfg.sine_period_min_s, cfg.sine_period_max_s);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    BandwidthTrace trace;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth-%03d", index);
    trace.trace_id = buf;

    bool in_fade = false;
    double fade_left = 0.0;
    for (double t = 0.0; t < cfg.duration_s; t += cfg.sample_interval_s) {
        if (in_fade) {
            fade_left -= cfg.sample_interval_s;
            if (fade_left <= 0.0) in_fade = false;
        } else if (rng.uniform() < cfg.fade_rate_per_s * cfg.sample_interval_s) {
            in_fade = true;
            fade_left = -cfg.fade_mean_duration_s * std::log(1.0 - rng.uniform());
        }
        const double sine = 1.0 + cfg.sine_amplitude * std::sin(2.0 * std::numbers::pi * t / period + phase);
        const double fade = in_fade ? cfg.fade_depth : 1.0;
        const double noise = 1.0 + cfg.noise_rel * rng.normal();
        double bw = base * sine * fade * noise;
        bw = std::max(bw, 0.005 * base);
        trace.times.push_back(t);
        trace.bandwidth.push_back(bw);
    }

    if (cfg.static_mean) {
        const double mean = trace.mean_bandwidth();
        BandwidthTrace flat;
        flat.trace_id = trace.trace_id;
        flat.times = {0.0};
        flat.bandwidth = {mean};
        return flat;
    }
    return trace;
}

inline std::map<std::string, BandwidthTrace> generate_traces(const SyntheticTraceConfig& cfg) {
    std::map<std::string, BandwidthTrace> out;
    for (int i = 0; i < cfg.n_traces; ++i) {
        BandwidthTrace t = generate_trace(cfg, i);
        out.emplace(t.trace_id, std::move(t));
    }
    return out;
}

/// Pure sinusoid-plus-noise trace for predictor-window experiments.
inline BandwidthTrace sinusoid_noise_trace(std::uint64_t seed, int n_samples = 400,
                                           double base = 2e6, double amplitude = 0.6,
                                           double period_samples = 24.0,
                                           double noise_rel = 0.03) {
    Rng rng(mix_seed(seed, 0x73696e65u));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    BandwidthTrace trace;
    trace.trace_id = "sinusoid";
    for (int i = 0; i < n_samples; ++i) {
        const double sine = 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * i / period_samples + phase);
        double bw = base * (sine + noise_rel * rng.normal());
        trace.times.push_back(static_cast<double>(i));
        trace.bandwidth.push_back(std::max(bw, 0.0));
    }
    return trace;
}

} // namespace fedsim
