#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/trace.hpp"

namespace fedsim {

/// Per-client effective-bandwidth history, one entry per observed round.
/// Capped: pushing past the limit drops the oldest entry.
struct BandwidthHistory {
    std::string client_id;
    std::vector<double> values;  // bytes/second
    std::size_t max_len = 64;

    void push(double v) {
        values.push_back(v);
        if (values.size() > max_len) values.erase(values.begin());
    }
};

enum class PredictorKind { last_value, ewma, windowed_ar };

struct PredictorSpec {
    PredictorKind kind = PredictorKind::windowed_ar;
    double ewma_lambda = 0.5;  // in (0, 1]
    int ar_order = 4;          // p >= 1
    int ar_fit_window = 24;    // >= p + 1
};

namespace detail {

/// Solve (A + ridge*I) x = b in place by Gaussian elimination with partial
/// pivoting. A is n x n row-major.
inline std::vector<double> solve_ridge(std::vector<double> a, std::vector<double> b,
                                       std::size_t n, double ridge) {
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += ridge;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[col * n + j], a[pivot * n + j]);
            std::swap(b[col], b[pivot]);
        }
        const double diag = a[col * n + col];
        if (diag == 0.0) continue;
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / diag;
            for (std::size_t j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t j = i + 1; j < n; ++j) acc -= a[i * n + j] * x[j];
        x[i] = a[i * n + i] != 0.0 ? acc / a[i * n + i] : 0.0;
    }
    return x;
}

/// One-step AR(p) extrapolation by least squares over the last `fit_window`
/// entries, no intercept, ridge damping 1e-8.
inline double predict_ar(const std::vector<double>& values, int order, int fit_window) {
    const std::size_t p = static_cast<std::size_t>(order);
    const std::size_t n = values.size();
    const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(fit_window));
    const double* v = values.data() + (n - w);

    // normal equations X'X a = X'y over rows t = p .. w-1
    std::vector<double> xtx(p * p, 0.0), xty(p, 0.0);
    for (std::size_t t = p; t < w; ++t) {
        for (std::size_t i = 0; i < p; ++i) {
            xty[i] += v[t - 1 - i] * v[t];
            for (std::size_t j = 0; j < p; ++j) xtx[i * p + j] += v[t - 1 - i] * v[t - 1 - j];
        }
    }
    // scale-aware ridge so damping survives bandwidths in the 1e6 range
    double scale = 0.0;
    for (std::size_t i = 0; i < p; ++i) scale = std::max(scale, xtx[i * p + i]);
    const std::vector<double> coeff = solve_ridge(std::move(xtx), std::move(xty), p,
                                                  1e-8 * std::max(scale, 1.0));
    double pred = 0.0;
    for (std::size_t i = 0; i < p; ++i) pred += coeff[i] * values[n - 1 - i];
    return std::max(pred, 0.0);
}

} // namespace detail

/// Forecast the next effective bandwidth from history. Windowed-AR falls
/// back to last-value when the history is shorter than order+1.
inline double predict(const PredictorSpec& spec, const std::vector<double>& history) {
    if (history.empty()) throw EmptyHistory{};
    switch (spec.kind) {
    case PredictorKind::last_value:
        return history.back();
    case PredictorKind::ewma: {
        double acc = history.front();
        for (std::size_t i = 1; i < history.size(); ++i)
            acc = spec.ewma_lambda * history[i] + (1.0 - spec.ewma_lambda) * acc;
        return std::max(acc, 0.0);
    }
    case PredictorKind::windowed_ar:
        if (history.size() < static_cast<std::size_t>(spec.ar_order) + 1)
            return history.back();
        return detail::predict_ar(history, spec.ar_order, spec.ar_fit_window);
    }
    return history.back();
}

inline double predict(const PredictorSpec& spec, const BandwidthHistory& history) {
    return predict(spec, history.values);
}

/// Min-max normalization over the cohort into [0.05, 0.95]; a degenerate
/// all-equal cohort maps to 0.5 everywhere.
inline std::map<std::string, double> normalize(const std::map<std::string, double>& predictions) {
    if (predictions.empty()) throw EmptyCohort{};
    constexpr double eps = 0.05;
    double lo = predictions.begin()->second, hi = lo;
    for (const auto& [id, v] : predictions) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::map<std::string, double> out;
    for (const auto& [id, v] : predictions)
        out[id] = hi > lo ? eps + (1.0 - 2.0 * eps) * (v - lo) / (hi - lo) : 0.5;
    return out;
}

/// Walk the trace's sample series, forecasting each point from the
/// preceding `window` observations; returns mean absolute error.
inline double prediction_error(const PredictorSpec& spec, const BandwidthTrace& trace,
                               int window) {
    const auto& series = trace.bandwidth;
    const std::size_t w = static_cast<std::size_t>(window);
    if (series.size() < w + 10) throw TraceTooShort{};
    double acc = 0.0;
    std::size_t count = 0;
    std::vector<double> hist;
    for (std::size_t i = w; i < series.size(); ++i) {
        hist.assign(series.begin() + (i - w), series.begin() + i);
        acc += std::fabs(predict(spec, hist) - series[i]);
        ++count;
    }
    return acc / static_cast<double>(count);
}

} // namespace fedsim
