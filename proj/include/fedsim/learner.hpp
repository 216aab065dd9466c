#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

struct Sample {
    std::vector<double> features;
    int label = 0;
};

struct DataPartition {
    std::string client_id;
    std::vector<Sample> samples;
};

struct Dataset {
    std::vector<Sample> samples;
};

/// Flattened linear softmax classifier: weights W[c*d + j] followed by
/// C biases. dim = d*C + C.
struct GlobalModel {
    std::vector<double> parameters;
    int feature_dim = 0;
    int n_classes = 0;
    int version = 0;

    static GlobalModel zeros(int d, int c) {
        GlobalModel m;
        m.feature_dim = d;
        m.n_classes = c;
        m.parameters.assign(static_cast<std::size_t>(d) * c + c, 0.0);
        return m;
    }
    double weight(int c, int j) const { return parameters[static_cast<std::size_t>(c) * feature_dim + j]; }
    double bias(int c) const { return parameters[static_cast<std::size_t>(feature_dim) * n_classes + c]; }
};

struct LocalTrainReport {
    std::string client_id;
    std::vector<double> delta;             // trained - initial parameters
    std::vector<double> per_sample_losses; // post-training, one per sample
    std::size_t sample_count = 0;
    double compute_seconds = 0.0;
};

enum class AggregatorKind { fedavg, yogi };

struct AggregatorState {
    AggregatorKind kind = AggregatorKind::yogi;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double tau = 1e-3;
    double server_lr = 0.01;
    std::vector<double> first_moment;
    std::vector<double> second_moment;

    static AggregatorState make(AggregatorKind k, std::size_t dim) {
        AggregatorState s;
        s.kind = k;
        if (k == AggregatorKind::yogi) {
            s.first_moment.assign(dim, 0.0);
            s.second_moment.assign(dim, s.tau * s.tau);
        }
        return s;
    }
};

struct Population {
    std::vector<DataPartition> partitions;
    Dataset test_set;
    std::vector<std::vector<double>> class_centers;
};

/// Gaussian clusters with Dirichlet(alpha) per-client class mixtures and a
/// balanced held-out test set. Deterministic in seed. `class_sep` scales the
/// cluster centers relative to the unit within-class noise: small values
/// overlap the classes and slow convergence.
inline Population generate_population(std::uint64_t seed, int n_clients, int d, int c,
                                      double dirichlet_alpha,
                                      std::pair<int, int> samples_per_client_range,
                                      int test_set_size = 2000, double class_sep = 3.0) {
    if (n_clients < 1 || d < 1 || c < 2) throw InvalidConfig("population dimensions must be positive");
    if (dirichlet_alpha <= 0) throw InvalidConfig("dirichlet_alpha must be > 0");
    if (class_sep <= 0) throw InvalidConfig("class_sep must be > 0");
    if (samples_per_client_range.first < 1 ||
        samples_per_client_range.second < samples_per_client_range.first)
        throw InvalidConfig("bad samples_per_client range");

    Rng rng(mix_seed(seed, 0x706f7075u));
    Population pop;
    pop.class_centers.resize(c);
    for (auto& center : pop.class_centers) {
        center.resize(d);
        for (auto& x : center) x = class_sep * rng.normal();
    }

    auto draw_sample = [&](int label) {
        Sample s;
        s.label = label;
        s.features.resize(d);
        for (int j = 0; j < d; ++j) s.features[j] = pop.class_centers[label][j] + rng.normal();
        return s;
    };

    for (int i = 0; i < n_clients; ++i) {
        DataPartition part;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "c%04d", i);
        part.client_id = buf;
        const std::vector<double> mixture = rng.dirichlet(dirichlet_alpha, c);
        const int lo = samples_per_client_range.first, hi = samples_per_client_range.second;
        const int count = lo + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
        for (int k = 0; k < count; ++k) {
            double u = rng.uniform(), cum = 0.0;
            int label = c - 1;
            for (int cl = 0; cl < c; ++cl) {
                cum += mixture[cl];
                if (u < cum) { label = cl; break; }
            }
            part.samples.push_back(draw_sample(label));
        }
        pop.partitions.push_back(std::move(part));
    }

    for (int k = 0; k < test_set_size; ++k)
        pop.test_set.samples.push_back(draw_sample(k % c));
    return pop;
}

namespace detail {

/// Softmax cross-entropy loss at one sample; optionally accumulates the
/// analytic gradient (scaled by `grad_scale`) into `grad`.
inline double ce_loss_grad(const GlobalModel& m, const std::vector<double>& params,
                           const Sample& s, std::vector<double>* grad, double grad_scale) {
    const int d = m.feature_dim, c = m.n_classes;
    std::vector<double> logits(c);
    for (int cl = 0; cl < c; ++cl) {
        double z = params[static_cast<std::size_t>(d) * c + cl];
        const double* w = params.data() + static_cast<std::size_t>(cl) * d;
        for (int j = 0; j < d; ++j) z += w[j] * s.features[j];
        logits[cl] = z;
    }
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (int cl = 0; cl < c; ++cl) denom += std::exp(logits[cl] - zmax);
    const double log_denom = std::log(denom) + zmax;
    const double loss = log_denom - logits[s.label];
    if (grad) {
        for (int cl = 0; cl < c; ++cl) {
            const double p = std::exp(logits[cl] - log_denom);
            const double g = (p - (cl == s.label ? 1.0 : 0.0)) * grad_scale;
            double* w = grad->data() + static_cast<std::size_t>(cl) * d;
            for (int j = 0; j < d; ++j) w[j] += g * s.features[j];
            (*grad)[static_cast<std::size_t>(d) * c + cl] += g;
        }
    }
    return loss;
}

} // namespace detail

/// Mini-batch SGD on cross-entropy over the partition. Shuffle order is
/// seeded; per-sample losses are evaluated at the final parameters.
inline LocalTrainReport local_train(const GlobalModel& model, const DataPartition& partition,
                                    int epochs, int batch_size, double lr, std::uint64_t seed) {
    if (batch_size < 1 || epochs < 1) throw InvalidConfig("epochs and batch_size must be >= 1");
    const std::size_t n = partition.samples.size();
    std::vector<double> params = model.parameters;
    std::vector<double> grad(params.size());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    Rng rng(mix_seed(seed, 0x747261u));
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t b = 0; b < n; b += batch_size) {
            const std::size_t end = std::min(n, b + batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = b; i < end; ++i)
                detail::ce_loss_grad(model, params, partition.samples[order[i]], &grad,
                                     1.0 / static_cast<double>(end - b));
            for (std::size_t j = 0; j < params.size(); ++j) params[j] -= lr * grad[j];
        }
    }

    LocalTrainReport report;
    report.client_id = partition.client_id;
    report.sample_count = n;
    report.delta.resize(params.size());
    for (std::size_t j = 0; j < params.size(); ++j)
        report.delta[j] = params[j] - model.parameters[j];
    for (const auto& s : partition.samples) {
        const double loss = detail::ce_loss_grad(model, params, s, nullptr, 0.0);
        if (!std::isfinite(loss)) throw NonFiniteLoss{};
        report.per_sample_losses.push_back(loss);
    }
    return report;
}

/// Sample-count-weighted FedAvg / Yogi server step. Reports must be passed
/// in canonical (sorted client_id) order for bit-level determinism.
inline void aggregate(AggregatorState& state, GlobalModel& model,
                      const std::vector<LocalTrainReport>& reports) {
    if (reports.empty()) throw EmptyCohort{};
    const std::size_t dim = model.parameters.size();
    double total_weight = 0.0;
    std::vector<double> mean_delta(dim, 0.0);
    for (const auto& r : reports) {
        if (r.delta.size() != dim) throw DimensionMismatch{};
        total_weight += static_cast<double>(r.sample_count);
    }
    for (const auto& r : reports) {
        const double w = static_cast<double>(r.sample_count) / total_weight;
        for (std::size_t j = 0; j < dim; ++j) mean_delta[j] += w * r.delta[j];
    }

    if (state.kind == AggregatorKind::fedavg) {
        for (std::size_t j = 0; j < dim; ++j) model.parameters[j] += mean_delta[j];
    } else {
        if (state.first_moment.size() != dim) throw DimensionMismatch{};
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = mean_delta[j];
            const double d2 = d * d;
            double& m = state.first_moment[j];
            double& v = state.second_moment[j];
            m = state.beta1 * m + (1.0 - state.beta1) * d;
            v = v - (1.0 - state.beta2) * d2 * (v - d2 > 0 ? 1.0 : (v - d2 < 0 ? -1.0 : 0.0));
            model.parameters[j] += state.server_lr * m / (std::sqrt(std::max(v, 0.0)) + state.tau);
        }
    }
    ++model.version;
}

/// Top-1 accuracy; argmax ties resolved toward the lowest class index.
inline double evaluate(const GlobalModel& model, const Dataset& test_set) {
    if (test_set.samples.empty()) throw InvalidConfig("empty test set");
    std::size_t correct = 0;
    const int d = model.feature_dim, c = model.n_classes;
    for (const auto& s : test_set.samples) {
        int best = 0;
        double best_z = -1e300;
        for (int cl = 0; cl < c; ++cl) {
            double z = model.bias(cl);
            const double* w = model.parameters.data() + static_cast<std::size_t>(cl) * d;
            for (int j = 0; j < d; ++j) z += w[j] * s.features[j];
            if (z > best_z) { best_z = z; best = cl; }
        }
        if (best == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_set.samples.size());
}

} // namespace fedsim
