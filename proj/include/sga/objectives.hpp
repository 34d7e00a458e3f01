#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sga/errors.hpp"

namespace sga {

/// Lower bound applied to the second KL argument before taking its log.
inline constexpr double kKlProbabilityFloor = 1e-12;

struct ProbabilityVector {
    std::vector<double> probs;

    std::size_t size() const noexcept { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }
};

enum class ObjectiveKind {
    ce_only,     ///< cross-entropy on the clean input
    ce_plus_kl,  ///< CE(x) + lambda * KL(softmax f(x) || softmax f(x'))
    kl_only,     ///< lambda * KL term alone; used for diagnostics and gradient checks
};

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::ce_only;
    double lambda = 0.0;

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
            throw ValidationError("objective lambda must be finite and >= 0");
        }
    }

    bool uses_pair() const noexcept { return kind != ObjectiveKind::ce_only; }
    double ce_weight() const noexcept { return kind == ObjectiveKind::kl_only ? 0.0 : 1.0; }
    double kl_weight() const noexcept { return kind == ObjectiveKind::ce_only ? 0.0 : lambda; }

    static ObjectiveSpec cross_entropy() { return {}; }
    static ObjectiveSpec composite(double lambda) { return {ObjectiveKind::ce_plus_kl, lambda}; }
};

inline double log_sum_exp(std::span<const double> logits) {
    const auto top = std::max_element(logits.begin(), logits.end());
    const double m = *top;
    double s = 0.0;
    for (auto it = logits.begin(); it != logits.end(); ++it) {
        if (it != top) s += std::exp(*it - m);
    }
    return m + std::log1p(s);
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
    const double lse = log_sum_exp(logits);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

/// Max-subtracted exponential normalization.
inline ProbabilityVector softmax(std::span<const double> logits) {
    if (logits.empty()) throw ValidationError("softmax of an empty vector");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        s += p[i];
    }
    for (double& v : p) v /= s;
    return {std::move(p)};
}

inline void check_label(int label, std::size_t num_classes) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
        throw ValidationError("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    }
}

/// -log softmax(logits)[label], via log-sum-exp.
inline double cross_entropy(std::span<const double> logits, int label) {
    check_label(label, logits.size());
    const auto top = std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (auto it = logits.begin(); it != logits.end(); ++it) {
        if (it != top) s += std::exp(*it - *top);
    }
    return (*top - logits[static_cast<std::size_t>(label)]) + std::log1p(s);
}

/// d CE / d logits = softmax(logits) - one_hot(label).
inline std::vector<double> cross_entropy_logit_grad(std::span<const double> logits, int label) {
    check_label(label, logits.size());
    std::vector<double> g = softmax(logits).probs;
    g[static_cast<std::size_t>(label)] -= 1.0;
    return g;
}

/// D_KL(p || q) = sum p_i ln(p_i / q_i), with 0 ln(0/q) = 0 and q floored at 1e-12.
inline double kl_divergence(const ProbabilityVector& p, const ProbabilityVector& q) {
    if (p.size() != q.size() || p.size() == 0) {
        throw ShapeError("KL arguments must be non-empty and of equal length");
    }
    auto check = [](const ProbabilityVector& v) {
        double s = 0.0;
        for (double x : v.probs) {
            if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("probabilities must lie in [0, 1]");
            s += x;
        }
        if (std::abs(s - 1.0) > 1e-9) throw ValidationError("probabilities must sum to 1");
    };
    check(p);
    check(q);
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        kl += p[i] * std::log(p[i] / std::max(q[i], kKlProbabilityFloor));
    }
    return kl;
}

/// KL(softmax(anchor) || softmax(target)) together with its gradients with
/// respect to both logit vectors.
struct KlLogitTerms {
    double value = 0.0;
    std::vector<double> grad_anchor;
    std::vector<double> grad_target;
};

inline KlLogitTerms kl_from_logits(std::span<const double> anchor, std::span<const double> target) {
    if (anchor.size() != target.size()) throw ShapeError("KL logit vectors differ in length");
    const std::size_t n = anchor.size();
    const std::vector<double> log_p = log_softmax(anchor);
    const std::vector<double> log_q_raw = log_softmax(target);
    const double log_floor = std::log(kKlProbabilityFloor);

    std::vector<double> p(n), q(n), gap(n, 0.0);
    std::vector<bool> floored(n);
    KlLogitTerms out;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = std::exp(log_p[i]);
        q[i] = std::exp(log_q_raw[i]);
        floored[i] = log_q_raw[i] < log_floor;
        const double log_q = floored[i] ? log_floor : log_q_raw[i];
        if (p[i] > 0.0) {
            gap[i] = log_p[i] - log_q;
            out.value += p[i] * gap[i];
        }
    }

    // d/da_j = p_j (gap_j - KL); d/db_j = q_j * P_U - p_j [j in U], U = unfloored indices.
    double mass_unfloored = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!floored[i]) mass_unfloored += p[i];
    }
    out.grad_anchor.resize(n);
    out.grad_target.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.grad_anchor[j] = p[j] > 0.0 ? p[j] * (gap[j] - out.value) : 0.0;
        out.grad_target[j] = q[j] * mass_unfloored - (floored[j] ? 0.0 : p[j]);
    }
    return out;
}

}  // namespace sga
