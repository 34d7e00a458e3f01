#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "sga/errors.hpp"
#include "sga/network.hpp"
#include "sga/rng.hpp"
#include "sga/saliency_mask.hpp"
#include "sga/tensor.hpp"

namespace sga {

enum class NormOrder { inf };

struct AttackSpec {
    NormOrder norm_order = NormOrder::inf;
    double epsilon_low = 0.01;
    double epsilon_high = 0.05;
    double clamp_low = 0.0;
    double clamp_high = 1.0;

    void validate() const {
        if (!(epsilon_low >= 0.0 && epsilon_low <= epsilon_high) || !std::isfinite(epsilon_high)) {
            throw ValidationError("attack needs 0 <= epsilon_low <= epsilon_high");
        }
        if (!(clamp_low < clamp_high) || !std::isfinite(clamp_low) || !std::isfinite(clamp_high)) {
            throw ValidationError("attack needs clamp_low < clamp_high");
        }
    }
};

struct Perturbation {
    Tensor delta;
    double epsilon_used = 0.0;
};

inline double sample_epsilon(Rng& rng, const AttackSpec& spec) {
    spec.validate();
    return rng.uniform(spec.epsilon_low, spec.epsilon_high);
}

/// One fast-gradient-sign step on the cross-entropy loss: delta = eps * sign(grad),
/// sign(0) = 0. Every coordinate is perturbed, masked ones included.
inline Perturbation fgsm(const NetworkParams& params, const Tensor& x, int label, double epsilon) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be finite and >= 0");
    Tensor delta = input_gradient_of_loss(params, x, label);
    for (double& g : delta.data()) g = g > 0.0 ? epsilon : (g < 0.0 ? -epsilon : 0.0);
    return {std::move(delta), epsilon};
}

inline Perturbation fgsm(const NetworkParams& params, const MaskedInput& x_tilde, int label, double epsilon) {
    return fgsm(params, x_tilde.data, label, epsilon);
}

/// x + delta, clamped coordinate-wise into [clamp_low, clamp_high].
inline Tensor apply_perturbation(const Tensor& x, const Perturbation& p, const AttackSpec& spec) {
    spec.validate();
    if (x.shape() != p.delta.shape()) throw ShapeError("perturbation shape differs from input");
    Tensor out = x;
    auto d = p.delta.data();
    auto v = out.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i] + d[i], spec.clamp_low, spec.clamp_high);
    return out;
}

inline Tensor apply_perturbation(const MaskedInput& x_tilde, const Perturbation& p, const AttackSpec& spec) {
    return apply_perturbation(x_tilde.data, p, spec);
}

}  // namespace sga
