#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "sga/errors.hpp"
#include "sga/network.hpp"
#include "sga/rng.hpp"
#include "sga/tensor.hpp"

namespace sga {

/// Signed per-feature gradient of one class logit, for one input.
struct SaliencyMap {
    Tensor values;  // [1 x d], signed
    int source_label = 0;

    std::size_t size() const noexcept { return values.size(); }
};

/// Fraction of features to mask and the range replacement values are drawn from.
struct MaskSpec {
    double k_fraction = 0.1;
    double value_low = 0.0;
    double value_high = 1.0;

    void validate() const {
        if (!(k_fraction >= 0.0 && k_fraction <= 1.0)) throw ValidationError("k_fraction must lie in [0, 1]");
        if (!std::isfinite(value_low) || !std::isfinite(value_high) || value_low > value_high) {
            throw ValidationError("mask value range must be finite with value_low <= value_high");
        }
    }

    /// floor(k_fraction * d)
    std::size_t count(std::size_t d) const {
        return static_cast<std::size_t>(std::floor(k_fraction * static_cast<double>(d)));
    }
};

struct MaskedInput {
    Tensor data;                              // [1 x d]
    std::vector<std::size_t> masked_indices;  // ascending
};

inline SaliencyMap compute_saliency(const NetworkParams& params, const Tensor& x, int label) {
    return {input_gradient(params, x, label), label};
}

/// Feature indices ordered by signed saliency, ascending; ties keep index order.
inline std::vector<std::size_t> sort_ascending(const SaliencyMap& saliency) {
    const auto v = saliency.values.data();
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return order;
}

/// Replaces the first floor(k * d) features named by `order` with independent
/// uniform draws from [value_low, value_high], drawn in `order` sequence.
inline MaskedInput mask_bottom_k(const Tensor& x, std::span<const std::size_t> order,
                                 const MaskSpec& spec, Rng& rng) {
    spec.validate();
    if (x.rank() != 2 || x.rows() != 1) throw ShapeError("mask_bottom_k expects a single sample");
    const std::size_t d = x.cols();
    if (order.size() != d) throw ShapeError("mask order length differs from feature count");
    std::vector<bool> seen(d, false);
    for (std::size_t i : order) {
        if (i >= d || seen[i]) throw ValidationError("mask order is not a permutation of the features");
        seen[i] = true;
    }

    const std::size_t m = spec.count(d);
    MaskedInput out{x, std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m))};
    for (std::size_t i : out.masked_indices) out.data[i] = rng.uniform(spec.value_low, spec.value_high);
    std::sort(out.masked_indices.begin(), out.masked_indices.end());
    return out;
}

/// Saliency with the current parameters, ascending sort, then bottom-k masking.
inline MaskedInput compute_and_mask(const NetworkParams& params, const Tensor& x, int label,
                                    const MaskSpec& spec, Rng& rng) {
    const auto order = sort_ascending(compute_saliency(params, x, label));
    return mask_bottom_k(x, order, spec, rng);
}

}  // namespace sga
