#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sga/binary_io.hpp"
#include "sga/errors.hpp"
#include "sga/objectives.hpp"
#include "sga/rng.hpp"
#include "sga/tensor.hpp"

namespace sga {

enum class Activation { relu };

/// Shape of a fully connected ReLU classifier. The output layer is linear
/// and emits logits.
struct NetworkSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims{64};
    std::size_t num_classes = 2;
    Activation activation = Activation::relu;

    void validate() const {
        if (input_dim == 0) throw ValidationError("network input_dim must be positive");
        if (hidden_dims.empty()) throw ValidationError("network needs at least one hidden layer");
        for (std::size_t h : hidden_dims) {
            if (h == 0) throw ValidationError("hidden layer widths must be positive");
        }
        if (num_classes < 2) throw ValidationError("network needs at least two classes");
    }

    /// input_dim, hidden..., num_classes
    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims{input_dim};
        dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
        dims.push_back(num_classes);
        return dims;
    }

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct LayerParams {
    Tensor weight;  // [out x in]
    Tensor bias;    // [out]

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct NetworkParams {
    NetworkSpec spec;
    std::vector<LayerParams> layers;

    /// Checks that layer shapes chain from input_dim through the hidden widths to num_classes.
    void validate() const {
        spec.validate();
        const auto dims = spec.layer_dims();
        if (layers.size() + 1 != dims.size()) throw ShapeError("layer count does not match network spec");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& w = layers[l].weight.shape();
            const auto& b = layers[l].bias.shape();
            if (w.size() != 2 || w[0] != dims[l + 1] || w[1] != dims[l]) {
                throw ShapeError("layer " + std::to_string(l) + " weight shape does not chain");
            }
            if (b.size() != 1 || b[0] != dims[l + 1]) {
                throw ShapeError("layer " + std::to_string(l) + " bias shape does not chain");
            }
        }
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
        return n;
    }

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Mean-over-batch parameter gradients, mirroring the layout of NetworkParams.
struct GradientBundle {
    std::vector<LayerParams> param_grads;
    double loss_value = 0.0;
};

namespace detail {

inline constexpr std::uint64_t kInitStream = 0x1417;

inline std::vector<LayerParams> zero_like(const NetworkParams& params) {
    std::vector<LayerParams> out;
    out.reserve(params.layers.size());
    for (const auto& layer : params.layers) {
        out.push_back({Tensor(layer.weight.shape()), Tensor(layer.bias.shape())});
    }
    return out;
}

/// Activations a_0 = x, a_1, ..., a_L = logits and hidden pre-activations of one sample.
struct SampleTrace {
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> pre;

    std::span<const double> logits() const { return act.back(); }
};

inline SampleTrace trace(const NetworkParams& params, std::span<const double> x) {
    SampleTrace t;
    t.act.emplace_back(x.begin(), x.end());
    const std::size_t last = params.layers.size() - 1;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& w = params.layers[l].weight;
        const auto& b = params.layers[l].bias;
        const std::size_t out_dim = w.rows();
        const std::size_t in_dim = w.cols();
        const std::vector<double>& a = t.act.back();
        std::vector<double> z(out_dim);
        for (std::size_t o = 0; o < out_dim; ++o) {
            double s = b[o];
            const auto w_row = w.row(o);
            for (std::size_t i = 0; i < in_dim; ++i) s += w_row[i] * a[i];
            z[o] = s;
        }
        if (l == last) {
            t.act.push_back(std::move(z));
        } else {
            std::vector<double> h(out_dim);
            for (std::size_t o = 0; o < out_dim; ++o) h[o] = z[o] > 0.0 ? z[o] : 0.0;
            t.pre.push_back(std::move(z));
            t.act.push_back(std::move(h));
        }
    }
    return t;
}

/// Back-propagates dL/dlogits through one traced sample. Adds parameter
/// gradients into `grads` when non-null; returns dL/dx when `want_input`.
inline std::vector<double> backward(const NetworkParams& params, const SampleTrace& t,
                                    std::vector<double> delta, std::vector<LayerParams>* grads,
                                    bool want_input) {
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const auto& w = params.layers[l].weight;
        const std::size_t out_dim = w.rows();
        const std::size_t in_dim = w.cols();
        const std::vector<double>& a = t.act[l];
        if (grads != nullptr) {
            auto& gw = (*grads)[l].weight;
            auto& gb = (*grads)[l].bias;
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double d = delta[o];
                gb[o] += d;
                auto g_row = gw.row(o);
                for (std::size_t i = 0; i < in_dim; ++i) g_row[i] += d * a[i];
            }
        }
        if (l == 0 && !want_input) break;
        std::vector<double> da(in_dim, 0.0);
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const auto w_row = w.row(o);
            for (std::size_t i = 0; i < in_dim; ++i) da[i] += w_row[i] * d;
        }
        if (l > 0) {
            // ReLU derivative at exactly 0 is 0.
            const std::vector<double>& z = t.pre[l - 1];
            for (std::size_t i = 0; i < in_dim; ++i) {
                if (!(z[i] > 0.0)) da[i] = 0.0;
            }
        }
        delta = std::move(da);
    }
    return want_input ? delta : std::vector<double>{};
}

struct SampleInputGrads {
    std::vector<double> clean;
    std::vector<double> paired;
};

/// Objective value of one (x, x') pair; accumulates parameter gradients and
/// optionally the input gradients. A zero KL weight skips the paired branch.
inline double sample_objective(const NetworkParams& params, std::span<const double> x, int label,
                               std::span<const double> x_prime, const ObjectiveSpec& objective,
                               std::vector<LayerParams>* grads, SampleInputGrads* input_grads) {
    const std::size_t classes = params.spec.num_classes;
    check_label(label, classes);
    const SampleTrace tx = trace(params, x);
    double value = 0.0;
    std::vector<double> d_clean(classes, 0.0);

    if (objective.ce_weight() != 0.0) {
        value += cross_entropy(tx.logits(), label);
        d_clean = cross_entropy_logit_grad(tx.logits(), label);
    }

    const double kl_weight = objective.kl_weight();
    const bool with_pair = objective.uses_pair() && kl_weight != 0.0;
    if (with_pair) {
        const SampleTrace tp = trace(params, x_prime);
        const KlLogitTerms kl = kl_from_logits(tx.logits(), tp.logits());
        value += kl_weight * kl.value;
        std::vector<double> d_pair(classes);
        for (std::size_t c = 0; c < classes; ++c) {
            d_clean[c] += kl_weight * kl.grad_anchor[c];
            d_pair[c] = kl_weight * kl.grad_target[c];
        }
        auto dxp = backward(params, tp, std::move(d_pair), grads, input_grads != nullptr);
        if (input_grads != nullptr) input_grads->paired = std::move(dxp);
    } else if (input_grads != nullptr) {
        input_grads->paired.assign(x.size(), 0.0);
    }
    auto dx = backward(params, tx, std::move(d_clean), grads, input_grads != nullptr);
    if (input_grads != nullptr) input_grads->clean = std::move(dx);
    return value;
}

inline void check_input(const NetworkParams& params, const Tensor& x) {
    if (x.rank() != 2 || x.cols() != params.spec.input_dim) {
        throw ShapeError("input has " + std::to_string(x.rank() == 2 ? x.cols() : x.size()) +
                         " features, network expects " + std::to_string(params.spec.input_dim));
    }
}

inline void check_single(const NetworkParams& params, const Tensor& x) {
    check_input(params, x);
    if (x.rows() != 1) throw ShapeError("expected a single sample (1 x input_dim)");
}

}  // namespace detail

/// Weights ~ U(-a, a) with a = sqrt(3 / fan_in), so Var = 1 / fan_in. Biases zero.
inline NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed, detail::kInitStream);
    NetworkParams params{spec, {}};
    const auto dims = spec.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t fan_in = dims[l];
        const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
        std::vector<double> w(dims[l + 1] * fan_in);
        for (double& v : w) v = rng.uniform(-a, a);
        params.layers.push_back({Tensor({dims[l + 1], fan_in}, std::move(w)), Tensor({dims[l + 1]})});
    }
    return params;
}

/// Logits for each row of x.
inline Tensor forward(const NetworkParams& params, const Tensor& x) {
    detail::check_input(params, x);
    const std::size_t classes = params.spec.num_classes;
    std::vector<double> out;
    out.reserve(x.rows() * classes);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto t = detail::trace(params, x.row(r));
        out.insert(out.end(), t.act.back().begin(), t.act.back().end());
    }
    return Tensor({x.rows(), classes}, std::move(out));
}

/// Mean objective over the batch and its exact gradient with respect to every
/// parameter. `paired` supplies x' row-by-row when the objective has a KL term.
inline GradientBundle loss_and_param_grads(const NetworkParams& params, const Tensor& x,
                                           std::span<const int> labels, const ObjectiveSpec& objective,
                                           const Tensor* paired = nullptr) {
    detail::check_input(params, x);
    objective.validate();
    if (labels.size() != x.rows()) throw ShapeError("label count does not match batch size");
    if (objective.uses_pair()) {
        if (paired == nullptr) throw ValidationError("objective needs a paired input batch");
        if (paired->shape() != x.shape()) throw ShapeError("paired batch shape differs from x");
    }
    for (int y : labels) check_label(y, params.spec.num_classes);

    GradientBundle out{detail::zero_like(params), 0.0};
    const std::span<const double> none;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        out.loss_value += detail::sample_objective(params, x.row(r), labels[r],
                                                   paired ? paired->row(r) : none, objective,
                                                   &out.param_grads, nullptr);
    }
    const double m = static_cast<double>(x.rows());
    out.loss_value /= m;
    for (auto& layer : out.param_grads) {
        for (double& g : layer.weight.data()) g /= m;
        for (double& g : layer.bias.data()) g /= m;
    }
    return out;
}

/// Cross-entropy only.
inline GradientBundle loss_and_param_grads(const NetworkParams& params, const Tensor& x,
                                           std::span<const int> labels) {
    return loss_and_param_grads(params, x, labels, ObjectiveSpec::cross_entropy());
}

/// Gradient of the `label` logit with respect to the input (signed).
inline Tensor input_gradient(const NetworkParams& params, const Tensor& x, int label) {
    detail::check_single(params, x);
    check_label(label, params.spec.num_classes);
    const auto t = detail::trace(params, x.row(0));
    std::vector<double> seed(params.spec.num_classes, 0.0);
    seed[static_cast<std::size_t>(label)] = 1.0;
    return Tensor::row_vector(detail::backward(params, t, std::move(seed), nullptr, true));
}

/// Gradient of the cross-entropy loss with respect to the input.
inline Tensor input_gradient_of_loss(const NetworkParams& params, const Tensor& x, int label) {
    detail::check_single(params, x);
    const auto t = detail::trace(params, x.row(0));
    return Tensor::row_vector(
        detail::backward(params, t, cross_entropy_logit_grad(t.logits(), label), nullptr, true));
}

struct PairInputGradients {
    double value = 0.0;
    Tensor clean;   // d objective / d x
    Tensor paired;  // d objective / d x'
};

/// Objective value and input gradients for a single (x, x') pair.
inline PairInputGradients objective_input_gradients(const NetworkParams& params, const Tensor& x,
                                                    int label, const Tensor& x_prime,
                                                    const ObjectiveSpec& objective) {
    detail::check_single(params, x);
    detail::check_single(params, x_prime);
    objective.validate();
    detail::SampleInputGrads g;
    const double v = detail::sample_objective(params, x.row(0), label, x_prime.row(0), objective,
                                              nullptr, &g);
    return {v, Tensor::row_vector(std::move(g.clean)), Tensor::row_vector(std::move(g.paired))};
}

/// CE(f(x), y) + lambda * KL(softmax f(x) || softmax f(x')) for one sample.
inline double sga_objective(const NetworkParams& params, const Tensor& x, int label,
                            const Tensor& x_prime, double lambda) {
    detail::check_single(params, x);
    if (x_prime.shape() != x.shape()) throw ShapeError("x and x' must have the same shape");
    const ObjectiveSpec objective = ObjectiveSpec::composite(lambda);
    objective.validate();
    return detail::sample_objective(params, x.row(0), label, x_prime.row(0), objective, nullptr,
                                    nullptr);
}

/// Returns params - lr * grads; the input is left untouched.
inline NetworkParams sgd_step(const NetworkParams& params, const GradientBundle& grads, double lr) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("learning rate must be finite and >= 0");
    if (grads.param_grads.size() != params.layers.size()) throw ShapeError("gradient layer count mismatch");
    NetworkParams next = params;
    for (std::size_t l = 0; l < next.layers.size(); ++l) {
        auto& layer = next.layers[l];
        const auto& g = grads.param_grads[l];
        if (g.weight.shape() != layer.weight.shape() || g.bias.shape() != layer.bias.shape()) {
            throw ShapeError("gradient shape mismatch in layer " + std::to_string(l));
        }
        auto w = layer.weight.data();
        auto gw = g.weight.data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
        auto b = layer.bias.data();
        auto gb = g.bias.data();
        for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * gb[i];
    }
    return next;
}

// Model file: "SGAM", u32 version, u32 input_dim, u32 hidden count, u32 each
// hidden width, u32 num_classes, then per layer weight and bias as f64,
// row-major, little-endian.

inline constexpr std::string_view kModelMagic = "SGAM";
inline constexpr std::uint32_t kModelVersion = 1;

inline std::vector<char> encode_model(const NetworkParams& params) {
    params.validate();
    io::ByteWriter w;
    w.bytes(kModelMagic);
    w.u32(kModelVersion);
    w.u32(static_cast<std::uint32_t>(params.spec.input_dim));
    w.u32(static_cast<std::uint32_t>(params.spec.hidden_dims.size()));
    for (std::size_t h : params.spec.hidden_dims) w.u32(static_cast<std::uint32_t>(h));
    w.u32(static_cast<std::uint32_t>(params.spec.num_classes));
    for (const auto& layer : params.layers) {
        for (double v : layer.weight.data()) w.f64(v);
        for (double v : layer.bias.data()) w.f64(v);
    }
    return w.buffer();
}

inline NetworkParams decode_model(io::ByteReader r) {
    r.expect_magic(kModelMagic);
    const std::uint32_t version = r.u32("version");
    if (version != kModelVersion) {
        throw FormatError(FormatError::Kind::bad_version,
                          r.where() + "unsupported model version " + std::to_string(version));
    }
    NetworkSpec spec;
    spec.input_dim = r.u32("input_dim");
    const std::uint32_t hidden = r.u32("hidden layer count");
    if (hidden > 1024) throw FormatError(FormatError::Kind::corrupt, r.where() + "implausible hidden layer count");
    spec.hidden_dims.clear();
    for (std::uint32_t i = 0; i < hidden; ++i) spec.hidden_dims.push_back(r.u32("hidden width"));
    spec.num_classes = r.u32("num_classes");
    try {
        spec.validate();
    } catch (const ValidationError& e) {
        throw FormatError(FormatError::Kind::corrupt, r.where() + e.what());
    }
    const auto dims = spec.layer_dims();
    std::size_t expected_bytes = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) expected_bytes += 8 * (dims[l + 1] * dims[l] + dims[l + 1]);
    if (r.remaining() < expected_bytes) {
        throw FormatError(FormatError::Kind::truncated, r.where() + "file truncated while reading layer weights");
    }
    NetworkParams params{spec, {}};
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        std::vector<double> w(dims[l + 1] * dims[l]);
        for (double& v : w) v = r.f64("weight");
        std::vector<double> b(dims[l + 1]);
        for (double& v : b) v = r.f64("bias");
        try {
            params.layers.push_back({Tensor({dims[l + 1], dims[l]}, std::move(w)), Tensor({dims[l + 1]}, std::move(b))});
        } catch (const ValidationError& e) {
            throw FormatError(FormatError::Kind::corrupt, r.where() + e.what());
        }
    }
    r.expect_end();
    return params;
}

inline void save_model(const NetworkParams& params, const std::filesystem::path& path) {
    io::write_bytes(path, encode_model(params));
}

inline NetworkParams load_model(const std::filesystem::path& path) {
    return decode_model(io::ByteReader::from_file(path));
}

}  // namespace sga
