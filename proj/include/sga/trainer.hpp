#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sga/adversary.hpp"
#include "sga/csv.hpp"
#include "sga/datasets.hpp"
#include "sga/errors.hpp"
#include "sga/evaluation.hpp"
#include "sga/network.hpp"
#include "sga/objectives.hpp"
#include "sga/rng.hpp"
#include "sga/saliency_mask.hpp"

namespace sga {

/// Training scheme.
///  - nt:  cross-entropy on clean inputs
///  - at:  cross-entropy on FGSM-perturbed clean inputs
///  - sg:  CE(x) + lambda * KL(f(x) || f(masked x))
///  - sga: CE(x) + lambda * KL(f(x) || f(masked x + FGSM delta))
enum class Method { nt, at, sg, sga };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::nt: return "nt";
        case Method::at: return "at";
        case Method::sg: return "sg";
        case Method::sga: return "sga";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    if (s == "nt") return Method::nt;
    if (s == "at") return Method::at;
    if (s == "sg") return Method::sg;
    if (s == "sga") return Method::sga;
    throw ValidationError("unknown method '" + std::string(s) + "' (expected nt, at, sg or sga)");
}

struct TrainConfig {
    Method method = Method::sga;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double k_fraction = 0.1;
    double lambda = 1.0;
    double epsilon_low = 0.01;
    double epsilon_high = 0.05;
    // Valid feature range: masking draws from it and perturbed inputs are clamped to it.
    double feature_low = 0.0;
    double feature_high = 1.0;
    std::uint64_t seed = 0;
    NetworkSpec network;

    void validate() const {
        network.validate();
        if (epochs == 0) throw ValidationError("epochs must be positive");
        if (batch_size == 0) throw ValidationError("batch_size must be positive");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
        mask_spec().validate();
        attack_spec().validate();
        objective().validate();
    }

    MaskSpec mask_spec() const { return {k_fraction, feature_low, feature_high}; }

    AttackSpec attack_spec() const {
        return {NormOrder::inf, epsilon_low, epsilon_high, feature_low, feature_high};
    }

    ObjectiveSpec objective() const { return ObjectiveSpec::composite(lambda); }
};

struct Batch {
    Tensor features;
    std::vector<int> labels;
};

namespace detail {

inline constexpr std::uint64_t kShuffleStream = 0x5a;
inline constexpr std::uint64_t kStepStream = 0x5b;

inline Tensor sample_row(const Tensor& x, std::size_t r) {
    return Tensor::row_vector({x.row(r).begin(), x.row(r).end()});
}

/// Builds the paired batch row by row from a per-sample transform.
template <typename Fn>
Tensor paired_batch(const Batch& batch, Fn&& make_pair) {
    std::vector<double> out;
    out.reserve(batch.features.size());
    for (std::size_t r = 0; r < batch.features.rows(); ++r) {
        const Tensor xp = make_pair(sample_row(batch.features, r), batch.labels[r]);
        out.insert(out.end(), xp.data().begin(), xp.data().end());
    }
    return Tensor(batch.features.shape(), std::move(out));
}

}  // namespace detail

/// Plain cross-entropy gradient on the clean batch.
inline GradientBundle nt_step(const NetworkParams& params, const Batch& batch, const TrainConfig&, Rng&) {
    return loss_and_param_grads(params, batch.features, batch.labels);
}

/// Cross-entropy on x + FGSM delta; one epsilon per minibatch.
inline GradientBundle at_step(const NetworkParams& params, const Batch& batch, const TrainConfig& config, Rng& rng) {
    const AttackSpec attack = config.attack_spec();
    const double eps = sample_epsilon(rng, attack);
    const Tensor adv = detail::paired_batch(batch, [&](const Tensor& x, int y) {
        return apply_perturbation(x, fgsm(params, x, y, eps), attack);
    });
    return loss_and_param_grads(params, adv, batch.labels);
}

/// CE(x) + lambda * KL(f(x) || f(x~)) with x~ the bottom-k masked input.
inline GradientBundle sg_step(const NetworkParams& params, const Batch& batch, const TrainConfig& config, Rng& rng) {
    const MaskSpec mask = config.mask_spec();
    const Tensor masked = detail::paired_batch(batch, [&](const Tensor& x, int y) {
        return compute_and_mask(params, x, y, mask, rng).data;
    });
    return loss_and_param_grads(params, batch.features, batch.labels, config.objective(), &masked);
}

/// One minibatch of saliency-guided adversarial training: per sample, mask
/// the lowest-saliency features using the current parameters, perturb the
/// masked input with FGSM, then take CE(x) + lambda * KL(f(x) || f(x')).
inline GradientBundle sga_step(const NetworkParams& params, const Batch& batch, const TrainConfig& config, Rng& rng) {
    const MaskSpec mask = config.mask_spec();
    const AttackSpec attack = config.attack_spec();
    const double eps = sample_epsilon(rng, attack);
    const Tensor adv = detail::paired_batch(batch, [&](const Tensor& x, int y) {
        const MaskedInput x_tilde = compute_and_mask(params, x, y, mask, rng);
        return apply_perturbation(x_tilde, fgsm(params, x_tilde, y, eps), attack);
    });
    return loss_and_param_grads(params, batch.features, batch.labels, config.objective(), &adv);
}

inline GradientBundle method_step(const NetworkParams& params, const Batch& batch, const TrainConfig& config, Rng& rng) {
    switch (config.method) {
        case Method::nt: return nt_step(params, batch, config, rng);
        case Method::at: return at_step(params, batch, config, rng);
        case Method::sg: return sg_step(params, batch, config, rng);
        case Method::sga: return sga_step(params, batch, config, rng);
    }
    throw ValidationError("unknown training method");
}

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_auroc = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::size_t selected_epoch = 0;  // 1-based; first maximum of val_auroc

    void write_csv(const std::filesystem::path& path) const {
        std::vector<std::vector<std::string>> rows;
        for (const auto& e : epochs) {
            rows.push_back({std::to_string(e.epoch), csv::number(e.train_loss), csv::number(e.val_auroc),
                            e.epoch == selected_epoch ? "1" : "0"});
        }
        csv::write(path, {"epoch", "train_loss", "val_auroc", "selected"}, rows);
    }
};

struct TrainResult {
    NetworkParams params;  // best-validation checkpoint
    TrainLog log;
    NetworkParams final_params;
};

/// Shuffled partition of [0, n) into batches of `batch_size`; the short tail batch is kept.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

/// Minibatch SGD over `config.epochs`, selecting the epoch with the best
/// validation AUROC. Shuffling and the per-step randomness (epsilon and mask
/// values) draw from separate seeded streams, so methods whose steps
/// coincide produce identical trajectories.
inline TrainResult train(const TrainConfig& config, const LabeledDataset& train_set, const LabeledDataset& val_set) {
    config.validate();
    if (train_set.size() == 0 || val_set.size() == 0) throw ValidationError("training and validation sets must be non-empty");
    if (train_set.dim() != config.network.input_dim || val_set.dim() != config.network.input_dim) {
        throw ShapeError("dataset feature count does not match network input_dim " +
                         std::to_string(config.network.input_dim));
    }
    if (val_set.count_label(0) == 0 || val_set.count_label(1) == 0) {
        throw ValidationError("validation set needs both classes for AUROC-based selection");
    }

    NetworkParams params = init_params(config.network, config.seed);
    Rng shuffle_rng(config.seed, detail::kShuffleStream);
    Rng step_rng(config.seed, detail::kStepStream);

    TrainResult result{params, {}, params};
    std::optional<double> best;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (const auto& rows : epoch_batches(train_set.size(), config.batch_size, shuffle_rng)) {
            Batch batch{gather_rows(train_set.features, rows), {}};
            batch.labels.reserve(rows.size());
            for (std::size_t r : rows) batch.labels.push_back(train_set.labels[r]);
            const GradientBundle grads = method_step(params, batch, config, step_rng);
            if (!std::isfinite(grads.loss_value)) {
                throw NumericError(epoch, "non-finite training loss in epoch " + std::to_string(epoch));
            }
            params = sgd_step(params, grads, config.learning_rate);
            loss_sum += grads.loss_value * static_cast<double>(rows.size());
        }
        for (const auto& layer : params.layers) {
            for (const Tensor* t : {&layer.weight, &layer.bias}) {
                for (double v : t->data()) {
                    if (!std::isfinite(v)) throw NumericError(epoch, "non-finite parameters after epoch " + std::to_string(epoch));
                }
            }
        }
        const double val = dataset_auroc(params, val_set);
        result.log.epochs.push_back({epoch, loss_sum / static_cast<double>(train_set.size()), val});
        if (!best || val > *best) {
            best = val;
            result.log.selected_epoch = epoch;
            result.params = params;
        }
    }
    result.final_params = std::move(params);
    return result;
}

}  // namespace sga
