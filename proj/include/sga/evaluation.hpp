#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sga/csv.hpp"
#include "sga/datasets.hpp"
#include "sga/errors.hpp"
#include "sga/network.hpp"
#include "sga/objectives.hpp"
#include "sga/saliency_mask.hpp"

namespace sga {

namespace detail {

struct ClassCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

inline ClassCounts check_scored(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeError("score and label counts differ");
    ClassCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            ++c.positives;
        } else if (labels[i] == 0) {
            ++c.negatives;
        } else {
            throw ValidationError("AUROC labels must be 0 or 1");
        }
        if (!std::isfinite(scores[i])) throw ValidationError("AUROC scores must be finite");
    }
    if (c.positives == 0 || c.negatives == 0) {
        throw ValidationError("AUROC needs both classes (positives=" + std::to_string(c.positives) +
                              ", negatives=" + std::to_string(c.negatives) + ")");
    }
    return c;
}

/// Indices sorted by score, ascending.
inline std::vector<std::size_t> score_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    return order;
}

}  // namespace detail

/// Probability that a random positive outscores a random negative; ties count one half.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
    const auto counts = detail::check_scored(scores, labels);
    const auto order = detail::score_order(scores);
    // Twice the Mann-Whitney U statistic, kept integral so the result is exact.
    std::uint64_t twice_u = 0;
    std::uint64_t negatives_below = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        std::uint64_t pos = 0, neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? pos : neg) += 1;
            ++j;
        }
        twice_u += pos * (2 * negatives_below + neg);
        negatives_below += neg;
        i = j;
    }
    return static_cast<double>(twice_u) /
           (2.0 * static_cast<double>(counts.positives) * static_cast<double>(counts.negatives));
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

/// ROC staircase from (0,0) to (1,1), one point per distinct score threshold.
inline std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels) {
    const auto counts = detail::check_scored(scores, labels);
    auto order = detail::score_order(scores);
    std::reverse(order.begin(), order.end());
    std::vector<RocPoint> points{{0.0, 0.0}};
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? tp : fp) += 1;
            ++j;
        }
        points.push_back({static_cast<double>(fp) / static_cast<double>(counts.negatives),
                          static_cast<double>(tp) / static_cast<double>(counts.positives)});
        i = j;
    }
    return points;
}

inline double trapezoid_area(std::span<const RocPoint> points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
    }
    return area;
}

/// Relative IID-to-OOD drop, (iid - ood) / iid. Negative means OOD improved.
inline double degradation(double auroc_iid, double auroc_ood) {
    if (!(auroc_iid > 0.0)) throw ValidationError("degradation needs auroc_iid > 0");
    return (auroc_iid - auroc_ood) / auroc_iid;
}

/// Fraction of the ceil(q * d) largest-|saliency| features that fall inside the mask.
inline double saliency_overlap(const SaliencyMap& saliency, std::span<const std::uint8_t> relevant_mask, double q) {
    if (!(q > 0.0 && q <= 1.0)) throw ValidationError("overlap quantile q must lie in (0, 1]");
    const auto v = saliency.values.data();
    if (relevant_mask.size() != v.size()) throw ShapeError("relevant mask length differs from saliency length");
    if (std::none_of(relevant_mask.begin(), relevant_mask.end(), [](std::uint8_t m) { return m != 0; })) {
        throw ValidationError("relevant mask is empty");
    }
    const std::size_t d = v.size();
    const auto top = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(q * static_cast<double>(d) - 1e-9)));
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(v[a]) > std::abs(v[b]); });
    std::size_t hits = 0;
    for (std::size_t k = 0; k < top; ++k) hits += relevant_mask[order[k]] != 0 ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(top);
}

struct EvalReport {
    double auroc_iid = 0.0;
    double auroc_ood = 0.0;
    double difference = 0.0;  // ood - iid
    double relative_degradation = 0.0;
    double average = 0.0;

    static EvalReport from(double iid, double ood) {
        return {iid, ood, ood - iid, degradation(iid, ood), (iid + ood) / 2.0};
    }

    static std::vector<std::string> csv_header() {
        return {"auroc_iid", "auroc_ood", "difference", "relative_degradation", "average"};
    }

    std::vector<std::string> csv_row() const {
        return {csv::number(auroc_iid), csv::number(auroc_ood), csv::number(difference),
                csv::number(relative_degradation), csv::number(average)};
    }
};

/// Softmax probability of class 1 for every row.
inline std::vector<double> positive_scores(const NetworkParams& params, const LabeledDataset& ds) {
    const Tensor logits = forward(params, ds.features);
    std::vector<double> scores(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) scores[i] = softmax(logits.row(i))[1];
    return scores;
}

inline double dataset_auroc(const NetworkParams& params, const LabeledDataset& ds) {
    return auroc(positive_scores(params, ds), ds.labels);
}

inline double accuracy(const NetworkParams& params, const LabeledDataset& ds) {
    const Tensor logits = forward(params, ds.features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto row = logits.row(i);
        const int pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        correct += pred == ds.labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

inline EvalReport evaluate(const NetworkParams& params, const LabeledDataset& test_iid, const LabeledDataset& test_ood) {
    if (test_iid.dim() != params.spec.input_dim || test_ood.dim() != params.spec.input_dim) {
        throw ShapeError("model input_dim " + std::to_string(params.spec.input_dim) +
                         " does not match test set feature count");
    }
    return EvalReport::from(dataset_auroc(params, test_iid), dataset_auroc(params, test_ood));
}

/// Mean saliency_overlap over a dataset, saliency taken for each sample's true label.
inline double mean_saliency_overlap(const NetworkParams& params, const LabeledDataset& ds, double q) {
    double total = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Tensor x = Tensor::row_vector({ds.features.row(i).begin(), ds.features.row(i).end()});
        total += saliency_overlap(compute_saliency(params, x, ds.labels[i]), ds.relevant_mask, q);
    }
    return total / static_cast<double>(ds.size());
}

inline void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
    csv::write(path, EvalReport::csv_header(), {report.csv_row()});
}

inline void write_roc_csv(std::span<const RocPoint> points, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(points.size());
    for (const auto& p : points) rows.push_back({csv::number(p.fpr), csv::number(p.tpr)});
    csv::write(path, {"fpr", "tpr"}, rows);
}

}  // namespace sga
