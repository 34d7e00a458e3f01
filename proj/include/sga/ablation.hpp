#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sga/csv.hpp"
#include "sga/datasets.hpp"
#include "sga/errors.hpp"
#include "sga/evaluation.hpp"
#include "sga/trainer.hpp"

namespace sga {

enum class AblationParameter { k_fraction, lambda };

inline std::string_view to_string(AblationParameter p) {
    return p == AblationParameter::k_fraction ? "k" : "lambda";
}

inline AblationParameter parse_ablation_parameter(std::string_view s) {
    if (s == "k" || s == "k_fraction") return AblationParameter::k_fraction;
    if (s == "lambda") return AblationParameter::lambda;
    throw ValidationError("unknown ablation parameter '" + std::string(s) + "' (expected k or lambda)");
}

inline std::vector<double> default_grid(AblationParameter p) {
    if (p == AblationParameter::k_fraction) return {0.0, 0.05, 0.1, 0.15, 0.2};
    return {0.0, 0.5, 1.0, 1.5, 2.0};
}

inline std::vector<std::uint64_t> default_seeds() { return {0, 1, 2, 3, 4}; }

struct AblationData {
    const LabeledDataset& train;
    const LabeledDataset& val;
    const LabeledDataset& test_iid;
    const LabeledDataset& test_ood;
};

struct AblationCell {
    double value = 0.0;
    std::uint64_t seed = 0;
    EvalReport report;
};

struct AblationRow {
    double value = 0.0;
    EvalReport median;  // median IID and OOD over seeds; other fields derived from those
};

struct AblationReport {
    AblationParameter parameter = AblationParameter::k_fraction;
    std::vector<double> values;
    std::vector<AblationCell> cells;  // value-major, seeds in input order
    std::vector<AblationRow> rows;
    double best_value = 0.0;
    // Explicit AT runs, one per seed, trained when a k sweep includes k = 0.
    std::vector<AblationCell> at_reference;

    void write_cells_csv(const std::filesystem::path& path) const {
        std::vector<std::vector<std::string>> out;
        for (const auto& c : cells) out.push_back(cell_row(std::string(to_string(parameter)), c));
        csv::write(path, cell_header(), out);
    }

    void write_table_csv(const std::filesystem::path& path) const {
        std::vector<std::string> header{"metric"};
        for (const auto& r : rows) header.push_back(csv::number(r.value));
        std::vector<std::vector<std::string>> out;
        const auto line = [&](std::string name, double EvalReport::*field) {
            std::vector<std::string> row{std::move(name)};
            for (const auto& r : rows) row.push_back(csv::number(r.median.*field));
            out.push_back(std::move(row));
        };
        line("IID Test", &EvalReport::auroc_iid);
        line("OOD Test", &EvalReport::auroc_ood);
        line("Difference", &EvalReport::difference);
        line("Average", &EvalReport::average);
        csv::write(path, header, out);
    }

    void write_reference_csv(const std::filesystem::path& path) const {
        std::vector<std::vector<std::string>> out;
        for (const auto& c : at_reference) out.push_back(cell_row("at", c));
        csv::write(path, cell_header(), out);
    }

  private:
    static std::vector<std::string> cell_header() {
        return {"parameter", "value", "seed", "auroc_iid", "auroc_ood", "difference", "average"};
    }

    static std::vector<std::string> cell_row(std::string name, const AblationCell& c) {
        return {std::move(name), csv::number(c.value), std::to_string(c.seed), csv::number(c.report.auroc_iid),
                csv::number(c.report.auroc_ood), csv::number(c.report.difference), csv::number(c.report.average)};
    }
};

inline double median(std::vector<double> v) {
    if (v.empty()) throw ValidationError("median of an empty sequence");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Largest average AUROC; ties go to the smaller value.
inline double best_by_average(std::span<const AblationRow> rows) {
    if (rows.empty()) throw ValidationError("no ablation rows");
    const AblationRow* best = &rows.front();
    for (const auto& r : rows.subspan(1)) {
        if (r.median.average > best->median.average ||
            (r.median.average == best->median.average && r.value < best->value)) {
            best = &r;
        }
    }
    return best->value;
}

inline TrainConfig with_value(TrainConfig config, AblationParameter parameter, double value) {
    if (parameter == AblationParameter::k_fraction) {
        config.k_fraction = value;
    } else {
        config.lambda = value;
    }
    return config;
}

inline EvalReport run_cell(const TrainConfig& config, const AblationData& data) {
    const TrainResult result = train(config, data.train, data.val);
    return evaluate(result.params, data.test_iid, data.test_ood);
}

/// Trains one model per (value, seed) and aggregates by the per-value median.
inline AblationReport ablate(const TrainConfig& base, AblationParameter parameter, std::span<const double> values,
                             std::span<const std::uint64_t> seeds, const AblationData& data) {
    if (values.empty()) throw ValidationError("ablation needs at least one value");
    if (seeds.empty()) throw ValidationError("ablation needs at least one seed");
    if (base.method == Method::nt || base.method == Method::at) {
        throw ValidationError("ablation of " + std::string(to_string(parameter)) + " needs method sg or sga");
    }
    for (double v : values) with_value(base, parameter, v).validate();

    AblationReport report;
    report.parameter = parameter;
    report.values.assign(values.begin(), values.end());
    for (double v : values) {
        std::vector<double> iid, ood;
        for (std::uint64_t seed : seeds) {
            TrainConfig config = with_value(base, parameter, v);
            config.seed = seed;
            const EvalReport r = run_cell(config, data);
            report.cells.push_back({v, seed, r});
            iid.push_back(r.auroc_iid);
            ood.push_back(r.auroc_ood);
        }
        report.rows.push_back({v, EvalReport::from(median(iid), median(ood))});
    }
    report.best_value = best_by_average(report.rows);

    const bool has_zero_k = parameter == AblationParameter::k_fraction &&
                            std::find(values.begin(), values.end(), 0.0) != values.end();
    if (has_zero_k) {
        for (std::uint64_t seed : seeds) {
            TrainConfig config = base;
            config.method = Method::at;
            config.seed = seed;
            report.at_reference.push_back({0.0, seed, run_cell(config, data)});
        }
    }
    return report;
}

}  // namespace sga
