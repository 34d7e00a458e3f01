#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sga/csv.hpp"
#include "sga/datasets.hpp"
#include "sga/errors.hpp"
#include "sga/trainer.hpp"

namespace sga {

/// Everything a CLI run depends on, as a flat `key = value` file.
struct RunConfig {
    TrainConfig train;
    SyntheticSpec data;
    std::filesystem::path data_dir = "data";
    std::filesystem::path model_path = "model.sgam";
    std::filesystem::path out_dir = "out";

    /// TrainConfig with the network input width taken from the image size.
    TrainConfig resolved_train() const {
        TrainConfig t = train;
        t.network.input_dim = data.dim();
        return t;
    }

    void validate() const {
        data.validate();
        resolved_train().validate();
    }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ValidationError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(parse_u64(key, v));
}

inline double parse_real(const std::string& key, const std::string& v) {
    try {
        return csv::parse_number(v);
    } catch (const ValidationError&) {
        throw ValidationError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (const auto& part : csv::split_line(v)) out.push_back(parse_size(key, trim(part)));
    return out;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field size_field(std::string key, T RunConfig::*group, std::size_t T::*member) {
    return {key, [=](const RunConfig& c) { return std::to_string(c.*group.*member); },
            [=](RunConfig& c, const std::string& v) { c.*group.*member = parse_size(key, v); }};
}

template <typename T>
Field real_field(std::string key, T RunConfig::*group, double T::*member) {
    return {key, [=](const RunConfig& c) { return csv::number(c.*group.*member); },
            [=](RunConfig& c, const std::string& v) { c.*group.*member = parse_real(key, v); }};
}

inline Field path_field(std::string key, std::filesystem::path RunConfig::*member) {
    return {key, [=](const RunConfig& c) { return (c.*member).generic_string(); },
            [=](RunConfig& c, const std::string& v) {
                if (v.empty()) throw ValidationError("config key '" + key + "' must not be empty");
                c.*member = v;
            }};
}

inline Field rect_field(std::string key, std::size_t Rect::*member) {
    return {key, [=](const RunConfig& c) { return std::to_string(c.data.core_region.*member); },
            [=](RunConfig& c, const std::string& v) { c.data.core_region.*member = parse_size(key, v); }};
}

inline const std::vector<Field>& fields() {
    using R = RunConfig;
    using T = TrainConfig;
    using S = SyntheticSpec;
    static const std::vector<Field> all = {
        {"method", [](const R& c) { return std::string(to_string(c.train.method)); },
         [](R& c, const std::string& v) { c.train.method = parse_method(v); }},
        size_field("epochs", &R::train, &T::epochs),
        size_field("batch_size", &R::train, &T::batch_size),
        real_field("learning_rate", &R::train, &T::learning_rate),
        real_field("k_fraction", &R::train, &T::k_fraction),
        real_field("lambda", &R::train, &T::lambda),
        real_field("epsilon_low", &R::train, &T::epsilon_low),
        real_field("epsilon_high", &R::train, &T::epsilon_high),
        real_field("feature_low", &R::train, &T::feature_low),
        real_field("feature_high", &R::train, &T::feature_high),
        {"seed", [](const R& c) { return std::to_string(c.train.seed); },
         [](R& c, const std::string& v) { c.train.seed = parse_u64("seed", v); }},
        {"hidden_dims", [](const R& c) { return join_sizes(c.train.network.hidden_dims); },
         [](R& c, const std::string& v) { c.train.network.hidden_dims = parse_sizes("hidden_dims", v); }},
        size_field("side", &R::data, &S::side),
        size_field("n_per_class", &R::data, &S::n_per_class),
        size_field("n_ood_per_class", &R::data, &S::n_ood_per_class),
        rect_field("core_row", &Rect::row),
        rect_field("core_col", &Rect::col),
        rect_field("core_rows", &Rect::rows),
        rect_field("core_cols", &Rect::cols),
        size_field("shortcut_size", &R::data, &S::shortcut_size),
        real_field("background", &R::data, &S::background),
        real_field("signal_strength", &R::data, &S::signal_strength),
        real_field("clutter_strength", &R::data, &S::clutter_strength),
        real_field("shortcut_strength", &R::data, &S::shortcut_strength),
        real_field("shortcut_train_correlation", &R::data, &S::shortcut_train_correlation),
        real_field("shortcut_ood_correlation", &R::data, &S::shortcut_ood_correlation),
        real_field("noise_sigma", &R::data, &S::noise_sigma),
        real_field("ood_negative_noise_scale", &R::data, &S::ood_negative_noise_scale),
        {"data_seed", [](const R& c) { return std::to_string(c.data.seed); },
         [](R& c, const std::string& v) { c.data.seed = parse_u64("data_seed", v); }},
        path_field("data_dir", &R::data_dir),
        path_field("model_path", &R::model_path),
        path_field("out_dir", &R::out_dir),
    };
    return all;
}

}  // namespace config_detail

/// Parses `key = value` lines. Blank lines and '#' comments are skipped;
/// unknown or repeated keys are errors. Missing keys keep their defaults.
inline RunConfig parse_run_config(std::string_view text) {
    std::map<std::string, const config_detail::Field*> by_key;
    for (const auto& f : config_detail::fields()) by_key[f.key] = &f;

    RunConfig config;
    std::map<std::string, std::size_t> seen;
    std::istringstream in{std::string(text)};
    std::string raw;
    for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
        const auto hash = raw.find('#');
        const std::string line = config_detail::trim(std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = "config line " + std::to_string(line_no);
        if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
        const std::string key = config_detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = config_detail::trim(std::string_view(line).substr(eq + 1));
        const auto it = by_key.find(key);
        if (it == by_key.end()) throw ValidationError(where + ": unknown key '" + key + "'");
        if (auto [prev, fresh] = seen.emplace(key, line_no); !fresh) {
            throw ValidationError(where + ": key '" + key + "' already set on line " + std::to_string(prev->second));
        }
        it->second->set(config, value);
    }
    return config;
}

/// Every key, one per line, in a form parse_run_config reads back to the same values.
inline std::string emit_run_config(const RunConfig& config) {
    std::string out;
    for (const auto& f : config_detail::fields()) out += f.key + " = " + f.get(config) + "\n";
    return out;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatError::Kind::io, "cannot open config '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

}  // namespace sga
