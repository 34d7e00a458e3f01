#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sga/errors.hpp"

namespace sga {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    int max_value = 255;
    std::vector<int> pixels;  // row-major

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// 255 * (|s| - min) / (max - min), rounded half away from zero, where min and
/// max range over |s|. A constant map gives all zeros.
inline std::vector<int> heat_levels(std::span<const double> saliency) {
    std::vector<double> mag(saliency.size());
    std::transform(saliency.begin(), saliency.end(), mag.begin(), [](double v) { return std::abs(v); });
    std::vector<int> out(mag.size(), 0);
    if (mag.empty()) return out;
    const auto [lo, hi] = std::minmax_element(mag.begin(), mag.end());
    const double min = *lo, range = *hi - *lo;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < mag.size(); ++i) {
        out[i] = static_cast<int>(std::round(255.0 * (mag[i] - min) / range));
    }
    return out;
}

inline GrayImage heatmap(std::span<const double> saliency, std::size_t side) {
    if (side == 0 || saliency.size() != side * side) {
        throw ShapeError("saliency of length " + std::to_string(saliency.size()) + " is not a " +
                         std::to_string(side) + "x" + std::to_string(side) + " image");
    }
    return {side, side, 255, heat_levels(saliency)};
}

/// ASCII (P2) PGM, one image row per line.
inline std::string encode_pgm(const GrayImage& img) {
    std::string out = "P2\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                      std::to_string(img.max_value) + "\n";
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            if (c) out += ' ';
            out += std::to_string(img.pixels[r * img.width + c]);
        }
        out += '\n';
    }
    return out;
}

inline GrayImage decode_pgm(const std::string& text) {
    std::istringstream in(text);
    std::string magic;
    GrayImage img;
    if (!(in >> magic) || magic != "P2") throw FormatError(FormatError::Kind::bad_magic, "expected PGM magic \"P2\"");
    if (!(in >> img.width >> img.height >> img.max_value) || img.max_value <= 0) {
        throw FormatError(FormatError::Kind::corrupt, "bad PGM header");
    }
    img.pixels.resize(img.width * img.height);
    for (int& p : img.pixels) {
        if (!(in >> p)) throw FormatError(FormatError::Kind::truncated, "PGM pixel data ends early");
        if (p < 0 || p > img.max_value) throw FormatError(FormatError::Kind::corrupt, "PGM pixel out of range");
    }
    return img;
}

inline void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "' for writing");
    out << encode_pgm(img);
    if (!out) throw FormatError(FormatError::Kind::io, "failed writing '" + path.string() + "'");
}

inline GrayImage load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return decode_pgm(buf.str());
}

}  // namespace sga
