#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sga/binary_io.hpp"
#include "sga/errors.hpp"
#include "sga/rng.hpp"
#include "sga/tensor.hpp"

namespace sga {

/// Binary-labelled feature matrix with ground-truth feature annotations.
struct LabeledDataset {
    Tensor features;                            // [N x d], entries in [0, 1]
    std::vector<int> labels;                    // 0 or 1
    std::vector<std::uint8_t> relevant_mask;    // length d, 1 = task-relevant feature
    std::vector<std::size_t> shortcut_indices;  // ascending
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }

    void validate() const {
        if (features.rank() != 2) throw ShapeError("dataset features must be a matrix");
        const std::size_t d = features.cols();
        if (labels.size() != features.rows()) throw ShapeError("dataset label count differs from row count");
        if (relevant_mask.size() != d) throw ShapeError("relevant_mask length differs from feature count");
        for (int y : labels) {
            if (y != 0 && y != 1) throw ValidationError("dataset labels must be 0 or 1");
        }
        for (std::size_t i : shortcut_indices) {
            if (i >= d) throw ValidationError("shortcut index out of range");
            if (relevant_mask[i] != 0) throw ValidationError("shortcut and relevant features overlap");
        }
        for (double v : features.data()) {
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("dataset features must lie in [0, 1]");
        }
    }

    LabeledDataset subset(std::span<const std::size_t> rows, std::string tag) const {
        LabeledDataset out{gather_rows(features, rows), {}, relevant_mask, shortcut_indices, std::move(tag)};
        out.labels.reserve(rows.size());
        for (std::size_t r : rows) out.labels.push_back(labels[r]);
        return out;
    }

    std::size_t count_label(int y) const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), y));
    }
};

/// Axis-aligned block of pixels on the side x side grid.
struct Rect {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    bool contains(std::size_t r, std::size_t c) const {
        return r >= row && r < row + rows && c >= col && c < col + cols;
    }

    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Planted-shortcut image benchmark.
///
/// Each image is side x side pixels on a flat background with Gaussian noise.
/// The class signal is a bright band in the upper (label 1) or lower (label 0)
/// half of `core_region`. Outside the core, label-independent stripes add
/// clutter. The shortcut is a noise-free tag: a `shortcut_size` square set to
/// `shortcut_strength` in the top-left corner for an encoded label 1 or the
/// top-right corner for an encoded label 0, the other corner left at 0. The
/// encoded label is the true one with probability `shortcut_*_correlation`
/// and the flipped one otherwise.
struct SyntheticSpec {
    std::size_t side = 12;
    std::size_t n_per_class = 500;      // IID pool, split 6:2:2
    std::size_t n_ood_per_class = 500;  // separate OOD test set
    Rect core_region{2, 2, 8, 8};
    std::size_t shortcut_size = 2;
    double background = 0.5;
    double signal_strength = 0.125;
    double clutter_strength = 0.7;
    double shortcut_strength = 0.3;
    double shortcut_train_correlation = 1.0;
    double shortcut_ood_correlation = 0.5;
    double noise_sigma = 0.3;
    /// Noise multiplier for OOD negatives; < 1 makes OOD negatives easier.
    double ood_negative_noise_scale = 1.0;
    std::uint64_t seed = 2022;

    std::size_t dim() const { return side * side; }

    /// Top-left tag square (encodes label 1).
    bool in_left_tag(std::size_t r, std::size_t c) const { return r < shortcut_size && c < shortcut_size; }
    /// Top-right tag square (encodes label 0).
    bool in_right_tag(std::size_t r, std::size_t c) const {
        return r < shortcut_size && c + shortcut_size >= side;
    }
    bool in_shortcut(std::size_t r, std::size_t c) const { return in_left_tag(r, c) || in_right_tag(r, c); }

    void validate() const {
        if (side < 2) throw ValidationError("image side must be at least 2");
        if (n_per_class < 5) throw ValidationError("n_per_class must be at least 5 for a 6:2:2 split");
        if (n_ood_per_class == 0) throw ValidationError("n_ood_per_class must be positive");
        if (core_region.rows < 2 || core_region.cols == 0) throw ValidationError("core region needs at least 2 rows and 1 column");
        if (core_region.row + core_region.rows > side || core_region.col + core_region.cols > side) {
            throw ValidationError("core region extends past the image");
        }
        if (shortcut_size == 0 || 2 * shortcut_size > side) throw ValidationError("shortcut_size must be in [1, side / 2]");
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t c = 0; c < side; ++c) {
                if (in_shortcut(r, c) && core_region.contains(r, c)) {
                    throw ValidationError("core region overlaps the shortcut pixels");
                }
            }
        }
        for (double s : {signal_strength, clutter_strength, shortcut_strength, noise_sigma}) {
            if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("strengths and noise must be finite and >= 0");
        }
        if (!(background >= 0.0 && background <= 1.0)) throw ValidationError("background must lie in [0, 1]");
        for (double p : {shortcut_train_correlation, shortcut_ood_correlation}) {
            if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("shortcut correlations must lie in [0, 1]");
        }
        if (!(ood_negative_noise_scale >= 0.0) || !std::isfinite(ood_negative_noise_scale)) {
            throw ValidationError("ood_negative_noise_scale must be finite and >= 0");
        }
    }

    std::vector<std::uint8_t> relevant_mask() const {
        std::vector<std::uint8_t> mask(dim(), 0);
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t c = 0; c < side; ++c) mask[r * side + c] = core_region.contains(r, c) ? 1 : 0;
        }
        return mask;
    }

    std::vector<std::size_t> shortcut_indices() const {
        std::vector<std::size_t> idx;
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t c = 0; c < side; ++c) {
                if (in_shortcut(r, c)) idx.push_back(r * side + c);
            }
        }
        return idx;
    }
};

struct DatasetSplits {
    LabeledDataset train;
    LabeledDataset val;
    LabeledDataset test_iid;
    LabeledDataset test_ood;
};

namespace detail {

inline constexpr std::uint64_t kPoolStream = 0xd1;
inline constexpr std::uint64_t kOodStream = 0xd2;
inline constexpr std::uint64_t kSplitStream = 0xd3;

inline void render_sample(const SyntheticSpec& spec, int label, double shortcut_correlation,
                          double noise_scale, Rng& rng, std::span<double> px) {
    const std::size_t side = spec.side;
    const Rect& core = spec.core_region;
    const std::size_t half = core.rows / 2;

    for (double& v : px) v = spec.background + noise_scale * spec.noise_sigma * rng.normal();

    // Class band: upper half of the core for label 1, lower half for label 0.
    const std::size_t band_row = label == 1 ? core.row : core.row + half;
    const std::size_t band_rows = label == 1 ? half : core.rows - half;
    for (std::size_t r = band_row; r < band_row + band_rows; ++r) {
        for (std::size_t c = core.col; c < core.col + core.cols; ++c) px[r * side + c] += spec.signal_strength;
    }

    // Clutter: two random full-length stripes, horizontal or vertical, outside the core.
    const bool horizontal = rng.bernoulli(0.5);
    for (int s = 0; s < 2; ++s) {
        const std::size_t line = rng.below(side);
        for (std::size_t t = 0; t < side; ++t) {
            const std::size_t r = horizontal ? line : t;
            const std::size_t c = horizontal ? t : line;
            if (!core.contains(r, c) && !spec.in_shortcut(r, c)) px[r * side + c] += spec.clutter_strength;
        }
    }

    const int encoded = rng.bernoulli(shortcut_correlation) ? label : 1 - label;
    for (std::size_t r = 0; r < spec.shortcut_size; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            if (spec.in_left_tag(r, c)) px[r * side + c] = encoded == 1 ? spec.shortcut_strength : 0.0;
            if (spec.in_right_tag(r, c)) px[r * side + c] = encoded == 0 ? spec.shortcut_strength : 0.0;
        }
    }

    for (double& v : px) v = std::clamp(v, 0.0, 1.0);
}

inline LabeledDataset render_set(const SyntheticSpec& spec, std::size_t per_class, double shortcut_correlation,
                                 double negative_noise_scale, Rng& rng, std::string provenance) {
    const std::size_t d = spec.dim();
    const std::size_t n = 2 * per_class;
    Tensor features({n, d});
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = i < per_class ? 0 : 1;
        labels[i] = y;
        render_sample(spec, y, shortcut_correlation, y == 0 ? negative_noise_scale : 1.0, rng, features.row(i));
    }
    return {std::move(features), std::move(labels), spec.relevant_mask(), spec.shortcut_indices(),
            std::move(provenance)};
}

/// Largest-remainder apportionment of n into parts proportional to ratios; ties go to the lower index.
inline std::vector<std::size_t> apportion(std::size_t n, std::span<const double> ratios) {
    std::vector<std::size_t> sizes(ratios.size());
    std::vector<double> remainder(ratios.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        const double exact = ratios[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(exact));
        remainder[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::vector<std::size_t> order(ratios.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % order.size()]];
    return sizes;
}

}  // namespace detail

/// Stratified, seeded partition. Each class is shuffled, its members are
/// spread evenly along one combined sequence, and the sequence is cut at the
/// apportioned split sizes, so every split holds each class within one sample
/// of its proportional share.
inline std::vector<LabeledDataset> split(const LabeledDataset& dataset, std::span<const double> ratios,
                                         std::uint64_t seed) {
    if (ratios.empty()) throw ValidationError("split needs at least one ratio");
    double total = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) throw ValidationError("split ratios must be positive");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
    const std::size_t n = dataset.size();
    const auto sizes = detail::apportion(n, ratios);
    for (std::size_t s : sizes) {
        if (s == 0) throw ValidationError("split would produce an empty part");
    }

    Rng rng(seed, detail::kSplitStream);
    struct Keyed {
        double key;
        int label;
        std::size_t row;
    };
    std::vector<Keyed> seq;
    seq.reserve(n);
    for (int y : {0, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i) {
            if (dataset.labels[i] == y) members.push_back(i);
        }
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t j = 0; j < members.size(); ++j) {
            const double key = (static_cast<double>(j) + 0.5) / static_cast<double>(members.size());
            seq.push_back({key, y, members[j]});
        }
    }
    std::stable_sort(seq.begin(), seq.end(), [](const Keyed& a, const Keyed& b) {
        return a.key < b.key || (a.key == b.key && a.label < b.label);
    });

    std::vector<LabeledDataset> parts;
    std::size_t offset = 0;
    for (std::size_t p = 0; p < sizes.size(); ++p) {
        std::vector<std::size_t> rows;
        for (std::size_t k = offset; k < offset + sizes[p]; ++k) rows.push_back(seq[k].row);
        offset += sizes[p];
        rng.shuffle(std::span<std::size_t>(rows));
        parts.push_back(dataset.subset(rows, dataset.provenance + " | split part " + std::to_string(p)));
    }
    return parts;
}

/// IID pool split 6:2:2 into train/val/test_iid plus a separately drawn OOD test set.
inline DatasetSplits generate(const SyntheticSpec& spec) {
    spec.validate();
    const std::string tag = "synthetic seed=" + std::to_string(spec.seed);
    Rng pool_rng(spec.seed, detail::kPoolStream);
    LabeledDataset pool = detail::render_set(spec, spec.n_per_class, spec.shortcut_train_correlation, 1.0,
                                             pool_rng, tag + " iid");
    Rng ood_rng(spec.seed, detail::kOodStream);
    LabeledDataset ood = detail::render_set(spec, spec.n_ood_per_class, spec.shortcut_ood_correlation,
                                            spec.ood_negative_noise_scale, ood_rng, tag + " ood");
    const double ratios[] = {0.6, 0.2, 0.2};
    auto parts = split(pool, ratios, spec.seed);
    parts[0].provenance = tag + " train";
    parts[1].provenance = tag + " val";
    parts[2].provenance = tag + " test_iid";
    return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2]), std::move(ood)};
}

// Dataset file: "SGAD", u32 version, u32 N, u32 d, N*d f64 features row-major,
// N u8 labels, ceil(d/8) bytes relevant-mask bitmap (bit i%8 of byte i/8),
// u32 shortcut count, then u32 shortcut indices. Little-endian throughout.

inline constexpr std::string_view kDatasetMagic = "SGAD";
inline constexpr std::uint32_t kDatasetVersion = 1;

inline std::vector<char> encode_dataset(const LabeledDataset& ds) {
    ds.validate();
    io::ByteWriter w;
    w.bytes(kDatasetMagic);
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(ds.size()));
    w.u32(static_cast<std::uint32_t>(ds.dim()));
    for (double v : ds.features.data()) w.f64(v);
    for (int y : ds.labels) w.u8(static_cast<std::uint8_t>(y));
    const std::size_t d = ds.dim();
    for (std::size_t byte = 0; byte < (d + 7) / 8; ++byte) {
        std::uint8_t bits = 0;
        for (std::size_t b = 0; b < 8 && byte * 8 + b < d; ++b) {
            if (ds.relevant_mask[byte * 8 + b] != 0) bits |= static_cast<std::uint8_t>(1u << b);
        }
        w.u8(bits);
    }
    w.u32(static_cast<std::uint32_t>(ds.shortcut_indices.size()));
    for (std::size_t i : ds.shortcut_indices) w.u32(static_cast<std::uint32_t>(i));
    return w.buffer();
}

inline LabeledDataset decode_dataset(io::ByteReader r) {
    r.expect_magic(kDatasetMagic);
    const std::uint32_t version = r.u32("version");
    if (version != kDatasetVersion) {
        throw FormatError(FormatError::Kind::bad_version, r.where() + "unsupported dataset version " + std::to_string(version));
    }
    const std::size_t n = r.u32("sample count");
    const std::size_t d = r.u32("feature count");
    if (n == 0 || d == 0) throw FormatError(FormatError::Kind::corrupt, r.where() + "empty dataset");
    if (r.remaining() / 8 < n * d) throw FormatError(FormatError::Kind::truncated, r.where() + "file truncated while reading features");
    std::vector<double> feats(n * d);
    for (double& v : feats) v = r.f64("features");
    LabeledDataset ds;
    try {
        ds.features = Tensor({n, d}, std::move(feats));
    } catch (const ValidationError& e) {
        throw FormatError(FormatError::Kind::corrupt, r.where() + e.what());
    }
    ds.labels.resize(n);
    for (int& y : ds.labels) y = r.u8("labels");
    ds.relevant_mask.assign(d, 0);
    for (std::size_t byte = 0; byte < (d + 7) / 8; ++byte) {
        const std::uint8_t bits = r.u8("relevant mask");
        for (std::size_t b = 0; b < 8 && byte * 8 + b < d; ++b) ds.relevant_mask[byte * 8 + b] = (bits >> b) & 1u;
    }
    const std::size_t count = r.u32("shortcut count");
    if (count > d) throw FormatError(FormatError::Kind::corrupt, r.where() + "shortcut count exceeds feature count");
    for (std::size_t k = 0; k < count; ++k) ds.shortcut_indices.push_back(r.u32("shortcut indices"));
    r.expect_end();
    try {
        ds.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatError::Kind::corrupt, r.where() + e.what());
    }
    return ds;
}

inline void save(const LabeledDataset& ds, const std::filesystem::path& path) {
    io::write_bytes(path, encode_dataset(ds));
}

inline LabeledDataset load(const std::filesystem::path& path) {
    LabeledDataset ds = decode_dataset(io::ByteReader::from_file(path));
    ds.provenance = path.string();
    return ds;
}

}  // namespace sga
