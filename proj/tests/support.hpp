#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "sga/datasets.hpp"
#include "sga/network.hpp"
#include "sga/rng.hpp"
#include "sga/tensor.hpp"

namespace sga::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("sga_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<char> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = 0.0, double hi = 1.0) {
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor({rows, cols}, std::move(v));
}

/// Small random ReLU network; biases are randomized too so they get exercised.
inline NetworkParams random_network(Rng& rng, std::size_t max_dim = 12) {
    NetworkSpec spec;
    spec.input_dim = 2 + rng.below(max_dim - 1);
    spec.hidden_dims.clear();
    const std::size_t depth = 1 + rng.below(2);
    for (std::size_t l = 0; l < depth; ++l) spec.hidden_dims.push_back(3 + rng.below(6));
    spec.num_classes = 2 + rng.below(2);
    NetworkParams p = init_params(spec, rng.next_u64());
    for (auto& layer : p.layers) {
        for (double& b : layer.bias.data()) b = rng.uniform(-0.3, 0.3);
    }
    return p;
}

/// Smallest |pre-activation| over every hidden unit for the given rows.
inline double min_abs_preactivation(const NetworkParams& p, const Tensor& x) {
    double m = INFINITY;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto t = detail::trace(p, x.row(r));
        for (const auto& layer : t.pre) {
            for (double z : layer) m = std::min(m, std::abs(z));
        }
    }
    return m;
}

inline constexpr double kFdStep = 1e-6;
inline constexpr double kFdTolerance = 1e-6;
inline constexpr double kFdFloor = 1e-3;
inline constexpr double kKinkMargin = 1e-4;

/// |a - b| / max(|a|, |b|, kFdFloor)
inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kFdFloor});
}

inline double central_difference(const std::function<double()>& f, double& slot) {
    const double saved = slot;
    slot = saved + kFdStep;
    const double up = f();
    slot = saved - kFdStep;
    const double down = f();
    slot = saved;
    return (up - down) / (2.0 * kFdStep);
}

}  // namespace sga::test
