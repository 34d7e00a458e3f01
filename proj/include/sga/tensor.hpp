#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sga/errors.hpp"

namespace sga {

/// Dense row-major array of doubles with an explicit shape.
///
/// Every entry is checked to be finite on construction. Mutating access is
/// available through `data()`; callers that write non-finite values are on
/// their own.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {
        check_finite();
    }

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != element_count(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape product " +
                             std::to_string(element_count(shape_)));
        }
        check_finite();
    }

    /// 1×n tensor from a row of values.
    static Tensor row_vector(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor({1, n}, std::move(values));
    }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }

    std::size_t rows() const {
        require_matrix();
        return shape_[0];
    }
    std::size_t cols() const {
        require_matrix();
        return shape_[1];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> row(std::size_t r) { return data().subspan(r * cols(), cols()); }
    std::span<const double> row(std::size_t r) const {
        return data().subspan(r * cols(), cols());
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
        for (std::size_t d : shape) {
            if (d == 0) throw ShapeError("tensor dimensions must be positive");
        }
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               std::multiplies<>());
    }

    void require_matrix() const {
        if (shape_.size() != 2) throw ShapeError("expected a rank-2 tensor");
    }

    void check_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) throw ValidationError("tensor entries must be finite");
        }
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Copies selected rows of a matrix into a new matrix, in the given order.
inline Tensor gather_rows(const Tensor& m, std::span<const std::size_t> rows) {
    const std::size_t cols = m.cols();
    std::vector<double> out;
    out.reserve(rows.size() * cols);
    for (std::size_t r : rows) {
        if (r >= m.rows()) throw ShapeError("row index out of range");
        auto src = m.row(r);
        out.insert(out.end(), src.begin(), src.end());
    }
    return Tensor({rows.size(), cols}, std::move(out));
}

}  // namespace sga
