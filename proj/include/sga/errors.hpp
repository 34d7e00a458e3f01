#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sga {

/// Tensor or parameter shapes that do not line up.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A value or configuration outside its documented domain.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Problems reading or writing the binary model/dataset formats.
class FormatError : public std::runtime_error {
public:
    enum class Kind { io, bad_magic, bad_version, truncated, corrupt };

    FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Training produced a non-finite loss.
class NumericError : public std::runtime_error {
public:
    NumericError(std::size_t epoch, const std::string& what)
        : std::runtime_error(what), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

}  // namespace sga
