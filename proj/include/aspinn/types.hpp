#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aspinn {

/// Largest supported spatial (or spacetime) dimension.
inline constexpr int kMaxDim = 3;

// Fixed-capacity storage keeps per-point arithmetic off the heap.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Rejected input: bad configuration, shape mismatch, malformed file.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value. `index()` names the offending
/// node or sample, depending on where the failure was detected.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::size_t index)
        : std::runtime_error(what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

} // namespace aspinn
