#pragma once

#include "bdisac/types.hpp"

#include <random>

namespace bdisac {

/// Deterministic random stream. std::mt19937_64 has a portable bit sequence,
/// and the uniform/Gaussian maps below are fixed arithmetic on those bits, so
/// identical seeds give identical draws on every platform. The standard
/// distribution adaptors are deliberately avoided: their output is
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Standard complex circular Gaussian, CN(0,1), via Box-Muller.
  cxd cgaussian() {
    double u = 1.0 - uniform();  // (0,1]
    double v = uniform();
    double r = std::sqrt(-std::log(u));
    return cxd(r * std::cos(2.0 * kPi * v), r * std::sin(2.0 * kPi * v));
  }

  /// Real standard normal N(0,1).
  double gaussian() {
    cxd z = cgaussian();
    return std::sqrt(2.0) * z.real();
  }

  CMat cgaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
    CMat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = cgaussian();
    return m;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace bdisac
