#pragma once

// Neumaier compensated summation for scalars and Eigen matrices.

#include <Eigen/Dense>

#include <cmath>
#include <complex>

namespace helab {

namespace detail {

inline void neumaier_step(double& sum, double& comp, double x) {
  const double t = sum + x;
  comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
  sum = t;
}

}  // namespace detail

class CompensatedSum {
 public:
  void add(double x) { detail::neumaier_step(sum_, comp_, x); }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Entrywise compensated accumulation of complex matrices.
class CompensatedMatrixSum {
 public:
  CompensatedMatrixSum(Eigen::Index rows, Eigen::Index cols)
      : re_(Eigen::MatrixXd::Zero(rows, cols)), im_(re_), cre_(re_), cim_(re_) {}

  void add(const Eigen::MatrixXcd& x) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        detail::neumaier_step(re_(i, j), cre_(i, j), x(i, j).real());
        detail::neumaier_step(im_(i, j), cim_(i, j), x(i, j).imag());
      }
    }
  }
  Eigen::MatrixXcd value() const {
    Eigen::MatrixXcd out(re_.rows(), re_.cols());
    out.real() = re_ + cre_;
    out.imag() = im_ + cim_;
    return out;
  }

 private:
  Eigen::MatrixXd re_, im_, cre_, cim_;
};

}  // namespace helab
