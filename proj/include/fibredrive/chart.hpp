#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fibredrive/errors.hpp"

namespace fibredrive {

/// A point (q, v) in a velocity chart of dimension n. Also reused for
/// fibre-vector charts where the second block plays the role of the fibre
/// coordinate.
struct ChartPoint {
  Eigen::VectorXd q;
  Eigen::VectorXd v;

  ChartPoint() = default;
  ChartPoint(Eigen::VectorXd q_, Eigen::VectorXd v_)
      : q(std::move(q_)), v(std::move(v_)) {
    if (q.size() != v.size() || q.size() < 1)
      throw DimensionError("ChartPoint: q and v must have equal length >= 1");
    if (!q.allFinite() || !v.allFinite())
      throw EvaluationError("ChartPoint: non-finite coordinate");
  }

  int n() const { return static_cast<int>(q.size()); }
};

inline std::vector<double> to_std(const Eigen::VectorXd& x) {
  return {x.data(), x.data() + x.size()};
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(),
                                           static_cast<Eigen::Index>(x.size()));
}

}  // namespace fibredrive
