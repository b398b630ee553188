#pragma once

#include <Eigen/Dense>

namespace qwp {

/// Point clouds are stored one point per row, so rows are kept contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace qwp
