#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hdiff {

/// Row-major dense matrix used for coordinates, values and activations.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hdiff
