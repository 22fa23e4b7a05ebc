#pragma once

#include <Eigen/Dense>

namespace vcplm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace vcplm
