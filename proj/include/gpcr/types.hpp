#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace gpcr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Seed = std::uint64_t;

}  // namespace gpcr
