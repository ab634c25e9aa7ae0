#pragma once

#include <Eigen/Dense>
#include <vector>

namespace parafit {

// First n points of the Joe-Kuo direction-number Sobol sequence in [0,1]^k,
// deterministic. The all-zero point is skipped, so the first returned point
// is 0.5 in every coordinate. Supports k up to 64.
std::vector<Eigen::VectorXd> sobol_points(int n, int k);

}  // namespace parafit
