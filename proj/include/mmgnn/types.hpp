#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mmgnn/tensor/ops.hpp"
#include "mmgnn/tensor/tensor.hpp"

namespace mmgnn {

using Tensor = ad::Tensor<double>;
using Matrix = ad::Matrix<double>;
using Index = ad::Index;
using NoGrad = ad::NoGradGuard<double>;

/// Parameter handles paired with stable names (checkpoint keys).
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

}  // namespace mmgnn
