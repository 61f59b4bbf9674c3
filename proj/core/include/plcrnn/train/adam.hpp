#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "plcrnn/ad/tensor.hpp"

namespace plcrnn::train {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename Real>
struct AdamState {
    AdamConfig config;
    std::size_t step = 0;
    std::vector<std::vector<Real>> m;
    std::vector<std::vector<Real>> v;
};

/// One bias-corrected Adam update of every parameter from its grad buffer:
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2,
///   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
/// All gradients are checked first; a non-finite one throws NumericError
/// naming the parameter and leaves parameters and moments untouched.
/// Parameters without a grad buffer are treated as having zero gradient.
template <typename Real>
void adam_step(std::vector<ad::Tensor<Real>>& params, const std::vector<std::string>& names, AdamState<Real>& state,
               double lr);

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename Real>
double clip_grad_norm(std::vector<ad::Tensor<Real>>& params, double max_norm);

}  // namespace plcrnn::train
