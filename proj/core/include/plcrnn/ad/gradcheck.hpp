#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "plcrnn/ad/tensor.hpp"

namespace plcrnn::ad {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_tensor = 0;
    std::size_t worst_element = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
    double floor = 1e-8;                // denominator floor actually used
    double max_unscaled_error = 0.0;    // same measure with the fixed 1e-8 floor
};

/// Compares backward() against central differences for every element of
/// every tensor in `params` (all must require gradients).
///
/// Relative error per element is |analytic - numeric| /
/// max(|analytic|, |numeric|, floor) with floor = max(1e-8, scale_floor *
/// max|analytic|). A nonzero scale_floor measures tiny entries against the
/// gradient's own scale: in deep graphs some entries sit many orders below
/// the loss, where central differences only resolve roundoff. Leaves the
/// parameter values untouched
/// and their gradients holding the analytic result. Throws NumericError on a
/// non-finite loss or gradient.
///
/// `stride` > 1 checks every stride-th element of each tensor (always
/// including the first), for large parameter sets.
GradCheckResult gradient_check(const std::function<Tensor<double>()>& loss_fn,
                               std::vector<Tensor<double>> params, double eps = 1e-5, std::size_t stride = 1,
                               double scale_floor = 0.0);

}  // namespace plcrnn::ad
