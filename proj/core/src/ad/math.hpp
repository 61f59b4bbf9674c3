#pragma once

#include <cmath>

namespace plcrnn::ad::detail {

// Logistic function without overflow and without a data-dependent branch
// around the exponential.
template <typename Real>
inline Real stable_sigmoid(Real x) {
    const Real e = std::exp(-std::abs(x));
    const Real r = Real(1) / (Real(1) + e);
    return x >= 0 ? r : e * r;
}

}  // namespace plcrnn::ad::detail
