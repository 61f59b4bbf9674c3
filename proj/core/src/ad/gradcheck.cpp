#include "plcrnn/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "plcrnn/error.hpp"

namespace plcrnn::ad {

GradCheckResult gradient_check(const std::function<Tensor<double>()>& loss_fn, std::vector<Tensor<double>> params,
                               double eps, std::size_t stride, double scale_floor) {
    if (stride == 0) stride = 1;
    for (auto& p : params) {
        if (!p.requires_grad()) throw ContractError("gradient_check: parameter does not require a gradient");
        p.zero_grad();
    }
    const Tensor<double> loss = loss_fn();
    if (!std::isfinite(loss.item())) throw NumericError("gradient_check: loss is not finite");
    backward(loss);

    GradCheckResult result;
    double grad_scale = 0.0;
    for (const auto& p : params)
        for (double g : p.grad()) grad_scale = std::max(grad_scale, std::abs(g));
    result.floor = std::max(1e-8, scale_floor * grad_scale);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto values = params[k].data();
        const auto grads = params[k].grad();
        for (std::size_t i = 0; i < values.size(); i += stride) {
            const double analytic = grads[i];
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = loss_fn().item();
            values[i] = saved - eps;
            const double down = loss_fn().item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
                throw NumericError("gradient_check: non-finite gradient at tensor " + std::to_string(k) +
                                   " element " + std::to_string(i));
            }
            const double denom = std::max({std::abs(analytic), std::abs(numeric), result.floor});
            const double rel = std::abs(analytic - numeric) / denom;
            ++result.checked;
            result.max_unscaled_error = std::max(
                result.max_unscaled_error, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
            if (result.checked == 1 || rel > result.max_relative_error) {
                result.max_relative_error = rel;
                result.worst_tensor = k;
                result.worst_element = i;
                result.analytic = analytic;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace plcrnn::ad
