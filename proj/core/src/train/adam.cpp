#include "plcrnn/train/adam.hpp"

#include <cmath>

#include "plcrnn/error.hpp"

namespace plcrnn::train {

template <typename Real>
void adam_step(std::vector<ad::Tensor<Real>>& params, const std::vector<std::string>& names, AdamState<Real>& state,
               double lr) {
    if (names.size() != params.size()) throw ContractError("adam_step: one name per parameter required");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) continue;
        for (std::size_t j = 0; j < params[i].size(); ++j) {
            if (!std::isfinite(static_cast<double>(params[i].grad()[j]))) {
                throw NumericError("adam_step: non-finite gradient in parameter '" + names[i] + "' at element " +
                                   std::to_string(j));
            }
        }
    }
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), Real{0});
            state.v.emplace_back(p.size(), Real{0});
        }
    }
    if (state.m.size() != params.size()) throw ContractError("adam_step: parameter list changed between steps");

    ++state.step;
    const AdamConfig& c = state.config;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto value = params[i].data();
        const bool has = params[i].has_grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            const double g = has ? static_cast<double>(params[i].grad()[j]) : 0.0;
            const double mj = c.beta1 * static_cast<double>(m[j]) + (1.0 - c.beta1) * g;
            const double vj = c.beta2 * static_cast<double>(v[j]) + (1.0 - c.beta2) * g * g;
            m[j] = static_cast<Real>(mj);
            v[j] = static_cast<Real>(vj);
            const double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + c.eps);
            value[j] = static_cast<Real>(static_cast<double>(value[j]) - update);
        }
    }
}

template <typename Real>
double clip_grad_norm(std::vector<ad::Tensor<Real>>& params, double max_norm) {
    double ss = 0;
    for (const auto& p : params)
        if (p.has_grad())
            for (Real g : p.grad()) ss += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(ss);
    if (norm > max_norm && norm > 0.0) {
        const double k = max_norm / norm;
        for (auto& p : params)
            if (p.has_grad())
                for (Real& g : p.grad()) g = static_cast<Real>(static_cast<double>(g) * k);
    }
    return norm;
}

template void adam_step(std::vector<ad::Tensor<float>>&, const std::vector<std::string>&, AdamState<float>&, double);
template void adam_step(std::vector<ad::Tensor<double>>&, const std::vector<std::string>&, AdamState<double>&, double);
template double clip_grad_norm(std::vector<ad::Tensor<float>>&, double);
template double clip_grad_norm(std::vector<ad::Tensor<double>>&, double);

}  // namespace plcrnn::train
