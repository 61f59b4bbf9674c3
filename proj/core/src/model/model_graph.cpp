#include "plcrnn/model/model_graph.hpp"

#include <cmath>

#include "plcrnn/error.hpp"

namespace plcrnn::model {

using ad::Shape;
using ad::Tensor;

namespace {

template <typename Real>
std::vector<Real> init_values(const LayerSpec& l, const ParamShape& p, Rng rng) {
    const std::size_t n = ad::num_elements(p.shape);
    std::vector<Real> v(n, Real{0});
    const std::string role = p.key.substr(p.key.rfind('.') + 1);
    auto uniform_fill = [&](double bound) {
        for (auto& x : v) x = static_cast<Real>(rng.uniform(-bound, bound));
    };
    switch (l.kind) {
        case LayerKind::Conv:
        case LayerKind::Deconv:
            if (role == "weight") {
                const double k = static_cast<double>(l.kernel_t * l.kernel_f);
                uniform_fill(std::sqrt(6.0 / (k * static_cast<double>(l.c_in) + k * static_cast<double>(l.c_out))));
            }
            break;
        case LayerKind::Fc:
            if (role == "weight") uniform_fill(std::sqrt(6.0 / static_cast<double>(l.in + l.units)));
            break;
        case LayerKind::Lstm:
            if (role == "bias") {
                for (std::size_t j = l.units; j < 2 * l.units; ++j) v[j] = Real{1};
            } else {
                uniform_fill(1.0 / std::sqrt(static_cast<double>(l.units)));
            }
            break;
        case LayerKind::BatchNorm:
            if (role == "gamma") std::fill(v.begin(), v.end(), Real{1});
            break;
        default:
            break;
    }
    return v;
}

}  // namespace

template <typename Real>
ModelGraph<Real>::ModelGraph(GraphSpec spec, ModelInfo info, const Rng& init)
    : spec_(std::move(spec)), info_(info), shapes_(infer_shapes(spec_)) {
    std::size_t inputs = 0;
    for (const auto& l : spec_.layers) {
        if (l.kind == LayerKind::Input) ++inputs;
        if (l.kind == LayerKind::BatchNorm) bn_.emplace(l.name, ad::BatchNormState<Real>(l.channels));
        for (const auto& p : param_shapes(l)) {
            if (params_.count(p.key)) continue;
            params_.emplace(p.key, Tensor<Real>(p.shape, init_values<Real>(l, p, init.derive(p.key)), true));
            param_order_.push_back(p.key);
        }
    }
    if (inputs != 1) {
        throw SpecError("graph '" + spec_.name + "': a trainable model needs exactly one input layer, found " +
                        std::to_string(inputs));
    }
    if (spec_.outputs.empty()) throw SpecError("graph '" + spec_.name + "' declares no outputs");
}

template <typename Real>
std::vector<Tensor<Real>> ModelGraph<Real>::forward(const Tensor<Real>& input, ad::NormMode mode,
                                                    const ad::FrameMask* mask) {
    std::vector<Tensor<Real>> vals(spec_.layers.size());
    std::map<std::string, std::size_t> index;
    auto in = [&](const LayerSpec& l, std::size_t i) -> const Tensor<Real>& { return vals[index.at(l.inputs[i])]; };
    auto p = [&](const LayerSpec& l, const char* role) -> const Tensor<Real>& {
        return params_.at((l.sharing_group.empty() ? l.name : l.sharing_group) + "." + role);
    };

    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& l = spec_.layers[i];
        const ValueShape& s = shapes_[i];
        Tensor<Real> out;
        switch (l.kind) {
            case LayerKind::Input: {
                if (s.is_map()) {
                    if (input.rank() == 3 && s.channels == 1 && input.dim(2) == s.width) {
                        out = ad::reshape(input, Shape{input.dim(0), 1, input.dim(1), input.dim(2)});
                    } else if (input.rank() == 4 && input.dim(1) == s.channels && input.dim(3) == s.width) {
                        out = input;
                    }
                } else if (input.rank() == 3 && input.dim(2) == s.width) {
                    out = input;
                }
                if (!out.defined()) {
                    throw DimensionError("model input " + ad::shape_string(input.shape()) + " does not match layer '" +
                                         l.name + "' " + to_string(s));
                }
                break;
            }
            case LayerKind::Conv:
                out = ad::conv2d_causal(in(l, 0), p(l, "weight"), p(l, "bias"), ad::Stride2{l.stride_t, l.stride_f});
                break;
            case LayerKind::Deconv:
                out = ad::deconv2d_causal(in(l, 0), p(l, "weight"), p(l, "bias"), ad::Stride2{l.stride_t, l.stride_f},
                                          l.width);
                break;
            case LayerKind::BatchNorm:
                out = ad::batch_norm(in(l, 0), p(l, "gamma"), p(l, "beta"), bn_.at(l.name), mode, mask);
                break;
            case LayerKind::Activation:
                out = ad::activation(in(l, 0), l.fn);
                break;
            case LayerKind::Reshape: {
                const Tensor<Real>& x = in(l, 0);
                if (l.mode == ReshapeMode::ToSeq) {
                    const auto B = x.dim(0), C = x.dim(1), T = x.dim(2), F = x.dim(3);
                    out = ad::reshape(ad::permute(x, {0, 2, 1, 3}), Shape{B, T, C * F});
                } else {
                    const auto B = x.dim(0), T = x.dim(1);
                    out = ad::permute(ad::reshape(x, Shape{B, T, l.channels, l.width}), {0, 2, 1, 3});
                }
                break;
            }
            case LayerKind::Lstm:
                out = ad::lstm_forward(in(l, 0), p(l, "w_ih"), p(l, "w_hh"), p(l, "bias"));
                break;
            case LayerKind::Fc:
                out = ad::linear(in(l, 0), p(l, "weight"), p(l, "bias"));
                break;
            case LayerKind::Concat: {
                std::vector<Tensor<Real>> parts;
                for (std::size_t k = 0; k < l.inputs.size(); ++k) parts.push_back(in(l, k));
                out = parts.size() == 1 ? parts[0] : ad::concat(parts, s.is_map() ? 1 : 2);
                break;
            }
            case LayerKind::MaskApply:
                out = ad::mul(in(l, 0), in(l, 1));
                break;
        }
        vals[i] = out;
        index.emplace(l.name, i);
    }

    std::vector<Tensor<Real>> outputs;
    for (const auto& name : spec_.outputs) {
        const std::size_t i = index.at(name);
        const Tensor<Real>& v = vals[i];
        if (shapes_[i].is_map() && shapes_[i].channels == 1) {
            outputs.push_back(ad::reshape(v, Shape{v.dim(0), v.dim(2), v.dim(3)}));
        } else {
            outputs.push_back(v);
        }
    }
    return outputs;
}

template <typename Real>
void ModelGraph<Real>::set_bn_momentum(Real momentum) {
    if (!(momentum >= 0 && momentum < 1)) throw InputError("bn momentum must be in [0, 1)");
    for (auto& [name, state] : bn_) state.momentum = momentum;
}

template <typename Real>
std::size_t ModelGraph<Real>::count_params() const {
    std::size_t n = 0;
    for (const auto& [k, t] : params_) n += t.size();
    return n;
}

template <typename Real>
Tensor<Real>& ModelGraph<Real>::param(const std::string& key) {
    const auto it = params_.find(key);
    if (it == params_.end()) throw ContractError("model has no parameter '" + key + "'");
    return it->second;
}

template <typename Real>
const Tensor<Real>& ModelGraph<Real>::param(const std::string& key) const {
    const auto it = params_.find(key);
    if (it == params_.end()) throw ContractError("model has no parameter '" + key + "'");
    return it->second;
}

template <typename Real>
std::vector<Tensor<Real>> ModelGraph<Real>::layer_params(const std::string& layer) const {
    std::vector<Tensor<Real>> out;
    for (const auto& p : param_shapes(spec_.layer(layer))) out.push_back(params_.at(p.key));
    return out;
}

template <typename Real>
std::vector<Tensor<Real>> ModelGraph<Real>::parameters() const {
    std::vector<Tensor<Real>> out;
    for (const auto& k : param_order_) out.push_back(params_.at(k));
    return out;
}

template <typename Real>
void ModelGraph<Real>::zero_grad() {
    for (auto& [k, t] : params_) t.zero_grad();
}

template <typename Real>
ModelGraph<Real> build_plcrnn(const targets::StagePlan& plan, double width_scale, std::uint64_t seed) {
    plan.validate();
    ModelInfo info{plan.stages, plan.kind, width_scale};
    return ModelGraph<Real>(plcrnn_spec(plan.stages, plan.kind, width_scale), info, Rng(seed).derive("init"));
}

template class ModelGraph<float>;
template class ModelGraph<double>;
template ModelGraph<float> build_plcrnn(const targets::StagePlan&, double, std::uint64_t);
template ModelGraph<double> build_plcrnn(const targets::StagePlan&, double, std::uint64_t);

}  // namespace plcrnn::model
