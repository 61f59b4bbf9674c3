#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plcrnn/ad/ops.hpp"
#include "plcrnn/model/graph_spec.hpp"
#include "plcrnn/rng.hpp"
#include "plcrnn/targets/stage_plan.hpp"

namespace plcrnn::model {

/// What a graph was built as; stages == 0 marks a generic graph.
struct ModelInfo {
    std::size_t stages = 0;
    targets::TargetKind kind = targets::TargetKind::Tms;
    double width_scale = 1.0;
};

/// Trainable interpretation of a GraphSpec.
///
/// Parameters live in one store keyed by sharing group (or layer name) and
/// role, so every layer of a sharing group holds a handle to the same
/// tensor. Maps are [B, C, T, F]; sequences are [B, T, D].
template <typename Real>
class ModelGraph {
public:
    /// Validates the spec and initializes every parameter from a sub-stream
    /// of `init` keyed by the parameter name: conv/deconv/fc weights
    /// Glorot-uniform, LSTM weights uniform(+-1/sqrt(H)) with forget-gate
    /// bias 1, other biases 0, BN gamma 1 and beta 0.
    ModelGraph(GraphSpec spec, ModelInfo info, const Rng& init);

    const GraphSpec& spec() const { return spec_; }
    const ModelInfo& info() const { return info_; }
    const std::vector<ValueShape>& shapes() const { return shapes_; }

    /// Runs the graph. `input` is [B, C, T, F] for a map input (or
    /// [B, T, F] when C == 1) and [B, T, D] for a sequence input. Returns
    /// one tensor per spec output; single-channel maps come back as
    /// [B, T, F]. `mask` restricts train-mode BN statistics to real frames.
    std::vector<ad::Tensor<Real>> forward(const ad::Tensor<Real>& input, ad::NormMode mode,
                                          const ad::FrameMask* mask = nullptr);

    /// Each parameter tensor counted once.
    std::size_t count_params() const;

    /// Parameter keys in creation order.
    const std::vector<std::string>& param_names() const { return param_order_; }
    ad::Tensor<Real>& param(const std::string& key);
    const ad::Tensor<Real>& param(const std::string& key) const;
    /// Handles for one layer's parameters (shared tensors for grouped layers).
    std::vector<ad::Tensor<Real>> layer_params(const std::string& layer) const;
    std::vector<ad::Tensor<Real>> parameters() const;

    /// Running statistics of each batchnorm layer, by layer name.
    std::map<std::string, ad::BatchNormState<Real>>& bn_states() { return bn_; }
    const std::map<std::string, ad::BatchNormState<Real>>& bn_states() const { return bn_; }

    void zero_grad();

    /// Running-stat momentum of every BN layer (default 0.99). Short toy runs
    /// take few updates, so they need a faster-moving average.
    void set_bn_momentum(Real momentum);

private:
    GraphSpec spec_;
    ModelInfo info_;
    std::vector<ValueShape> shapes_;
    std::map<std::string, ad::Tensor<Real>> params_;
    std::vector<std::string> param_order_;
    std::map<std::string, ad::BatchNormState<Real>> bn_;
};

/// PL-CRNN for `plan` at `width_scale`, initialized from `seed`.
template <typename Real>
ModelGraph<Real> build_plcrnn(const targets::StagePlan& plan, double width_scale, std::uint64_t seed);

}  // namespace plcrnn::model
