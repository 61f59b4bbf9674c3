#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plcrnn/ad/ops.hpp"
#include "plcrnn/targets/stage_plan.hpp"

namespace plcrnn::model {

enum class LayerKind { Input, Conv, Deconv, BatchNorm, Activation, Reshape, Lstm, Fc, Concat, MaskApply };

std::string to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view text);
std::string to_string(ad::Activation fn);
std::optional<ad::Activation> parse_activation(std::string_view text);

enum class ReshapeMode { ToSeq, ToMap };

/// One node of a declarative layer graph. Only the fields relevant to
/// `kind` are read:
///   input      channels + width (map [C, T, F]) or units (sequence [T, D])
///   conv       c_in, c_out, kernel, stride        (F' = (F - K_F) / s_F + 1)
///   deconv     c_in, c_out, kernel, stride, width (output frequency width)
///   batchnorm  channels
///   activation fn
///   reshape    mode; to_map also takes channels and width
///   lstm       in (D), units (H)
///   fc         in, units
///   concat     joins maps along channels or sequences along features
///   mask_apply inputs (mask, magnitude), elementwise product
/// Layers with the same non-empty sharing group reuse one parameter set.
struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Input;
    std::vector<std::string> inputs;
    std::size_t c_in = 0;
    std::size_t c_out = 0;
    std::size_t kernel_t = 1;
    std::size_t kernel_f = 1;
    std::size_t stride_t = 1;
    std::size_t stride_f = 1;
    std::size_t channels = 0;
    std::size_t width = 0;
    std::size_t in = 0;
    std::size_t units = 0;
    ad::Activation fn = ad::Activation::Elu;
    ReshapeMode mode = ReshapeMode::ToSeq;
    std::string sharing_group;
    std::size_t stage = 0;  // 1-based stage this layer belongs to; 0 if none

    bool has_params() const {
        return kind == LayerKind::Conv || kind == LayerKind::Deconv || kind == LayerKind::BatchNorm ||
               kind == LayerKind::Lstm || kind == LayerKind::Fc;
    }
};

/// Ordered layer list; every layer's inputs must appear before it.
struct GraphSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    std::vector<std::string> outputs;

    const LayerSpec& layer(std::string_view name) const;
    std::optional<std::size_t> index_of(std::string_view name) const;
};

/// Per-frame shape of a layer's output: a map [channels, width] or a
/// sequence feature vector [width] (channels == 0).
struct ValueShape {
    std::size_t channels = 0;
    std::size_t width = 0;
    bool is_map() const { return channels > 0; }
    bool operator==(const ValueShape&) const = default;
};

std::string to_string(const ValueShape& s);

/// Named parameter tensor shape of one layer; `key` is the store key
/// (sharing group or layer name, then '.', then the role).
struct ParamShape {
    std::string key;
    ad::Shape shape;
};

std::vector<ParamShape> param_shapes(const LayerSpec& layer);

/// Validates the graph and returns each layer's output shape in layer order.
/// Throws SpecError naming the offending layer on unknown inputs,
/// channel/width mismatches, invalid strides, or sharing groups whose
/// members disagree on parameter shapes.
std::vector<ValueShape> infer_shapes(const GraphSpec& spec);

/// Channel count after width scaling: ceil(c * scale), at least 1.
std::size_t scaled_channels(std::size_t c, double width_scale);

/// The causal PL-CRNN: Q copies of the sub-net (5 convs with BN+ELU,
/// two shared LSTMs, 5 deconvs with skip concatenation), stage q reading the
/// channel concatenation of the noisy magnitude and the magnitude
/// estimates of stages 1..q-1. Output layers are "s<q>.out".
GraphSpec plcrnn_spec(std::size_t stages, targets::TargetKind kind, double width_scale = 1.0);

/// Line-oriented text form:
///   graph <name>
///   layer name=<id> kind=<kind> [inputs=a,b] [key=value ...]
///   outputs <id> [<id> ...]
/// Keys: c_in c_out kernel=KTxKF stride=STxSF channels width in units
/// fn=elu|sigmoid|softplus|tanh mode=to_seq|to_map share=<group> stage=<q>.
/// Blank lines and lines starting with '#' are ignored.
std::string write_spec(const GraphSpec& spec);
/// Throws SpecError with the line number on malformed input.
GraphSpec parse_spec(std::string_view text);

}  // namespace plcrnn::model
