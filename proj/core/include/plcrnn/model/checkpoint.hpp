#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "plcrnn/model/model_graph.hpp"

namespace plcrnn::model {

// Checkpoint layout (little-endian):
//   "PLCR" | version u32 | Q u32 | target kind u32 (0 tms, 1 iam) |
//   width_scale f64 | spec text (u32 length + bytes, see write_spec) |
//   parameter count u32, then per parameter: name (u32 length + bytes) and a
//   tensor block | BN count u32, then per layer: name, initialized u32,
//   running mean block, running variance block.
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Real>
void save_checkpoint(const ModelGraph<Real>& model, const std::filesystem::path& path);

/// Rebuilds the graph from the stored spec and fills every parameter and BN
/// state. Throws CheckpointError (naming the layer or parameter when one is
/// at fault) on a bad header, truncation, or shape mismatch; nothing is
/// returned unless the whole file loaded. Throws IoError if the file cannot
/// be opened.
template <typename Real>
ModelGraph<Real> load_checkpoint(const std::filesystem::path& path);

/// Header only.
ModelInfo read_checkpoint_info(const std::filesystem::path& path);

/// Throws CheckpointError unless `info` matches the requested structure.
void require_structure(const ModelInfo& info, std::optional<std::size_t> stages,
                       std::optional<targets::TargetKind> kind, std::optional<double> width_scale = std::nullopt);

}  // namespace plcrnn::model
