#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "plcrnn/ad/tensor.hpp"

namespace plcrnn::ad {

// Flat binary tensor block:
//   "PTNS" | version u32 | rank u32 | dims u32[rank] | dtype u32 | values
// All integers and values little-endian. dtype 1 = float32, 2 = float64.
inline constexpr std::uint32_t kTensorFormatVersion = 1;

enum class DType : std::uint32_t { Float32 = 1, Float64 = 2 };

template <typename Real>
void write_tensor(std::ostream& out, const Tensor<Real>& tensor);

/// Reads one block, converting the stored dtype to Real. Throws IoError on a
/// bad magic, unknown version/dtype, or truncated stream.
template <typename Real>
Tensor<Real> read_tensor(std::istream& in);

template <typename Real>
void save_tensor(const std::filesystem::path& path, const Tensor<Real>& tensor);
template <typename Real>
Tensor<Real> load_tensor(const std::filesystem::path& path);

// Little-endian primitives shared with the checkpoint format.
void write_u32(std::ostream& out, std::uint32_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
double read_f64(std::istream& in);

}  // namespace plcrnn::ad
