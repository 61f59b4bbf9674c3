#include "plcrnn/ad/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "plcrnn/error.hpp"

namespace plcrnn::ad {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'T', 'N', 'S'};

template <typename Word>
void write_le(std::ostream& out, Word w) {
    std::array<char, sizeof(Word)> bytes;
    for (std::size_t i = 0; i < sizeof(Word); ++i) bytes[i] = static_cast<char>((w >> (8 * i)) & 0xFF);
    out.write(bytes.data(), bytes.size());
}

template <typename Word>
Word read_le(std::istream& in) {
    std::array<unsigned char, sizeof(Word)> bytes;
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
        throw IoError("tensor stream truncated");
    }
    Word w = 0;
    for (std::size_t i = 0; i < sizeof(Word); ++i) w |= static_cast<Word>(bytes[i]) << (8 * i);
    return w;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(read_le<std::uint64_t>(in)); }

template <typename Real>
void write_tensor(std::ostream& out, const Tensor<Real>& tensor) {
    out.write(kMagic.data(), kMagic.size());
    write_u32(out, kTensorFormatVersion);
    write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    if constexpr (std::is_same_v<Real, float>) {
        write_u32(out, static_cast<std::uint32_t>(DType::Float32));
        for (float v : tensor.data()) write_le(out, std::bit_cast<std::uint32_t>(v));
    } else {
        write_u32(out, static_cast<std::uint32_t>(DType::Float64));
        for (double v : tensor.data()) write_le(out, std::bit_cast<std::uint64_t>(v));
    }
}

template <typename Real>
Tensor<Real> read_tensor(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size())) throw IoError("tensor stream truncated before header");
    if (magic != kMagic) throw IoError("not a tensor block (bad magic)");
    const auto version = read_u32(in);
    if (version != kTensorFormatVersion) {
        throw IoError("unsupported tensor format version " + std::to_string(version));
    }
    const auto rank = read_u32(in);
    if (rank > 16) throw IoError("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = read_u32(in);
    const auto dtype = read_u32(in);
    const std::size_t n = num_elements(shape);
    if (n > (std::size_t{1} << 31)) throw IoError("implausible tensor size " + shape_string(shape));
    std::vector<Real> values(n);
    if (dtype == static_cast<std::uint32_t>(DType::Float32)) {
        for (auto& v : values) v = static_cast<Real>(std::bit_cast<float>(read_le<std::uint32_t>(in)));
    } else if (dtype == static_cast<std::uint32_t>(DType::Float64)) {
        for (auto& v : values) v = static_cast<Real>(std::bit_cast<double>(read_le<std::uint64_t>(in)));
    } else {
        throw IoError("unknown tensor dtype tag " + std::to_string(dtype));
    }
    return Tensor<Real>(std::move(shape), std::move(values));
}

template <typename Real>
void save_tensor(const std::filesystem::path& path, const Tensor<Real>& tensor) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_tensor(out, tensor);
    if (!out) throw IoError("failed writing " + path.string());
}

template <typename Real>
Tensor<Real> load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_tensor<Real>(in);
}

template void write_tensor(std::ostream&, const Tensor<float>&);
template void write_tensor(std::ostream&, const Tensor<double>&);
template Tensor<float> read_tensor<float>(std::istream&);
template Tensor<double> read_tensor<double>(std::istream&);
template void save_tensor(const std::filesystem::path&, const Tensor<float>&);
template void save_tensor(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> load_tensor<float>(const std::filesystem::path&);
template Tensor<double> load_tensor<double>(const std::filesystem::path&);

}  // namespace plcrnn::ad
