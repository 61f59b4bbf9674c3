#include "plcrnn/model/checkpoint.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "plcrnn/ad/serialize.hpp"
#include "plcrnn/error.hpp"

namespace plcrnn::model {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'L', 'C', 'R'};
constexpr std::uint32_t kMaxString = 1u << 24;

void write_string(std::ostream& out, const std::string& s) {
    ad::write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto n = ad::read_u32(in);
    if (n > kMaxString) throw IoError("implausible string length " + std::to_string(n));
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw IoError("stream truncated inside a string");
    return s;
}

std::ifstream open(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    return in;
}

ModelInfo read_header(std::istream& in, const std::filesystem::path& path) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw CheckpointError(path.string() + " is not a checkpoint (bad magic)");
    }
    const auto version = ad::read_u32(in);
    if (version != kCheckpointVersion) {
        throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    ModelInfo info;
    info.stages = ad::read_u32(in);
    const auto kind = ad::read_u32(in);
    if (kind > 1) throw CheckpointError(path.string() + ": unknown target kind tag " + std::to_string(kind));
    info.kind = kind == 0 ? targets::TargetKind::Tms : targets::TargetKind::Iam;
    info.width_scale = ad::read_f64(in);
    return info;
}

}  // namespace

template <typename Real>
void save_checkpoint(const ModelGraph<Real>& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMagic.data(), kMagic.size());
    ad::write_u32(out, kCheckpointVersion);
    ad::write_u32(out, static_cast<std::uint32_t>(model.info().stages));
    ad::write_u32(out, model.info().kind == targets::TargetKind::Tms ? 0 : 1);
    ad::write_f64(out, model.info().width_scale);
    write_string(out, write_spec(model.spec()));
    ad::write_u32(out, static_cast<std::uint32_t>(model.param_names().size()));
    for (const auto& key : model.param_names()) {
        write_string(out, key);
        ad::write_tensor(out, model.param(key));
    }
    ad::write_u32(out, static_cast<std::uint32_t>(model.bn_states().size()));
    for (const auto& [name, st] : model.bn_states()) {
        write_string(out, name);
        ad::write_u32(out, st.initialized ? 1 : 0);
        const ad::Shape s{st.running_mean.size()};
        ad::write_tensor(out, ad::Tensor<Real>(s, st.running_mean));
        ad::write_tensor(out, ad::Tensor<Real>(s, st.running_var));
    }
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

template <typename Real>
ModelGraph<Real> load_checkpoint(const std::filesystem::path& path) {
    auto in = open(path);
    try {
        const ModelInfo info = read_header(in, path);
        GraphSpec spec;
        try {
            spec = parse_spec(read_string(in));
            infer_shapes(spec);
        } catch (const SpecError& e) {
            throw CheckpointError(path.string() + ": embedded graph spec is invalid: " + e.what());
        }
        ModelGraph<Real> model(std::move(spec), info, Rng(0));

        const auto n_params = ad::read_u32(in);
        if (n_params != model.param_names().size()) {
            throw CheckpointError(path.string() + ": stores " + std::to_string(n_params) + " parameters, graph has " +
                                  std::to_string(model.param_names().size()));
        }
        for (std::uint32_t i = 0; i < n_params; ++i) {
            const std::string key = read_string(in);
            ad::Tensor<Real> stored = ad::read_tensor<Real>(in);
            ad::Tensor<Real>* target = nullptr;
            try {
                target = &model.param(key);
            } catch (const ContractError&) {
                throw CheckpointError(path.string() + ": unexpected parameter '" + key + "'");
            }
            if (stored.shape() != target->shape()) {
                throw CheckpointError(path.string() + ": parameter '" + key + "' has shape " +
                                      ad::shape_string(stored.shape()) + ", graph expects " +
                                      ad::shape_string(target->shape()));
            }
            std::copy(stored.data().begin(), stored.data().end(), target->data().begin());
        }
        const auto n_bn = ad::read_u32(in);
        if (n_bn != model.bn_states().size()) {
            throw CheckpointError(path.string() + ": stores " + std::to_string(n_bn) + " batchnorm states, graph has " +
                                  std::to_string(model.bn_states().size()));
        }
        for (std::uint32_t i = 0; i < n_bn; ++i) {
            const std::string name = read_string(in);
            const auto it = model.bn_states().find(name);
            if (it == model.bn_states().end()) {
                throw CheckpointError(path.string() + ": unexpected batchnorm layer '" + name + "'");
            }
            const bool initialized = ad::read_u32(in) != 0;
            const auto mean = ad::read_tensor<Real>(in);
            const auto var = ad::read_tensor<Real>(in);
            auto& st = it->second;
            if (mean.size() != st.running_mean.size() || var.size() != st.running_var.size()) {
                throw CheckpointError(path.string() + ": batchnorm layer '" + name + "' has wrong channel count");
            }
            st.running_mean.assign(mean.data().begin(), mean.data().end());
            st.running_var.assign(var.data().begin(), var.data().end());
            st.initialized = initialized;
        }
        return model;
    } catch (const IoError& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
}

ModelInfo read_checkpoint_info(const std::filesystem::path& path) {
    auto in = open(path);
    try {
        return read_header(in, path);
    } catch (const IoError& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
}

void require_structure(const ModelInfo& info, std::optional<std::size_t> stages,
                       std::optional<targets::TargetKind> kind, std::optional<double> width_scale) {
    if (stages && *stages != info.stages) {
        throw CheckpointError("checkpoint was built with Q=" + std::to_string(info.stages) + " but Q=" +
                              std::to_string(*stages) + " was requested");
    }
    if (kind && *kind != info.kind) {
        throw CheckpointError("checkpoint uses target " + targets::to_string(info.kind) + " but " +
                              targets::to_string(*kind) + " was requested");
    }
    if (width_scale && *width_scale != info.width_scale) {
        std::ostringstream os;
        os << "checkpoint has width scale " << info.width_scale << " but " << *width_scale << " was requested";
        throw CheckpointError(os.str());
    }
}

template void save_checkpoint(const ModelGraph<float>&, const std::filesystem::path&);
template void save_checkpoint(const ModelGraph<double>&, const std::filesystem::path&);
template ModelGraph<float> load_checkpoint<float>(const std::filesystem::path&);
template ModelGraph<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace plcrnn::model
