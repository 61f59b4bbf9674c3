#include "plcrnn/model/graph_spec.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

#include "plcrnn/dsp/stft.hpp"
#include "plcrnn/error.hpp"

namespace plcrnn::model {

namespace {

constexpr std::pair<LayerKind, const char*> kKindNames[] = {
    {LayerKind::Input, "input"},         {LayerKind::Conv, "conv"},
    {LayerKind::Deconv, "deconv"},       {LayerKind::BatchNorm, "batchnorm"},
    {LayerKind::Activation, "activation"}, {LayerKind::Reshape, "reshape"},
    {LayerKind::Lstm, "lstm"},           {LayerKind::Fc, "fc"},
    {LayerKind::Concat, "concat"},       {LayerKind::MaskApply, "mask_apply"},
};

constexpr std::pair<ad::Activation, const char*> kActivationNames[] = {
    {ad::Activation::Elu, "elu"},
    {ad::Activation::Sigmoid, "sigmoid"},
    {ad::Activation::Softplus, "softplus"},
    {ad::Activation::Tanh, "tanh"},
};

[[noreturn]] void fail(const LayerSpec& l, const std::string& what) {
    throw SpecError("layer '" + l.name + "' (" + to_string(l.kind) + "): " + what);
}

std::string join(const std::vector<std::string>& v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + v[i];
    return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::string to_string(LayerKind kind) {
    for (const auto& [k, n] : kKindNames)
        if (k == kind) return n;
    return "?";
}

std::optional<LayerKind> parse_layer_kind(std::string_view text) {
    for (const auto& [k, n] : kKindNames)
        if (text == n) return k;
    return std::nullopt;
}

std::string to_string(ad::Activation fn) {
    for (const auto& [k, n] : kActivationNames)
        if (k == fn) return n;
    return "?";
}

std::optional<ad::Activation> parse_activation(std::string_view text) {
    for (const auto& [k, n] : kActivationNames)
        if (text == n) return k;
    return std::nullopt;
}

std::string to_string(const ValueShape& s) {
    if (s.is_map()) return "map[" + std::to_string(s.channels) + "x" + std::to_string(s.width) + "]";
    return "seq[" + std::to_string(s.width) + "]";
}

const LayerSpec& GraphSpec::layer(std::string_view n) const {
    const auto i = index_of(n);
    if (!i) throw SpecError("graph '" + name + "' has no layer '" + std::string(n) + "'");
    return layers[*i];
}

std::optional<std::size_t> GraphSpec::index_of(std::string_view n) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].name == n) return i;
    return std::nullopt;
}

std::vector<ParamShape> param_shapes(const LayerSpec& l) {
    const std::string key = (l.sharing_group.empty() ? l.name : l.sharing_group) + ".";
    switch (l.kind) {
        case LayerKind::Conv:
            return {{key + "weight", {l.c_out, l.c_in, l.kernel_t, l.kernel_f}}, {key + "bias", {l.c_out}}};
        case LayerKind::Deconv:
            return {{key + "weight", {l.c_in, l.c_out, l.kernel_t, l.kernel_f}}, {key + "bias", {l.c_out}}};
        case LayerKind::BatchNorm:
            return {{key + "gamma", {l.channels}}, {key + "beta", {l.channels}}};
        case LayerKind::Lstm:
            return {{key + "w_ih", {4 * l.units, l.in}}, {key + "w_hh", {4 * l.units, l.units}},
                    {key + "bias", {4 * l.units}}};
        case LayerKind::Fc:
            return {{key + "weight", {l.units, l.in}}, {key + "bias", {l.units}}};
        default:
            return {};
    }
}

std::vector<ValueShape> infer_shapes(const GraphSpec& spec) {
    std::unordered_map<std::string, std::size_t> index;
    std::unordered_map<std::string, std::pair<LayerKind, std::vector<ParamShape>>> groups;
    std::vector<ValueShape> shapes;
    shapes.reserve(spec.layers.size());

    for (const auto& l : spec.layers) {
        if (l.name.empty()) throw SpecError("graph '" + spec.name + "' contains a layer without a name");
        if (index.count(l.name)) fail(l, "duplicate layer name");
        std::vector<ValueShape> in;
        for (const auto& src : l.inputs) {
            const auto it = index.find(src);
            if (it == index.end()) fail(l, "input '" + src + "' is not defined before this layer");
            in.push_back(shapes[it->second]);
        }
        auto need_inputs = [&](std::size_t n) {
            if (in.size() != n) fail(l, "expects " + std::to_string(n) + " input(s), got " + std::to_string(in.size()));
        };
        auto need_map = [&](const ValueShape& s) {
            if (!s.is_map()) fail(l, "expects a feature map input, got " + to_string(s));
        };
        auto need_seq = [&](const ValueShape& s) {
            if (s.is_map()) fail(l, "expects a sequence input, got " + to_string(s));
        };
        auto check_kernel = [&] {
            if (l.kernel_t < 1 || l.kernel_f < 1) fail(l, "kernel sizes must be >= 1");
            if (l.stride_t < 1 || l.stride_f < 1) fail(l, "strides must be >= 1");
            if (l.stride_t != 1) fail(l, "time stride must be 1");
            if (l.c_in < 1 || l.c_out < 1) fail(l, "channel counts must be >= 1");
        };

        ValueShape out;
        switch (l.kind) {
            case LayerKind::Input:
                need_inputs(0);
                if (l.channels > 0) {
                    if (l.width < 1) fail(l, "map input needs width >= 1");
                    out = {l.channels, l.width};
                } else {
                    if (l.units < 1) fail(l, "input needs channels+width or units");
                    out = {0, l.units};
                }
                break;
            case LayerKind::Conv: {
                need_inputs(1);
                need_map(in[0]);
                check_kernel();
                if (in[0].channels != l.c_in) {
                    fail(l, "declares c_in=" + std::to_string(l.c_in) + " but input has " +
                                std::to_string(in[0].channels) + " channels");
                }
                if (in[0].width < l.kernel_f) fail(l, "input width " + std::to_string(in[0].width) + " < kernel");
                out = {l.c_out, (in[0].width - l.kernel_f) / l.stride_f + 1};
                break;
            }
            case LayerKind::Deconv: {
                need_inputs(1);
                need_map(in[0]);
                check_kernel();
                if (in[0].channels != l.c_in) {
                    fail(l, "declares c_in=" + std::to_string(l.c_in) + " but input has " +
                                std::to_string(in[0].channels) + " channels");
                }
                if (l.width < l.kernel_f || (l.width - l.kernel_f) / l.stride_f + 1 != in[0].width) {
                    fail(l, "output width " + std::to_string(l.width) + " is inconsistent with input width " +
                                std::to_string(in[0].width));
                }
                out = {l.c_out, l.width};
                break;
            }
            case LayerKind::BatchNorm:
                need_inputs(1);
                need_map(in[0]);
                if (l.channels != in[0].channels) {
                    fail(l, "declares channels=" + std::to_string(l.channels) + " but input has " +
                                std::to_string(in[0].channels));
                }
                out = in[0];
                break;
            case LayerKind::Activation:
                need_inputs(1);
                out = in[0];
                break;
            case LayerKind::Reshape:
                need_inputs(1);
                if (l.mode == ReshapeMode::ToSeq) {
                    need_map(in[0]);
                    out = {0, in[0].channels * in[0].width};
                } else {
                    need_seq(in[0]);
                    if (l.channels < 1 || l.channels * l.width != in[0].width) {
                        fail(l, "cannot reshape " + to_string(in[0]) + " to map[" + std::to_string(l.channels) + "x" +
                                    std::to_string(l.width) + "]");
                    }
                    out = {l.channels, l.width};
                }
                break;
            case LayerKind::Lstm:
            case LayerKind::Fc:
                need_inputs(1);
                need_seq(in[0]);
                if (l.units < 1) fail(l, "units must be >= 1");
                if (in[0].width != l.in) {
                    fail(l, "declares in=" + std::to_string(l.in) + " but input has " + std::to_string(in[0].width) +
                                " features");
                }
                out = {0, l.units};
                break;
            case LayerKind::Concat: {
                if (in.empty()) fail(l, "needs at least one input");
                out = in[0];
                for (std::size_t i = 1; i < in.size(); ++i) {
                    if (in[i].is_map() != in[0].is_map()) fail(l, "cannot concatenate maps with sequences");
                    if (in[0].is_map()) {
                        if (in[i].width != in[0].width) {
                            fail(l, "input '" + l.inputs[i] + "' has width " + std::to_string(in[i].width) +
                                        ", expected " + std::to_string(in[0].width));
                        }
                        out.channels += in[i].channels;
                    } else {
                        out.width += in[i].width;
                    }
                }
                break;
            }
            case LayerKind::MaskApply:
                need_inputs(2);
                if (!(in[0] == in[1])) fail(l, "mask " + to_string(in[0]) + " and magnitude " + to_string(in[1]) + " differ");
                out = in[0];
                break;
        }

        if (!l.sharing_group.empty()) {
            if (!l.has_params()) fail(l, "only parameterized layers may join a sharing group");
            auto ps = param_shapes(l);
            // Compare by role so the group key prefix does not matter.
            const auto [it, fresh] = groups.try_emplace(l.sharing_group, l.kind, ps);
            if (!fresh) {
                bool same = it->second.first == l.kind && it->second.second.size() == ps.size();
                for (std::size_t i = 0; same && i < ps.size(); ++i) same = it->second.second[i].shape == ps[i].shape;
                if (!same) fail(l, "parameter shapes differ from other members of sharing group '" + l.sharing_group + "'");
            }
        }
        index.emplace(l.name, shapes.size());
        shapes.push_back(out);
    }
    for (const auto& o : spec.outputs)
        if (!index.count(o)) throw SpecError("graph '" + spec.name + "': output '" + o + "' is not a layer");
    return shapes;
}

std::size_t scaled_channels(std::size_t c, double width_scale) {
    if (!(width_scale > 0.0) || !std::isfinite(width_scale)) throw InputError("width scale must be positive");
    // Round up, with slack so e.g. 16 * 0.25 stays 4 despite representation error.
    const double v = static_cast<double>(c) * width_scale;
    const auto r = static_cast<std::size_t>(std::ceil(v - 1e-9));
    return std::max<std::size_t>(1, r);
}

GraphSpec plcrnn_spec(std::size_t stages, targets::TargetKind kind, double width_scale) {
    if (stages < 1) throw InputError("PL-CRNN needs at least one stage");
    constexpr std::size_t kEncoder[5] = {16, 16, 16, 32, 64};
    std::size_t enc[5];
    for (int i = 0; i < 5; ++i) enc[i] = scaled_channels(kEncoder[i], width_scale);
    std::size_t widths[6] = {dsp::kBins};
    for (int i = 1; i < 6; ++i) widths[i] = (widths[i - 1] - 3) / 2 + 1;
    const std::size_t hidden = enc[4] * widths[5];

    GraphSpec g;
    {
        std::ostringstream n;
        n << "pl-crnn-q" << stages << "-" << targets::to_string(kind);
        if (width_scale != 1.0) n << "-x" << width_scale;
        g.name = n.str();
    }
    LayerSpec in;
    in.name = "noisy";
    in.kind = LayerKind::Input;
    in.channels = 1;
    in.width = dsp::kBins;
    g.layers.push_back(in);

    std::vector<std::string> cascade = {"noisy"};
    for (std::size_t q = 1; q <= stages; ++q) {
        const std::string p = "s" + std::to_string(q) + ".";
        auto add = [&](LayerSpec l) -> const std::string& {
            l.stage = q;
            g.layers.push_back(std::move(l));
            return g.layers.back().name;
        };
        auto conv_like = [](std::string name, LayerKind k, std::string src, std::size_t ci, std::size_t co) {
            LayerSpec l;
            l.name = std::move(name);
            l.kind = k;
            l.inputs = {std::move(src)};
            l.c_in = ci;
            l.c_out = co;
            l.kernel_t = 2;
            l.kernel_f = 3;
            l.stride_f = 2;
            return l;
        };
        auto bn = [](std::string name, std::string src, std::size_t c) {
            LayerSpec l;
            l.name = std::move(name);
            l.kind = LayerKind::BatchNorm;
            l.inputs = {std::move(src)};
            l.channels = c;
            return l;
        };
        auto act = [](std::string name, std::string src, ad::Activation fn) {
            LayerSpec l;
            l.name = std::move(name);
            l.kind = LayerKind::Activation;
            l.inputs = {std::move(src)};
            l.fn = fn;
            return l;
        };
        auto concat = [](std::string name, std::vector<std::string> srcs) {
            LayerSpec l;
            l.name = std::move(name);
            l.kind = LayerKind::Concat;
            l.inputs = std::move(srcs);
            return l;
        };

        std::string x = add(concat(p + "cascade", cascade));
        std::size_t c = q;
        std::string enc_out[5];
        for (int i = 0; i < 5; ++i) {
            const std::string id = std::to_string(i + 1);
            x = add(conv_like(p + "conv" + id, LayerKind::Conv, x, c, enc[i]));
            x = add(bn(p + "bn" + id, x, enc[i]));
            x = add(act(p + "elu" + id, x, ad::Activation::Elu));
            enc_out[i] = x;
            c = enc[i];
        }
        {
            LayerSpec r;
            r.name = p + "to_seq";
            r.kind = LayerKind::Reshape;
            r.mode = ReshapeMode::ToSeq;
            r.inputs = {x};
            x = add(r);
        }
        for (int i = 1; i <= 2; ++i) {
            LayerSpec l;
            l.name = p + "lstm" + std::to_string(i);
            l.kind = LayerKind::Lstm;
            l.inputs = {x};
            l.in = hidden;
            l.units = hidden;
            l.sharing_group = "lstm" + std::to_string(i);
            x = add(l);
        }
        {
            LayerSpec r;
            r.name = p + "to_map";
            r.kind = LayerKind::Reshape;
            r.mode = ReshapeMode::ToMap;
            r.inputs = {x};
            r.channels = enc[4];
            r.width = widths[5];
            x = add(r);
        }
        c = enc[4];
        for (int j = 1; j <= 5; ++j) {
            const std::string id = std::to_string(j);
            const std::string& skip = enc_out[5 - j];
            x = add(concat(p + "skip" + id, {x, skip}));
            const std::size_t ci = c + enc[5 - j];
            const std::size_t co = j < 5 ? enc[4 - j] : 1;
            LayerSpec d = conv_like(p + "deconv" + id, LayerKind::Deconv, x, ci, co);
            d.width = widths[5 - j];
            x = add(d);
            if (j < 5) {
                x = add(bn(p + "dbn" + id, x, co));
                x = add(act(p + "delu" + id, x, ad::Activation::Elu));
            }
            c = co;
        }
        const bool iam = kind == targets::TargetKind::Iam;
        x = add(act(p + "out", x, iam ? ad::Activation::Sigmoid : ad::Activation::Softplus));
        g.outputs.push_back(x);
        if (iam) {
            LayerSpec m;
            m.name = p + "mag";
            m.kind = LayerKind::MaskApply;
            m.inputs = {x, "noisy"};
            x = add(m);
        }
        cascade.push_back(x);
    }
    return g;
}

std::string write_spec(const GraphSpec& spec) {
    std::ostringstream os;
    os << "graph " << (spec.name.empty() ? "unnamed" : spec.name) << "\n";
    for (const auto& l : spec.layers) {
        os << "layer name=" << l.name << " kind=" << to_string(l.kind);
        if (!l.inputs.empty()) os << " inputs=" << join(l.inputs, ',');
        auto conv_keys = [&] {
            os << " c_in=" << l.c_in << " c_out=" << l.c_out << " kernel=" << l.kernel_t << "x" << l.kernel_f
               << " stride=" << l.stride_t << "x" << l.stride_f;
        };
        switch (l.kind) {
            case LayerKind::Input:
                if (l.channels > 0) os << " channels=" << l.channels << " width=" << l.width;
                else os << " units=" << l.units;
                break;
            case LayerKind::Conv: conv_keys(); break;
            case LayerKind::Deconv: conv_keys(); os << " width=" << l.width; break;
            case LayerKind::BatchNorm: os << " channels=" << l.channels; break;
            case LayerKind::Activation: os << " fn=" << to_string(l.fn); break;
            case LayerKind::Reshape:
                if (l.mode == ReshapeMode::ToSeq) os << " mode=to_seq";
                else os << " mode=to_map channels=" << l.channels << " width=" << l.width;
                break;
            case LayerKind::Lstm:
            case LayerKind::Fc: os << " in=" << l.in << " units=" << l.units; break;
            case LayerKind::Concat:
            case LayerKind::MaskApply: break;
        }
        if (!l.sharing_group.empty()) os << " share=" << l.sharing_group;
        if (l.stage > 0) os << " stage=" << l.stage;
        os << "\n";
    }
    if (!spec.outputs.empty()) os << "outputs " << join(spec.outputs, ' ') << "\n";
    return os.str();
}

GraphSpec parse_spec(std::string_view text) {
    GraphSpec g;
    std::size_t lineno = 0;
    std::istringstream is{std::string(text)};
    std::string line;
    auto err = [&](const std::string& what) -> SpecError {
        return SpecError("spec line " + std::to_string(lineno) + ": " + what);
    };
    auto to_size = [&](const std::string& key, const std::string& v) -> std::size_t {
        std::size_t pos = 0;
        unsigned long long x = 0;
        try {
            x = std::stoull(v, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != v.size() || v[0] == '-') throw err("bad value '" + v + "' for " + key);
        return static_cast<std::size_t>(x);
    };
    auto pair_of = [&](const std::string& key, const std::string& v) {
        const auto parts = split(v, 'x');
        if (parts.size() != 2) throw err(key + " must look like AxB, got '" + v + "'");
        return std::pair{to_size(key, parts[0]), to_size(key, parts[1])};
    };

    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head) || head[0] == '#') continue;
        if (head == "graph") {
            ls >> g.name;
        } else if (head == "outputs") {
            std::string o;
            while (ls >> o) g.outputs.push_back(o);
        } else if (head == "layer") {
            LayerSpec l;
            bool have_kind = false;
            std::string tok;
            while (ls >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos || eq == 0) throw err("expected key=value, got '" + tok + "'");
                const std::string key = tok.substr(0, eq);
                const std::string v = tok.substr(eq + 1);
                if (key == "name") l.name = v;
                else if (key == "kind") {
                    const auto k = parse_layer_kind(v);
                    if (!k) throw err("unknown layer kind '" + v + "'");
                    l.kind = *k;
                    have_kind = true;
                } else if (key == "inputs") l.inputs = split(v, ',');
                else if (key == "c_in") l.c_in = to_size(key, v);
                else if (key == "c_out") l.c_out = to_size(key, v);
                else if (key == "kernel") std::tie(l.kernel_t, l.kernel_f) = pair_of(key, v);
                else if (key == "stride") std::tie(l.stride_t, l.stride_f) = pair_of(key, v);
                else if (key == "channels") l.channels = to_size(key, v);
                else if (key == "width") l.width = to_size(key, v);
                else if (key == "in") l.in = to_size(key, v);
                else if (key == "units") l.units = to_size(key, v);
                else if (key == "stage") l.stage = to_size(key, v);
                else if (key == "share") l.sharing_group = v;
                else if (key == "fn") {
                    const auto f = parse_activation(v);
                    if (!f) throw err("unknown activation '" + v + "'");
                    l.fn = *f;
                } else if (key == "mode") {
                    if (v == "to_seq") l.mode = ReshapeMode::ToSeq;
                    else if (v == "to_map") l.mode = ReshapeMode::ToMap;
                    else throw err("unknown reshape mode '" + v + "'");
                } else {
                    throw err("unknown key '" + key + "'");
                }
            }
            if (l.name.empty()) throw err("layer without name=");
            if (!have_kind) throw err("layer '" + l.name + "' without kind=");
            g.layers.push_back(std::move(l));
        } else {
            throw err("unknown directive '" + head + "'");
        }
    }
    return g;
}

}  // namespace plcrnn::model
