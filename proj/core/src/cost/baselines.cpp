#include "plcrnn/cost/complexity.hpp"
#include "plcrnn/dsp/stft.hpp"
#include "plcrnn/error.hpp"

namespace plcrnn::cost {

using model::GraphSpec;
using model::LayerKind;
using model::LayerSpec;

namespace {

LayerSpec seq_input(std::string name, std::size_t units) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = LayerKind::Input;
    l.units = units;
    return l;
}

LayerSpec dense(std::string name, LayerKind kind, std::string src, std::size_t in, std::size_t units, std::size_t stage) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = kind;
    l.inputs = {std::move(src)};
    l.in = in;
    l.units = units;
    l.stage = stage;
    return l;
}

LayerSpec concat(std::string name, std::vector<std::string> srcs, std::size_t stage) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = LayerKind::Concat;
    l.inputs = std::move(srcs);
    l.stage = stage;
    return l;
}

}  // namespace

GraphSpec pl_dnn_spec() {
    constexpr std::size_t kContext = 11;
    GraphSpec g;
    g.name = "pl-dnn";
    g.layers.push_back(seq_input("noisy", kContext * dsp::kBins));
    std::string x = "noisy";
    std::size_t width = kContext * dsp::kBins;
    for (std::size_t q = 1; q <= 3; ++q) {
        const std::string p = "s" + std::to_string(q) + ".";
        g.layers.push_back(dense(p + "fc1", LayerKind::Fc, x, width, 2048, q));
        g.layers.push_back(dense(p + "fc2", LayerKind::Fc, p + "fc1", 2048, 2048, q));
        g.layers.push_back(dense(p + "out", LayerKind::Fc, p + "fc2", 2048, dsp::kBins, q));
        x = p + "out";
        width = dsp::kBins;
        g.outputs.push_back(x);
    }
    return g;
}

GraphSpec pl_lstm_spec() {
    GraphSpec g;
    g.name = "pl-lstm";
    g.layers.push_back(seq_input("noisy", dsp::kBins));
    std::vector<std::string> cascade = {"noisy"};
    for (std::size_t q = 1; q <= 3; ++q) {
        const std::string p = "s" + std::to_string(q) + ".";
        g.layers.push_back(concat(p + "cascade", cascade, q));
        const std::size_t width = q * dsp::kBins;
        g.layers.push_back(dense(p + "lstm1", LayerKind::Lstm, p + "cascade", width, 1024, q));
        g.layers.push_back(dense(p + "lstm2", LayerKind::Lstm, p + "lstm1", 1024, 1024, q));
        g.layers.push_back(dense(p + "out", LayerKind::Fc, p + "lstm2", 1024, dsp::kBins, q));
        cascade.push_back(p + "out");
        g.outputs.push_back(p + "out");
    }
    return g;
}

GraphSpec crnn_spec(double scale) {
    constexpr std::size_t kEncoder[5] = {16, 32, 64, 128, 256};
    std::size_t enc[5];
    for (int i = 0; i < 5; ++i) enc[i] = model::scaled_channels(kEncoder[i], scale);
    std::size_t widths[6] = {dsp::kBins};
    for (int i = 1; i < 6; ++i) widths[i] = (widths[i - 1] - 3) / 2 + 1;
    const std::size_t hidden = enc[4] * widths[5];

    GraphSpec g;
    g.name = scale == 1.0 ? "crnn" : (scale == 0.5 ? "scrnn" : "crnn-scaled");
    LayerSpec in;
    in.name = "noisy";
    in.kind = LayerKind::Input;
    in.channels = 1;
    in.width = dsp::kBins;
    g.layers.push_back(in);

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
    auto bn_act = [&](const std::string& id, const std::string& src, std::size_t c) {
        LayerSpec b;
        b.name = "bn" + id;
        b.kind = LayerKind::BatchNorm;
        b.inputs = {src};
        b.channels = c;
        g.layers.push_back(b);
        LayerSpec a;
        a.name = "elu" + id;
        a.kind = LayerKind::Activation;
        a.inputs = {b.name};
        g.layers.push_back(a);
        return a.name;
    };

    std::string x = "noisy";
    std::size_t c = 1;
    std::string enc_out[5];
    for (int i = 0; i < 5; ++i) {
        const std::string id = std::to_string(i + 1);
        g.layers.push_back(conv_like("conv" + id, LayerKind::Conv, x, c, enc[i]));
        x = enc_out[i] = bn_act(id, "conv" + id, enc[i]);
        c = enc[i];
    }
    LayerSpec to_seq;
    to_seq.name = "to_seq";
    to_seq.kind = LayerKind::Reshape;
    to_seq.inputs = {x};
    g.layers.push_back(to_seq);
    g.layers.push_back(dense("lstm1", LayerKind::Lstm, "to_seq", hidden, hidden, 0));
    g.layers.push_back(dense("lstm2", LayerKind::Lstm, "lstm1", hidden, hidden, 0));
    LayerSpec to_map;
    to_map.name = "to_map";
    to_map.kind = LayerKind::Reshape;
    to_map.mode = model::ReshapeMode::ToMap;
    to_map.inputs = {"lstm2"};
    to_map.channels = enc[4];
    to_map.width = widths[5];
    g.layers.push_back(to_map);
    x = "to_map";
    c = enc[4];
    for (int j = 1; j <= 5; ++j) {
        const std::string id = std::to_string(j);
        g.layers.push_back(concat("skip" + id, {x, enc_out[5 - j]}, 0));
        const std::size_t co = j < 5 ? enc[4 - j] : 1;
        LayerSpec d = conv_like("deconv" + id, LayerKind::Deconv, "skip" + id, c + enc[5 - j], co);
        d.width = widths[5 - j];
        g.layers.push_back(d);
        x = j < 5 ? bn_act("d" + id, d.name, co) : d.name;
        c = co;
    }
    LayerSpec out;
    out.name = "out";
    out.kind = LayerKind::Activation;
    out.fn = ad::Activation::Softplus;
    out.inputs = {x};
    g.layers.push_back(out);
    g.outputs = {"out"};
    return g;
}

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names = {"pl-dnn", "pl-lstm", "crnn", "scrnn", "pl-crnn-q3", "pl-crnn-q5"};
    return names;
}

GraphSpec builtin_spec(std::string_view name) {
    if (name == "pl-dnn") return pl_dnn_spec();
    if (name == "pl-lstm") return pl_lstm_spec();
    if (name == "crnn") return crnn_spec(1.0);
    if (name == "scrnn") return crnn_spec(0.5);
    if (name == "pl-crnn-q3" || name == "pl-crnn-q5") {
        GraphSpec g = model::plcrnn_spec(name.back() == '3' ? 3 : 5, targets::TargetKind::Tms, 1.0);
        g.name = std::string(name);
        return g;
    }
    std::string valid;
    for (const auto& n : builtin_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw InputError("unknown builtin spec '" + std::string(name) + "'; valid names: " + valid);
}

}  // namespace plcrnn::cost
