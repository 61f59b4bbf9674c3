#include "plcrnn/cost/complexity.hpp"

#include <set>

#include "plcrnn/error.hpp"

namespace plcrnn::cost {

using model::LayerKind;

std::uint64_t fma_conv(std::uint64_t frames, std::uint64_t width, std::uint64_t c_in, std::uint64_t c_out,
                       std::uint64_t k_t, std::uint64_t k_f) {
    if (frames == 0 || width == 0 || c_in == 0 || c_out == 0 || k_t == 0 || k_f == 0) {
        throw InputError("fma_conv: all sizes must be >= 1");
    }
    return frames * width * (c_in * k_t * k_f + 1) * c_out;
}

std::uint64_t fma_fc(std::uint64_t f_in, std::uint64_t f_out) {
    if (f_in == 0 || f_out == 0) throw InputError("fma_fc: sizes must be >= 1");
    return f_in * f_out;
}

LstmCost lstm_cost(std::uint64_t d_in, std::uint64_t hidden) {
    if (d_in == 0 || hidden == 0) throw InputError("lstm_cost: sizes must be >= 1");
    return {4 * (d_in * hidden + hidden * hidden + hidden), 4 * (d_in * hidden + hidden * hidden)};
}

CostReport analyze(const model::GraphSpec& spec, std::size_t frames) {
    if (frames == 0) throw InputError("analyze: frames must be >= 1");
    const auto shapes = model::infer_shapes(spec);
    CostReport r;
    r.name = spec.name;
    r.frames = frames;
    std::set<std::string> seen_groups;
    const std::uint64_t T = frames;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        if (!l.has_params()) continue;
        CostRow row;
        row.layer = l.name;
        row.kind = model::to_string(l.kind);
        row.group = l.sharing_group;
        std::uint64_t params = 0;
        switch (l.kind) {
            case LayerKind::Conv:
            case LayerKind::Deconv:
                params = l.c_out * (l.c_in * l.kernel_t * l.kernel_f + 1);
                row.fmas = fma_conv(T, shapes[i].width, l.c_in, l.c_out, l.kernel_t, l.kernel_f);
                break;
            case LayerKind::BatchNorm:
                params = 2 * l.channels;
                break;
            case LayerKind::Lstm: {
                const auto c = lstm_cost(l.in, l.units);
                params = c.params;
                row.fmas = T * c.fmas;
                break;
            }
            case LayerKind::Fc:
                params = l.in * l.units + l.units;
                row.fmas = T * fma_fc(l.in, l.units);
                break;
            default:
                break;
        }
        const bool repeat = !l.sharing_group.empty() && !seen_groups.insert(l.sharing_group).second;
        row.params = repeat ? 0 : params;
        r.total_params += row.params;
        r.total_fmas += row.fmas;
        r.rows.push_back(std::move(row));
    }
    return r;
}

}  // namespace plcrnn::cost
