#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "plcrnn/model/graph_spec.hpp"

namespace plcrnn::cost {

/// T * F * (C_in * K_T * K_F + 1) * C_out, with F the output width.
/// Throws InputError if any argument is 0.
std::uint64_t fma_conv(std::uint64_t frames, std::uint64_t width, std::uint64_t c_in, std::uint64_t c_out,
                       std::uint64_t k_t, std::uint64_t k_f);

/// F_i * F_o (bias excluded).
std::uint64_t fma_fc(std::uint64_t f_in, std::uint64_t f_out);

struct LstmCost {
    std::uint64_t params = 0;  // 4 (D H + H H + H)
    std::uint64_t fmas = 0;    // 4 (D H + H H) per frame
};
LstmCost lstm_cost(std::uint64_t d_in, std::uint64_t hidden);

struct CostRow {
    std::string layer;
    std::string kind;
    std::string group;         // sharing group, empty if none
    std::uint64_t params = 0;  // 0 for repeat uses of a shared group
    std::uint64_t fmas = 0;
};

/// Per-layer parameter and FMA counts. Totals are the row sums: a shared
/// group's parameters appear on its first use only, its FMAs on every use.
/// BN parameters count; BN and activation FMAs do not.
struct CostReport {
    std::string name;
    std::size_t frames = 1;
    std::vector<CostRow> rows;
    std::uint64_t total_params = 0;
    std::uint64_t total_fmas = 0;
};

/// Validates `spec` (SpecError names the layer at fault) and counts costs
/// for `frames` output frames (1 gives the per-frame figure).
CostReport analyze(const model::GraphSpec& spec, std::size_t frames = 1);

enum class ReportFormat { Text, Machine };

/// Text: aligned table plus totals in raw units and millions (2 decimals).
/// Machine: tab-separated "layer kind group params fmas" rows after a
/// '#'-prefixed header, closed by a "total" row.
std::string render_report(const CostReport& report, ReportFormat format);

/// Parses the machine format back; throws SpecError on malformed input or
/// when the total row disagrees with the row sums.
CostReport parse_report(std::string_view text);

/// Count in millions with two decimals, e.g. "1.22".
std::string millions(std::uint64_t count);

/// Names accepted by builtin_spec: pl-dnn, pl-lstm, crnn, scrnn,
/// pl-crnn-q3, pl-crnn-q5.
const std::vector<std::string>& builtin_names();
/// Throws InputError listing the valid names for an unknown one.
model::GraphSpec builtin_spec(std::string_view name);

/// Stage-wise DNN: 11-frame context input (1771) -> 2048 -> 2048 -> 161,
/// later stages reading the previous stage's 161-d output.
model::GraphSpec pl_dnn_spec();
/// Stage-wise LSTM: [1024 LSTM, 1024 LSTM, 161 FC] per stage with dense
/// cascade inputs of 161, 322 and 483 features.
model::GraphSpec pl_lstm_spec();
/// Single-stage CRNN with encoder channels 16..256 (x scale) and two LSTMs
/// of width channels*4; scale 0.5 gives the small variant.
model::GraphSpec crnn_spec(double scale = 1.0);

}  // namespace plcrnn::cost
