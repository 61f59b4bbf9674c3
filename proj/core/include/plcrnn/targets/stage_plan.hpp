#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace plcrnn::targets {

enum class TargetKind { Tms, Iam };

std::string to_string(TargetKind kind);
/// Accepts "tms" or "iam" (case-insensitive); throws InputError otherwise.
TargetKind parse_target_kind(std::string_view text);

inline constexpr double kIntermediateAlpha = 0.1;
inline constexpr double kFinalAlpha = 1.0;

/// Q stages: stages 1..Q-1 aim at the mixture improved by deltas_db[q] dB,
/// stage Q at clean speech.
struct StagePlan {
    std::size_t stages = 3;
    std::vector<double> deltas_db;  // Q - 1 entries, strictly increasing
    std::vector<double> alphas;     // Q entries
    TargetKind kind = TargetKind::Tms;

    /// Standard plans for Q = 2..5:
    ///   2: +20   3: +10 +20   4: +5 +10 +20   5: +5 +10 +15 +20 (dB)
    /// Throws InputError for any other Q.
    static StagePlan standard(std::size_t stages, TargetKind kind);

    /// Arbitrary plan with Q = deltas.size() + 1 and default alphas.
    static StagePlan custom(std::vector<double> deltas_db, TargetKind kind);

    /// Throws InputError unless the plan is internally consistent.
    void validate() const;
};

/// Supported standard stage counts.
inline constexpr std::size_t kMinStandardStages = 2;
inline constexpr std::size_t kMaxStandardStages = 5;

}  // namespace plcrnn::targets
