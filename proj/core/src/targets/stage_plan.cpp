#include "plcrnn/targets/stage_plan.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "plcrnn/error.hpp"

namespace plcrnn::targets {

std::string to_string(TargetKind kind) { return kind == TargetKind::Tms ? "tms" : "iam"; }

TargetKind parse_target_kind(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "tms") return TargetKind::Tms;
    if (s == "iam") return TargetKind::Iam;
    throw InputError("unknown target kind '" + std::string(text) + "' (expected tms or iam)");
}

namespace {

std::vector<double> default_alphas(std::size_t stages) {
    std::vector<double> a(stages, kIntermediateAlpha);
    a.back() = kFinalAlpha;
    return a;
}

}  // namespace

StagePlan StagePlan::standard(std::size_t stages, TargetKind kind) {
    std::vector<double> deltas;
    switch (stages) {
        case 2: deltas = {20}; break;
        case 3: deltas = {10, 20}; break;
        case 4: deltas = {5, 10, 20}; break;
        case 5: deltas = {5, 10, 15, 20}; break;
        default:
            throw InputError("no standard stage plan for Q=" + std::to_string(stages) +
                             " (standard plans cover Q=2..5; supply explicit deltas for others)");
    }
    StagePlan p;
    p.stages = stages;
    p.deltas_db = std::move(deltas);
    p.alphas = default_alphas(stages);
    p.kind = kind;
    return p;
}

StagePlan StagePlan::custom(std::vector<double> deltas_db, TargetKind kind) {
    StagePlan p;
    p.stages = deltas_db.size() + 1;
    p.deltas_db = std::move(deltas_db);
    p.alphas = default_alphas(p.stages);
    p.kind = kind;
    p.validate();
    return p;
}

void StagePlan::validate() const {
    if (stages < 1) throw InputError("stage plan needs at least one stage");
    if (deltas_db.size() + 1 != stages) {
        throw InputError("stage plan with Q=" + std::to_string(stages) + " needs " + std::to_string(stages - 1) +
                         " deltas, got " + std::to_string(deltas_db.size()));
    }
    if (alphas.size() != stages) {
        throw InputError("stage plan with Q=" + std::to_string(stages) + " needs " + std::to_string(stages) +
                         " alphas, got " + std::to_string(alphas.size()));
    }
    for (std::size_t i = 0; i < deltas_db.size(); ++i) {
        if (!std::isfinite(deltas_db[i]) || deltas_db[i] < 0) throw InputError("stage deltas must be finite and >= 0");
        if (i > 0 && !(deltas_db[i] > deltas_db[i - 1])) throw InputError("stage deltas must be strictly increasing");
    }
    for (double a : alphas)
        if (!std::isfinite(a) || a < 0) throw InputError("stage alphas must be finite and >= 0");
}

}  // namespace plcrnn::targets
