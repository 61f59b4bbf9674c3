#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "plcrnn/audio/corpus.hpp"
#include "plcrnn/model/model_graph.hpp"
#include "plcrnn/targets/stage_plan.hpp"
#include "plcrnn/train/schedule.hpp"

namespace plcrnn::train {

struct TrainConfig {
    double lr0 = 1e-3;
    std::size_t batch = 16;
    std::size_t max_epochs = 100;
    std::size_t halve_after = 3;
    std::size_t stop_after = 10;
    bool compare_to_best = false;
    bool clip = true;
    double clip_norm = 5.0;
    std::uint64_t seed = 0;
    targets::StagePlan plan = targets::StagePlan::standard(3, targets::TargetKind::Tms);
    double width_scale = 1.0;
    bool stage_sdr = true;          // per-stage eval SDR in the log
    bool restore_best = true;       // leave the best-eval parameters in the model
    std::filesystem::path checkpoint;  // best-eval checkpoint, written when non-empty
    std::ostream* log = nullptr;        // tab-separated epoch log
};

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0;
    double train_loss = 0;
    double eval_loss = 0;
    std::size_t consecutive = 0;
    std::size_t cumulative = 0;
    std::vector<double> stage_sdr;  // mean eval SDR per stage output, dB
};

struct TrainState {
    std::size_t epoch = 0;
    double lr = 0;
    double initial_train_loss = 0;  // before any update
    double best_eval_loss = 0;
    std::size_t best_epoch = 0;
    std::size_t consecutive = 0;
    std::size_t cumulative = 0;
    std::vector<EpochRecord> history;
};

/// "epoch lr train_loss eval_loss consecutive cumulative sdr_s1 .. sdr_sQ",
/// tab-separated, prefixed with '#'.
std::string log_header(std::size_t stages);
std::string log_line(const EpochRecord& record);

/// Trains with Adam on utterance minibatches (shuffled per epoch from a
/// sub-stream of cfg.seed), zero-padded and loss-masked. After each epoch
/// the eval loss (BN in eval mode) drives the plateau schedule. Throws
/// NumericError with epoch and batch on a non-finite loss or gradient.
template <typename Real>
TrainState train(model::ModelGraph<Real>& model, const std::vector<audio::Utterance>& train_set,
                 const std::vector<audio::Utterance>& eval_set, const TrainConfig& cfg);

/// Mean alpha-weighted loss over a corpus (eval-mode BN), utterance-averaged.
template <typename Real>
double evaluate_loss(model::ModelGraph<Real>& model, const std::vector<audio::Utterance>& corpus,
                     const targets::StagePlan& plan, std::size_t batch = 16);

/// Mean SDR (dB) of each stage's reconstruction against the clean signal.
template <typename Real>
std::vector<double> stage_sdr(model::ModelGraph<Real>& model, const std::vector<audio::Utterance>& corpus);

}  // namespace plcrnn::train
