#include "plcrnn/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "plcrnn/audio/mixer.hpp"
#include "plcrnn/error.hpp"
#include "plcrnn/model/checkpoint.hpp"
#include "plcrnn/model/enhance.hpp"
#include "plcrnn/targets/targets.hpp"
#include "plcrnn/train/adam.hpp"
#include "plcrnn/train/batching.hpp"

namespace plcrnn::train {

namespace {

std::vector<targets::StageTargets> build_all(const std::vector<audio::Utterance>& corpus,
                                             const targets::StagePlan& plan) {
    std::vector<targets::StageTargets> out;
    out.reserve(corpus.size());
    for (const auto& u : corpus) {
        out.push_back(targets::build_stage_targets(u.pair, plan));
        out.back().masks.clear();  // training only needs magnitudes
    }
    return out;
}

std::vector<const targets::StageTargets*> pick(const std::vector<targets::StageTargets>& all,
                                               const std::vector<std::size_t>& idx) {
    std::vector<const targets::StageTargets*> p;
    for (auto i : idx) p.push_back(&all[i]);
    return p;
}

// Utterance-weighted mean of batch losses over the whole set, without
// touching parameters. BN state is saved and restored around train-mode
// passes so the measurement has no side effects.
template <typename Real>
double corpus_loss(model::ModelGraph<Real>& model, const std::vector<targets::StageTargets>& all,
                   const targets::StagePlan& plan, std::size_t batch, ad::NormMode mode) {
    const auto saved = model.bn_states();
    double sum = 0;
    for (const auto& b : make_batches(all.size(), batch)) {
        const auto bt = targets::collate<Real>(pick(all, b));
        const auto outputs = model.forward(bt.noisy_mag, mode, &bt.mask);
        const double loss = static_cast<double>(targets::total_loss(outputs, bt, plan).item());
        sum += loss * static_cast<double>(b.size());
    }
    model.bn_states() = saved;
    return sum / static_cast<double>(all.size());
}

template <typename Real>
struct Snapshot {
    std::vector<std::vector<Real>> params;
    std::map<std::string, ad::BatchNormState<Real>> bn;

    void take(const model::ModelGraph<Real>& m) {
        params.clear();
        for (const auto& p : m.parameters()) params.emplace_back(p.data().begin(), p.data().end());
        bn = m.bn_states();
    }
    void restore(model::ModelGraph<Real>& m) const {
        auto ps = m.parameters();
        for (std::size_t i = 0; i < ps.size(); ++i) std::copy(params[i].begin(), params[i].end(), ps[i].data().begin());
        m.bn_states() = bn;
    }
};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

std::string log_header(std::size_t stages) {
    std::string h = "# epoch\tlr\ttrain_loss\teval_loss\tconsecutive\tcumulative";
    for (std::size_t q = 1; q <= stages; ++q) h += "\tsdr_s" + std::to_string(q);
    return h;
}

std::string log_line(const EpochRecord& r) {
    std::string s = std::to_string(r.epoch) + "\t" + fmt(r.lr) + "\t" + fmt(r.train_loss) + "\t" + fmt(r.eval_loss) +
                    "\t" + std::to_string(r.consecutive) + "\t" + std::to_string(r.cumulative);
    for (double v : r.stage_sdr) s += "\t" + fmt(v);
    return s;
}

template <typename Real>
double evaluate_loss(model::ModelGraph<Real>& model, const std::vector<audio::Utterance>& corpus,
                     const targets::StagePlan& plan, std::size_t batch) {
    if (corpus.empty()) throw InputError("evaluate_loss: empty corpus");
    return corpus_loss(model, build_all(corpus, plan), plan, batch, ad::NormMode::Eval);
}

template <typename Real>
std::vector<double> stage_sdr(model::ModelGraph<Real>& model, const std::vector<audio::Utterance>& corpus) {
    if (corpus.empty()) throw InputError("stage_sdr: empty corpus");
    std::vector<double> sums;
    for (const auto& u : corpus) {
        const auto r = model::enhance_utterance(model, u.pair.noisy);
        if (sums.empty()) sums.assign(r.stage_magnitudes.size(), 0.0);
        for (std::size_t q = 0; q < r.stage_magnitudes.size(); ++q) {
            const auto est = model::reconstruct(u.pair.noisy, r.stage_magnitudes[q]);
            sums[q] += audio::sdr(u.pair.clean, est);
        }
    }
    for (auto& s : sums) s /= static_cast<double>(corpus.size());
    return sums;
}

template <typename Real>
TrainState train(model::ModelGraph<Real>& model, const std::vector<audio::Utterance>& train_set,
                 const std::vector<audio::Utterance>& eval_set, const TrainConfig& cfg) {
    const targets::StagePlan& plan = cfg.plan;
    plan.validate();
    if (train_set.empty() || eval_set.empty()) throw InputError("train: training and eval corpora must be non-empty");
    if (model.info().stages != plan.stages || model.info().kind != plan.kind) {
        throw ContractError("train: model was built for Q=" + std::to_string(model.info().stages) + "/" +
                            targets::to_string(model.info().kind) + " but the plan is Q=" +
                            std::to_string(plan.stages) + "/" + targets::to_string(plan.kind));
    }

    const auto train_targets = build_all(train_set, plan);
    const auto eval_targets = build_all(eval_set, plan);

    PlateauSchedule schedule(ScheduleConfig{cfg.lr0, cfg.halve_after, cfg.stop_after, cfg.max_epochs,
                                            cfg.compare_to_best});
    auto params = model.parameters();
    const auto& names = model.param_names();
    AdamState<Real> adam;
    Snapshot<Real> best;

    TrainState state;
    state.initial_train_loss = corpus_loss(model, train_targets, plan, cfg.batch, ad::NormMode::Train);
    if (cfg.log != nullptr) *cfg.log << log_header(plan.stages) << "\n" << std::flush;

    const Rng shuffle_root = Rng(cfg.seed).derive("shuffle");
    while (!schedule.should_stop()) {
        const std::size_t epoch = schedule.epochs_done() + 1;
        const double lr = schedule.lr();
        Rng shuffle = shuffle_root.derive(static_cast<std::uint64_t>(epoch));
        const auto batches = make_batches(train_targets.size(), cfg.batch, &shuffle);

        double sum = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto bt = targets::collate<Real>(pick(train_targets, batches[bi]));
            const auto outputs = model.forward(bt.noisy_mag, ad::NormMode::Train, &bt.mask);
            const auto loss = targets::total_loss(outputs, bt, plan);
            const double value = static_cast<double>(loss.item());
            if (!std::isfinite(value)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(bi + 1));
            }
            model.zero_grad();
            ad::backward(loss);
            if (cfg.clip) clip_grad_norm(params, cfg.clip_norm);
            try {
                adam_step(params, names, adam, lr);
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi + 1) + ": " +
                                   e.what());
            }
            sum += value * static_cast<double>(batches[bi].size());
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = sum / static_cast<double>(train_targets.size());
        rec.eval_loss = corpus_loss(model, eval_targets, plan, cfg.batch, ad::NormMode::Eval);
        if (!std::isfinite(rec.eval_loss)) {
            throw NumericError("non-finite eval loss at epoch " + std::to_string(epoch));
        }
        schedule.observe(rec.eval_loss);
        rec.consecutive = schedule.consecutive();
        rec.cumulative = schedule.cumulative();
        if (cfg.stage_sdr) rec.stage_sdr = stage_sdr(model, eval_set);

        if (schedule.improved()) {
            best.take(model);
            state.best_eval_loss = rec.eval_loss;
            state.best_epoch = epoch;
            if (!cfg.checkpoint.empty()) model::save_checkpoint(model, cfg.checkpoint);
        }
        if (cfg.log != nullptr) *cfg.log << log_line(rec) << "\n" << std::flush;
        state.history.push_back(std::move(rec));
    }

    if (cfg.restore_best && !best.params.empty()) best.restore(model);
    state.epoch = schedule.epochs_done();
    state.lr = schedule.lr();
    state.consecutive = schedule.consecutive();
    state.cumulative = schedule.cumulative();
    return state;
}

#define PLCRNN_INSTANTIATE(Real)                                                                                \
    template TrainState train(model::ModelGraph<Real>&, const std::vector<audio::Utterance>&,                 \
                              const std::vector<audio::Utterance>&, const TrainConfig&);                      \
    template double evaluate_loss(model::ModelGraph<Real>&, const std::vector<audio::Utterance>&,             \
                                  const targets::StagePlan&, std::size_t);                                    \
    template std::vector<double> stage_sdr(model::ModelGraph<Real>&, const std::vector<audio::Utterance>&);
PLCRNN_INSTANTIATE(float)
PLCRNN_INSTANTIATE(double)
#undef PLCRNN_INSTANTIATE

}  // namespace plcrnn::train
