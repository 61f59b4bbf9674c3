#include "plcrnn/train/schedule.hpp"

#include <cmath>

#include "plcrnn/error.hpp"

namespace plcrnn::train {

PlateauSchedule::PlateauSchedule(ScheduleConfig config) : config_(config), lr_(config.lr0) {
    if (!(config.lr0 > 0.0)) throw InputError("learning rate must be positive");
    if (config.halve_after < 1 || config.stop_after < 1 || config.max_epochs < 1) {
        throw InputError("schedule counters must be positive");
    }
}

void PlateauSchedule::observe(double eval_loss) {
    if (stop_) throw StateError("schedule already stopped");
    if (std::isnan(eval_loss)) throw NumericError("eval loss is NaN at epoch " + std::to_string(epoch_ + 1));
    ++epoch_;
    const double reference = config_.compare_to_best ? best_ : previous_;
    const bool increase = epoch_ > 1 && eval_loss > reference;
    if (increase) {
        ++consecutive_;
        ++cumulative_;
        if (consecutive_ >= config_.halve_after) {
            lr_ *= 0.5;
            ++halvings_;
            consecutive_ = 0;
        }
    } else {
        consecutive_ = 0;
    }
    improved_ = eval_loss < best_;
    if (improved_) best_ = eval_loss;
    previous_ = eval_loss;
    stop_ = cumulative_ > config_.stop_after || epoch_ >= config_.max_epochs;
}

ScheduleTrace simulate_schedule(const std::vector<double>& eval_losses, const ScheduleConfig& config) {
    PlateauSchedule s(config);
    ScheduleTrace trace;
    for (double loss : eval_losses) {
        trace.lr.push_back(s.lr());
        const auto before = s.halvings();
        s.observe(loss);
        if (s.halvings() != before) trace.halved_after.push_back(s.epochs_done());
        trace.last_epoch = s.epochs_done();
        if (s.should_stop()) break;
    }
    return trace;
}

}  // namespace plcrnn::train
