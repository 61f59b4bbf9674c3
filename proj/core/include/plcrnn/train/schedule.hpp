#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace plcrnn::train {

struct ScheduleConfig {
    double lr0 = 1e-3;
    std::size_t halve_after = 3;   // consecutive increases that halve the rate
    std::size_t stop_after = 10;   // stop once cumulative increases exceed this
    std::size_t max_epochs = 100;
    bool compare_to_best = false;  // count increases against the best loss instead of the previous one
};

/// Learning-rate and early-stopping automaton driven only by the sequence of
/// per-epoch evaluation losses.
///
/// After each epoch: a loss strictly above the reference (previous epoch, or
/// best so far with compare_to_best) bumps both counters, otherwise the
/// consecutive counter resets. Reaching halve_after consecutive increases
/// halves the rate and resets that counter; the cumulative counter never
/// resets, and training stops when it exceeds stop_after or when
/// max_epochs epochs have run.
class PlateauSchedule {
public:
    explicit PlateauSchedule(ScheduleConfig config = {});

    /// Records the eval loss of the epoch just finished.
    void observe(double eval_loss);

    double lr() const { return lr_; }
    std::size_t epochs_done() const { return epoch_; }
    std::size_t consecutive() const { return consecutive_; }
    std::size_t cumulative() const { return cumulative_; }
    std::size_t halvings() const { return halvings_; }
    double best() const { return best_; }
    /// True when the last observed epoch set a new best loss.
    bool improved() const { return improved_; }
    bool should_stop() const { return stop_; }
    const ScheduleConfig& config() const { return config_; }

private:
    ScheduleConfig config_;
    double lr_;
    std::size_t epoch_ = 0;
    double previous_ = std::numeric_limits<double>::quiet_NaN();
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t consecutive_ = 0;
    std::size_t cumulative_ = 0;
    std::size_t halvings_ = 0;
    bool improved_ = false;
    bool stop_ = false;
};

struct ScheduleTrace {
    std::vector<double> lr;            // rate used in epoch e (index e - 1)
    std::size_t last_epoch = 0;        // epoch after which training stops
    std::vector<std::size_t> halved_after;  // epochs whose loss triggered a halving
};

/// Replays `eval_losses` (one per epoch) through the automaton, stopping
/// early where the automaton would.
ScheduleTrace simulate_schedule(const std::vector<double>& eval_losses, const ScheduleConfig& config = {});

}  // namespace plcrnn::train
