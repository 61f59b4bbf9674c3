#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "plcrnn/ad/serialize.hpp"
#include "plcrnn/audio/corpus.hpp"
#include "plcrnn/audio/mixer.hpp"
#include "plcrnn/audio/wav.hpp"
#include "plcrnn/cost/complexity.hpp"
#include "plcrnn/error.hpp"
#include "plcrnn/model/checkpoint.hpp"
#include "plcrnn/model/enhance.hpp"
#include "plcrnn/model/graph_spec.hpp"
#include "plcrnn/model/model_graph.hpp"
#include "plcrnn/rng.hpp"
#include "plcrnn/train/trainer.hpp"

namespace plcrnn::cli {

namespace fs = std::filesystem;

namespace {

using Real = float;

std::string fmt(double v, const char* spec = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// Options shared by train and sweep.
struct TrainFlags {
    std::string corpus;
    std::string eval_corpus;
    std::string target = "tms";
    double scale = 1.0;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    std::size_t batch = 16;
    std::size_t max_epochs = 100;
    std::size_t halve_after = 3;
    std::size_t stop_after = 10;
    bool compare_to_best = false;
    double clip_norm = 5.0;
    double bn_momentum = 0.99;
};

void add_train_flags(CLI::App& app, TrainFlags& f) {
    app.add_option("--corpus", f.corpus, "Training corpus directory written by 'mix'")->required();
    app.add_option("--eval-corpus", f.eval_corpus,
                   "Held-out corpus directory; when omitted the last tenth of --corpus is held out");
    app.add_option("--target", f.target, "Training target: tms or iam")
        ->check(CLI::IsMember({"tms", "iam"}, CLI::ignore_case))
        ->capture_default_str();
    app.add_option("--scale", f.scale, "Width scale applied to every channel count and LSTM width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--seed", f.seed, "Root seed for initialization and shuffling")->capture_default_str();
    app.add_option("--lr", f.lr, "Initial Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--batch", f.batch, "Utterances per minibatch")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--max-epochs", f.max_epochs, "Epoch limit")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--halve-after", f.halve_after, "Consecutive eval-loss increases that halve the learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--stop-after", f.stop_after, "Stop once cumulative eval-loss increases exceed this")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_flag("--compare-to-best", f.compare_to_best,
                 "Count an increase against the best eval loss so far instead of the previous epoch");
    app.add_option("--clip-norm", f.clip_norm, "Global gradient-norm clip; 0 disables clipping")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--bn-momentum", f.bn_momentum, "Running-statistic momentum of every batch-norm layer")
        ->check(CLI::Range(0.0, 0.999999))
        ->capture_default_str();
}

train::TrainConfig make_train_config(const TrainFlags& f, const targets::StagePlan& plan) {
    train::TrainConfig c;
    c.lr0 = f.lr;
    c.batch = f.batch;
    c.max_epochs = f.max_epochs;
    c.halve_after = f.halve_after;
    c.stop_after = f.stop_after;
    c.compare_to_best = f.compare_to_best;
    c.clip = f.clip_norm > 0;
    c.clip_norm = f.clip_norm > 0 ? f.clip_norm : 5.0;
    c.seed = f.seed;
    c.plan = plan;
    c.width_scale = f.scale;
    return c;
}

struct Split {
    std::vector<audio::Utterance> train;
    std::vector<audio::Utterance> eval;
};

Split load_split(const TrainFlags& f) {
    Split s;
    s.train = audio::load_corpus(f.corpus);
    if (!f.eval_corpus.empty()) {
        s.eval = audio::load_corpus(f.eval_corpus);
    } else {
        if (s.train.size() < 2) throw InputError("corpus needs at least 2 utterances to hold one out");
        const std::size_t held = std::max<std::size_t>(1, s.train.size() / 10);
        s.eval.assign(s.train.end() - static_cast<std::ptrdiff_t>(held), s.train.end());
        s.train.resize(s.train.size() - held);
    }
    if (s.train.empty() || s.eval.empty()) throw InputError("training and evaluation sets must be non-empty");
    return s;
}

struct SdrSummary {
    double noisy = 0;
    double enhanced = 0;
};

SdrSummary mean_sdr(model::ModelGraph<Real>& m, const std::vector<audio::Utterance>& corpus) {
    SdrSummary s;
    for (const auto& u : corpus) {
        s.noisy += audio::sdr(u.pair.clean, u.pair.noisy);
        s.enhanced += audio::sdr(u.pair.clean, model::enhance_utterance(m, u.pair.noisy).enhanced);
    }
    s.noisy /= static_cast<double>(corpus.size());
    s.enhanced /= static_cast<double>(corpus.size());
    return s;
}

// Effective configuration of a subcommand, one "# key = value" line each.
std::string echo_config(const CLI::App& app) {
    std::istringstream lines(app.config_to_str(true, false));
    std::string line, out;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '[') continue;
        out += "# " + line + "\n";
    }
    return out;
}

// ---- mix --------------------------------------------------------------------

struct MixFlags {
    std::string out;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::vector<double> snr_grid;
    double min_duration = 0.5;
    double max_duration = 2.0;
};

int cmd_mix(const MixFlags& f, std::ostream& out) {
    if (f.n == 0) throw InputError("--n must be at least 1");
    audio::SynthOptions opts;
    opts.snr_grid = f.snr_grid;
    opts.min_duration_s = f.min_duration;
    opts.max_duration_s = f.max_duration;
    if (!(f.min_duration > 0 && f.min_duration <= f.max_duration)) {
        throw InputError("durations must satisfy 0 < --min-duration <= --max-duration");
    }
    const auto corpus = audio::synth_corpus(f.n, f.seed, opts);
    audio::write_corpus(f.out, corpus);
    out << "wrote " << corpus.size() << " utterances to " << f.out << "\n";
    return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct PlanFlags {
    std::size_t q = 3;
    bool allow_custom = false;
    std::vector<double> deltas;
};

void add_plan_flags(CLI::App& app, PlanFlags& p) {
    app.add_option("--q", p.q, "Number of stages; standard plans exist for 2..5")->capture_default_str();
    app.add_flag("--allow-custom-plan", p.allow_custom, "Accept a non-standard stage plan given by --deltas");
    app.add_option("--deltas", p.deltas,
                   "Comma-separated SNR improvements (dB) of stages 1..Q-1; needs --allow-custom-plan")
        ->delimiter(',');
}

targets::StagePlan make_plan(const PlanFlags& p, targets::TargetKind kind) {
    if (!p.deltas.empty() || p.allow_custom) {
        if (!p.allow_custom) throw InputError("--deltas requires --allow-custom-plan");
        if (p.deltas.empty()) throw InputError("--allow-custom-plan requires --deltas");
        if (p.deltas.size() + 1 != p.q) {
            throw InputError("--deltas gives " + std::to_string(p.deltas.size()) + " values; Q=" +
                             std::to_string(p.q) + " needs " + std::to_string(p.q == 0 ? 0 : p.q - 1));
        }
        return targets::StagePlan::custom(p.deltas, kind);
    }
    return targets::StagePlan::standard(p.q, kind);
}

struct TrainCmd {
    TrainFlags train;
    PlanFlags plan;
    std::string out;
    std::string log;
};

int cmd_train(const TrainCmd& f, const CLI::App& app, std::ostream& out) {
    const auto plan = make_plan(f.plan, targets::parse_target_kind(f.train.target));
    const Split split = load_split(f.train);
    auto cfg = make_train_config(f.train, plan);
    cfg.checkpoint = f.out;
    const fs::path log_path = f.log.empty() ? fs::path(f.out + ".log.tsv") : fs::path(f.log);
    std::ofstream log(log_path);
    if (!log) throw IoError("cannot open log file " + log_path.string());
    log << echo_config(app);
    log.flush();
    cfg.log = &log;

    auto model = model::build_plcrnn<Real>(plan, f.train.scale, f.train.seed);
    model.set_bn_momentum(static_cast<Real>(f.train.bn_momentum));
    const auto state = train::train(model, split.train, split.eval, cfg);
    const auto sdr = mean_sdr(model, split.eval);
    out << "epochs\t" << state.epoch << "\n"
        << "best_epoch\t" << state.best_epoch << "\n"
        << "initial_train_loss\t" << fmt(state.initial_train_loss, "%.6g") << "\n"
        << "final_train_loss\t" << fmt(state.history.back().train_loss, "%.6g") << "\n"
        << "best_eval_loss\t" << fmt(state.best_eval_loss, "%.6g") << "\n"
        << "sdr_noisy\t" << fmt(sdr.noisy) << "\n"
        << "sdr_enhanced\t" << fmt(sdr.enhanced) << "\n"
        << "checkpoint\t" << f.out << "\n"
        << "log\t" << log_path.string() << "\n";
    return kExitOk;
}

// ---- enhance ----------------------------------------------------------------

struct EnhanceFlags {
    std::string ckpt;
    std::string in;
    std::string out;
    std::string dump_stages;
    std::string ref;
    std::optional<std::size_t> expect_q;
    std::optional<std::string> expect_target;
};

int cmd_enhance(const EnhanceFlags& f, std::ostream& out) {
    const auto info = model::read_checkpoint_info(f.ckpt);
    std::optional<targets::TargetKind> kind;
    if (f.expect_target) kind = targets::parse_target_kind(*f.expect_target);
    model::require_structure(info, f.expect_q, kind);
    auto model = model::load_checkpoint<Real>(f.ckpt);

    const auto noisy = audio::read_wav(f.in);
    const auto result = model::enhance_utterance(model, noisy);
    audio::write_wav(f.out, result.enhanced);
    if (!f.dump_stages.empty()) {
        fs::create_directories(f.dump_stages);
        for (std::size_t q = 0; q < result.stage_magnitudes.size(); ++q) {
            ad::save_tensor(fs::path(f.dump_stages) / ("stage" + std::to_string(q + 1) + ".ptns"),
                            result.stage_magnitudes[q]);
        }
    }
    out << "wrote " << f.out << " (" << result.enhanced.size() << " samples, Q=" << info.stages << ")\n";
    if (!f.ref.empty()) {
        const auto clean = audio::read_wav(f.ref);
        if (clean.size() != noisy.size()) throw InputError("--ref length differs from --in");
        out << "sdr_noisy\t" << fmt(audio::sdr(clean, noisy)) << "\n"
            << "sdr_enhanced\t" << fmt(audio::sdr(clean, result.enhanced)) << "\n";
    }
    return kExitOk;
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeFlags {
    std::string spec;
    std::size_t frames = 1;
    std::string format = "text";
};

model::GraphSpec resolve_spec(const std::string& ref) {
    constexpr std::string_view prefix = "builtin:";
    if (ref.rfind(prefix, 0) == 0) return cost::builtin_spec(std::string_view(ref).substr(prefix.size()));
    std::ifstream in(ref);
    if (!in) throw IoError("cannot open spec file " + ref);
    std::stringstream text;
    text << in.rdbuf();
    return model::parse_spec(text.str());
}

int cmd_analyze(const AnalyzeFlags& f, std::ostream& out) {
    const auto report = cost::analyze(resolve_spec(f.spec), f.frames);
    out << cost::render_report(report, f.format == "machine" ? cost::ReportFormat::Machine : cost::ReportFormat::Text);
    return kExitOk;
}

// ---- sweep ------------------------------------------------------------------

struct SweepFlags {
    TrainFlags train;
    std::vector<std::size_t> q_list = {2, 3, 4, 5};
    std::size_t threads = 1;
};

struct SweepRow {
    std::size_t q = 0;
    std::uint64_t params = 0;
    std::uint64_t fmas = 0;
    std::size_t epochs = 0;
    double eval_loss = 0;
    SdrSummary sdr;
};

SweepRow sweep_one(const SweepFlags& f, std::size_t q, const Split& split) {
    const auto kind = targets::parse_target_kind(f.train.target);
    const auto plan = targets::StagePlan::standard(q, kind);
    TrainFlags tf = f.train;
    // Each Q owns an independent seed, so runs do not depend on scheduling.
    tf.seed = Rng(f.train.seed).derive("sweep").derive(static_cast<std::uint64_t>(q)).seed();
    const auto cfg = make_train_config(tf, plan);
    auto model = model::build_plcrnn<Real>(plan, tf.scale, tf.seed);
    model.set_bn_momentum(static_cast<Real>(tf.bn_momentum));
    const auto state = train::train(model, split.train, split.eval, cfg);
    const auto cost = cost::analyze(model.spec(), 1);
    SweepRow row;
    row.q = q;
    row.params = model.count_params();
    row.fmas = cost.total_fmas;
    row.epochs = state.epoch;
    row.eval_loss = state.best_eval_loss;
    row.sdr = mean_sdr(model, split.eval);
    return row;
}

int cmd_sweep(const SweepFlags& f, std::ostream& out) {
    if (f.q_list.empty()) throw InputError("--q-list is empty");
    for (auto q : f.q_list) targets::StagePlan::standard(q, targets::TargetKind::Tms);  // validates Q
    targets::parse_target_kind(f.train.target);
    const Split split = load_split(f.train);

    std::vector<SweepRow> rows(f.q_list.size());
    std::vector<std::exception_ptr> errors(f.q_list.size());
    std::size_t next = 0;
    std::mutex next_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next == f.q_list.size()) return;
                i = next++;
            }
            try {
                rows[i] = sweep_one(f, f.q_list[i], split);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(f.threads, 1, f.q_list.size());
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    out << "# q\tparams\tfmas_per_frame\tepochs\tbest_eval_loss\tsdr_noisy\tsdr_enhanced\tsdr_improvement\n";
    for (const auto& r : rows) {
        out << r.q << "\t" << r.params << "\t" << r.fmas << "\t" << r.epochs << "\t" << fmt(r.eval_loss, "%.6g")
            << "\t" << fmt(r.sdr.noisy) << "\t" << fmt(r.sdr.enhanced) << "\t" << fmt(r.sdr.enhanced - r.sdr.noisy)
            << "\n";
    }
    return kExitOk;
}

// ---- application --------------------------------------------------------------

struct Flags {
    std::string config;
    MixFlags mix;
    TrainCmd train;
    EnhanceFlags enhance;
    AnalyzeFlags analyze;
    SweepFlags sweep;
};

void add_config(CLI::App& app, std::string& path) {
    app.add_option("--config", path,
                   "Config file: one 'flag-name = value' per line (no leading dashes, '#' starts a comment, "
                   "flags take 'true' or 'false', lists are comma-separated); command-line flags take precedence");
}

std::unique_ptr<CLI::App> make_app(Flags& f) {
    auto app = std::make_unique<CLI::App>("Progressive-learning CRNN speech enhancement toolkit", "plcrnn");
    app->require_subcommand(1);
    app->fallthrough(false);

    auto* mix = app->add_subcommand("mix", "Synthesize a noisy/clean corpus and write WAVs plus manifest.tsv");
    mix->add_option("--out", f.mix.out, "Output directory")->required();
    mix->add_option("--n", f.mix.n, "Number of utterances (>= 1)")->required();
    mix->add_option("--seed", f.mix.seed, "Root seed")->capture_default_str();
    mix->add_option("--snr-grid", f.mix.snr_grid, "Comma-separated SNR values in dB (default -5..10 step 1)")
        ->delimiter(',');
    mix->add_option("--min-duration", f.mix.min_duration, "Shortest utterance in seconds")->capture_default_str();
    mix->add_option("--max-duration", f.mix.max_duration, "Longest utterance in seconds")->capture_default_str();
    add_config(*mix, f.config);

    auto* train = app->add_subcommand("train", "Train a PL-CRNN on a corpus and write a checkpoint and epoch log");
    add_train_flags(*train, f.train.train);
    add_plan_flags(*train, f.train.plan);
    train->add_option("--out", f.train.out, "Checkpoint path (best eval loss)")->required();
    train->add_option("--log", f.train.log, "Epoch log path (default: <out>.log.tsv)");
    add_config(*train, f.config);

    auto* enhance = app->add_subcommand("enhance", "Enhance one 16 kHz mono WAV with a trained checkpoint");
    enhance->add_option("--ckpt", f.enhance.ckpt, "Checkpoint written by 'train'")->required();
    enhance->add_option("--in", f.enhance.in, "Noisy input WAV")->required();
    enhance->add_option("--out", f.enhance.out, "Enhanced output WAV")->required();
    enhance->add_option("--dump-stages", f.enhance.dump_stages,
                        "Directory for per-stage magnitude tensors stage1.ptns .. stageQ.ptns");
    enhance->add_option("--ref", f.enhance.ref, "Clean reference WAV; prints noisy and enhanced SDR");
    enhance->add_option("--q", f.enhance.expect_q, "Expected stage count; mismatch exits with code 4");
    enhance->add_option("--target", f.enhance.expect_target, "Expected target kind (tms or iam); mismatch exits 4")
        ->check(CLI::IsMember({"tms", "iam"}, CLI::ignore_case));
    add_config(*enhance, f.config);

    auto* analyze = app->add_subcommand("analyze", "Print parameter and multiply-add counts of a network");
    analyze->add_option("--spec", f.analyze.spec, "builtin:NAME (pl-dnn, pl-lstm, crnn, scrnn, pl-crnn-q3, "
                                                  "pl-crnn-q5) or a graph spec file")
        ->required();
    analyze->add_option("--frames", f.analyze.frames, "Frames the multiply-adds are counted over")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    analyze->add_option("--format", f.analyze.format, "Report format: text or machine")
        ->check(CLI::IsMember({"text", "machine"}))
        ->capture_default_str();
    add_config(*analyze, f.config);

    auto* sweep = app->add_subcommand("sweep", "Train one model per stage count and tabulate SDR improvement");
    add_train_flags(*sweep, f.sweep.train);
    sweep->add_option("--q-list", f.sweep.q_list, "Comma-separated stage counts")->delimiter(',')->capture_default_str();
    sweep->add_option("--threads", f.sweep.threads, "Worker threads, one training per thread")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_config(*sweep, f.config);
    return app;
}

int dispatch(CLI::App& app, Flags& f, std::ostream& out) {
    if (app.got_subcommand("mix")) return cmd_mix(f.mix, out);
    if (app.got_subcommand("train")) return cmd_train(f.train, *app.get_subcommand("train"), out);
    if (app.got_subcommand("enhance")) return cmd_enhance(f.enhance, out);
    if (app.got_subcommand("analyze")) return cmd_analyze(f.analyze, out);
    if (app.got_subcommand("sweep")) return cmd_sweep(f.sweep, out);
    return kExitUsage;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    s = s.substr(b, e - b + 1);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
    return s;
}

// Reads "key = value" lines into command-line arguments, skipping keys the
// command line already set.
std::vector<std::string> config_args(const std::string& path, const CLI::App& sub) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path);
    std::vector<std::string> args;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "config") throw InputError(path + ":" + std::to_string(line_no) + ": config files do not nest");
        const CLI::Option* opt = nullptr;
        try {
            opt = sub.get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw InputError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "' for '" +
                             sub.get_name() + "'");
        }
        if (opt->count() > 0) continue;
        args.push_back("--" + key + "=" + value);
    }
    return args;
}

int parse_error(CLI::App& app, const CLI::ParseError& e, std::ostream& out, std::ostream& err) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Flags flags;
    auto app = make_app(flags);
    try {
        app->parse(argc, argv);
    } catch (const CLI::RequiredError& e) {
        // A config file may supply required flags; the second pass checks again.
        if (flags.config.empty() || app->get_subcommands().empty()) return parse_error(*app, e, out, err);
    } catch (const CLI::ParseError& e) {
        return parse_error(*app, e, out, err);
    }
    try {
        if (!flags.config.empty()) {
            // Second pass: file values first, so the original flags win.
            CLI::App* sub = app->get_subcommands().front();
            std::vector<std::string> args{sub->get_name()};
            for (auto& a : config_args(flags.config, *sub)) args.push_back(std::move(a));
            for (int i = 2; i < argc; ++i) args.emplace_back(argv[i]);
            std::vector<const char*> av{argv[0]};
            for (const auto& a : args) av.push_back(a.c_str());
            flags = Flags{};
            app = make_app(flags);
            try {
                app->parse(static_cast<int>(av.size()), av.data());
            } catch (const CLI::ParseError& e) {
                return parse_error(*app, e, out, err);
            }
        }
        return dispatch(*app, flags, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numerical abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const CheckpointError& e) {
        err << "checkpoint error: " << e.what() << "\n";
        return kExitArtifact;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitOther;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"plcrnn"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::vector<std::string> subcommand_names() { return {"mix", "train", "enhance", "analyze", "sweep"}; }

std::vector<std::string> subcommand_flags(const std::string& subcommand) {
    Flags flags;
    auto app = make_app(flags);
    std::vector<std::string> names;
    for (const CLI::Option* opt : app->get_subcommand(subcommand)->get_options()) {
        for (const auto& n : opt->get_lnames()) names.push_back("--" + n);
    }
    return names;
}

}  // namespace plcrnn::cli
