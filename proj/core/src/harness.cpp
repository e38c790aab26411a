#include "diffpurify/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace diffpurify {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Runs fn(0..n-1) across a small worker pool; slot-indexed outputs keep the
// aggregation order independent of scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex err_mutex;
    auto worker = [&]() {
        int i;
        while ((i = next.fetch_add(1)) < n) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < threads; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

NoiseSchedule ExperimentConfig::make_noise_schedule() const {
    if (beta_lo && beta_hi) return make_schedule(T, schedule_kind, *beta_lo, *beta_hi);
    return make_schedule(T, schedule_kind);
}

void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "dataset.kind") cfg.dataset_kind = value;
    else if (key == "dataset.amplitude") cfg.bars.amplitude = std::stod(value);
    else if (key == "dataset.noise") { cfg.bars.noise = std::stod(value); cfg.blobs.noise = std::stod(value); }
    else if (key == "dataset.center_x") cfg.blobs.center_x = std::stod(value);
    else if (key == "dataset.center_y") cfg.blobs.center_y = std::stod(value);
    else if (key == "dataset.train_count") cfg.train_count = std::stoul(value);
    else if (key == "dataset.eval_count") cfg.eval_count = std::stoul(value);
    else if (key == "dataset.seed") cfg.data_seed = std::stoull(value);
    else if (key == "schedule.T") cfg.T = std::stoi(value);
    else if (key == "schedule.kind") cfg.schedule_kind = schedule_kind_from_string(value);
    else if (key == "schedule.beta_lo") cfg.beta_lo = std::stod(value);
    else if (key == "schedule.beta_hi") cfg.beta_hi = std::stod(value);
    else if (key == "score.kind") cfg.score_kind = value;
    else if (key == "score.epochs") cfg.score_train.epochs = std::stoi(value);
    else if (key == "score.batch") cfg.score_train.batch_size = std::stoi(value);
    else if (key == "score.lr") cfg.score_train.lr = std::stod(value);
    else if (key == "score.hidden") cfg.score_train.hidden = parse_int_list(value);
    else if (key == "score.seed") cfg.score_train.seed = std::stoull(value);
    else if (key == "classifier.epochs") cfg.clf_train.epochs = std::stoi(value);
    else if (key == "classifier.batch") cfg.clf_train.batch_size = std::stoi(value);
    else if (key == "classifier.lr") cfg.clf_train.lr = std::stod(value);
    else if (key == "classifier.hidden") cfg.clf_train.hidden = parse_int_list(value);
    else if (key == "classifier.noise_aug") cfg.clf_train.noise_aug = std::stod(value);
    else if (key == "classifier.seed") cfg.clf_train.seed = std::stoull(value);
    else if (key == "attack.epsilon") cfg.attack.epsilon = std::stod(value);
    else if (key == "attack.steps") cfg.attack.steps = std::stoi(value);
    else if (key == "attack.step_size") cfg.attack.step_size = std::stod(value);
    else if (key == "guidance.use_long") cfg.guidance.use_long = parse_bool(value);
    else if (key == "guidance.use_short") cfg.guidance.use_short = parse_bool(value);
    else if (key == "guidance.norm") {
        if (value == "l1") cfg.guidance.norm = DistanceNorm::L1;
        else if (value == "l2") cfg.guidance.norm = DistanceNorm::L2;
        else throw std::invalid_argument("config: bad norm '" + value + "'");
    } else if (key == "guidance.operator") {
        if (value != "auto" && value != "bicubic4" && value != "identity" &&
            value != "nonlinear-lift")
            throw std::invalid_argument("config: bad operator '" + value + "'");
        cfg.operator_choice = value;
    } else if (key == "guidance.s") cfg.guidance.interval_s = std::stoi(value);
    else if (key == "guidance.e") cfg.guidance.interval_e = std::stoi(value);
    else if (key == "guidance.factor") {
        if (value == "inverse-sigma-squared") cfg.guidance.factor_rule = FactorRule::InverseSigmaSquared;
        else if (value == "constant") cfg.guidance.factor_rule = FactorRule::Constant;
        else throw std::invalid_argument("config: bad factor rule '" + value + "'");
    } else if (key == "guidance.factor_c") cfg.guidance.factor_constant = std::stod(value);
    else if (key == "guidance.jacobian") {
        if (value == "exact-vjp") cfg.guidance.jacobian_mode = JacobianMode::ExactVjp;
        else if (value == "jacobian-free") cfg.guidance.jacobian_mode = JacobianMode::JacobianFree;
        else throw std::invalid_argument("config: bad jacobian mode '" + value + "'");
    } else if (key == "guidance.scale") cfg.guidance.guidance_scale = std::stod(value);
    else if (key == "harness.root_seed") cfg.root_seed = std::stoull(value);
    else if (key == "harness.seeds") cfg.seed_count = std::stoi(value);
    else if (key == "harness.threads") cfg.threads = std::stoi(value);
    else if (key == "harness.out") cfg.out_dir = value;
    else if (key == "ablation.factor") {
        if (value == "inverse-sigma-squared") cfg.ablation_factor_rule = FactorRule::InverseSigmaSquared;
        else if (value == "constant") cfg.ablation_factor_rule = FactorRule::Constant;
        else throw std::invalid_argument("config: bad ablation factor rule '" + value + "'");
    } else if (key == "ablation.factor_c") cfg.ablation_factor_c = std::stod(value);
    else if (key == "ablation.eval_count") cfg.ablation_eval_count = std::stoul(value);
    else if (key == "ablation.deviation_count") cfg.deviation_count = std::stoul(value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void finalize_config(ExperimentConfig& cfg) {
    if (cfg.guidance.interval_s < 0) cfg.guidance.interval_s = cfg.T / 2;
    if (cfg.guidance.interval_e < 0) cfg.guidance.interval_e = cfg.T / 5;
    std::string op = cfg.operator_choice;
    if (op == "auto") op = cfg.dataset_kind == "bars8x8" ? "bicubic4" : "nonlinear-lift";
    if (op == "bicubic4") {
        cfg.guidance.op.kind = OperatorKind::Bicubic4;
        cfg.guidance.op.shape = {kBarsSide, kBarsSide, 1};
    } else if (op == "identity") {
        cfg.guidance.op.kind = OperatorKind::Identity;
    } else {
        cfg.guidance.op.kind = OperatorKind::NonlinearLift;
    }
}

ExperimentConfig load_config(const std::string& path) {
    ExperimentConfig cfg;
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " has no '='");
        apply_config_line(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    finalize_config(cfg);
    return cfg;
}

ExperimentSetup build_setup(const ExperimentConfig& cfg) {
    ExperimentSetup setup;
    setup.schedule = cfg.make_noise_schedule();

    std::vector<GmmComponent> comps;
    if (cfg.dataset_kind == "bars8x8") {
        setup.train = make_bars8x8(cfg.bars, cfg.train_count, derive_seed(cfg.data_seed, "train"));
        setup.eval = make_bars8x8(cfg.bars, cfg.eval_count, derive_seed(cfg.data_seed, "eval"));
        comps = bars_components(cfg.bars);
    } else if (cfg.dataset_kind == "blobs2d") {
        setup.train = make_blobs2d(cfg.blobs, cfg.train_count, derive_seed(cfg.data_seed, "train"));
        setup.eval = make_blobs2d(cfg.blobs, cfg.eval_count, derive_seed(cfg.data_seed, "eval"));
        comps = blobs2d_components(cfg.blobs);
    } else {
        throw std::invalid_argument("unknown dataset kind: " + cfg.dataset_kind);
    }

    if (cfg.score_kind == "gmm") {
        setup.score = std::make_shared<GmmScoreModel>(comps, setup.schedule);
    } else if (cfg.score_kind == "net") {
        setup.score = std::make_shared<NetScoreModel>(
            train_net_score(setup.train.samples, setup.schedule, cfg.score_train));
    } else {
        throw std::invalid_argument("unknown score kind: " + cfg.score_kind);
    }

    setup.clf = train_classifier(setup.train, cfg.clf_train);
    setup.clean_acc = accuracy(setup.clf, setup.eval.samples, setup.eval.labels);

    setup.attacked.reserve(setup.eval.samples.size());
    for (std::size_t i = 0; i < setup.eval.samples.size(); ++i)
        setup.attacked.push_back(
            pgd_attack(setup.clf, setup.eval.samples[i], setup.eval.labels[i], cfg.attack));
    setup.adv_acc = accuracy(setup.clf, setup.attacked, setup.eval.labels);
    return setup;
}

double mimic_deviation(const ScoreModel& model, const NoiseSchedule& sched, const State& x_ori,
                       const State& x_adv, const GuidanceConfig& cfg, std::uint64_t seed) {
    PurifyResult adv = purify(model, sched, x_adv, cfg, seed);
    PurifyResult ori = purify(model, sched, x_ori, cfg, seed);
    double total = 0.0;
    long steps = 0;
    for (std::size_t i = 0; i < adv.guidance_log.size(); ++i) {
        if (!adv.guidance_log[i].gated) continue;
        const State& a = adv.trajectory.states[i].x_hat;
        const State& o = ori.trajectory.states[i].x_hat;
        total += l1_norm(a - o) / static_cast<double>(a.size());
        ++steps;
    }
    return steps == 0 ? 0.0 : total / static_cast<double>(steps);
}

namespace {

struct SeedOutcome {
    double std_acc = 0.0;
    double rob_acc = 0.0;
    double dev = 0.0;
    double wall = 0.0;
    bool failed = false;
    std::string error;
};

SeedOutcome evaluate_one_seed(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                              const GuidanceConfig& gcfg, int seed_index, std::size_t eval_count,
                              bool with_deviation) {
    SeedOutcome out;
    std::uint64_t rep = derive_seed(cfg.root_seed, "replicate", static_cast<std::uint64_t>(seed_index));
    const auto& model = *setup.score;
    const auto& sched = setup.schedule;
    std::size_t count = std::min(eval_count, setup.eval.samples.size());
    try {
        std::vector<State> purified_clean(count), purified_adv(count);
        auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t s = derive_seed(rep, "purify", static_cast<std::uint64_t>(i));
            if (gcfg.enabled()) {
                purified_clean[i] = purify(model, sched, setup.eval.samples[i], gcfg, s).x0;
                purified_adv[i] = purify(model, sched, setup.attacked[i], gcfg, s).x0;
            } else {
                GuidanceConfig off = gcfg;
                purified_clean[i] = purify(model, sched, State{}, off, s).x0;
                purified_adv[i] = purified_clean[i];
            }
        }
        out.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::vector<int> labels(setup.eval.labels.begin(), setup.eval.labels.begin() + count);
        out.std_acc = accuracy(setup.clf, purified_clean, labels);
        out.rob_acc = accuracy(setup.clf, purified_adv, labels);
        if (with_deviation && gcfg.enabled()) {
            std::size_t dc = std::min(cfg.deviation_count, count);
            double acc = 0.0;
            for (std::size_t i = 0; i < dc; ++i)
                acc += mimic_deviation(model, sched, setup.eval.samples[i], setup.attacked[i], gcfg,
                                       derive_seed(rep, "mimic", static_cast<std::uint64_t>(i)));
            out.dev = dc == 0 ? 0.0 : acc / static_cast<double>(dc);
        }
    } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
    }
    return out;
}

}  // namespace

PurifyEval evaluate_purification(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                                 const GuidanceConfig& gcfg) {
    PurifyEval out;
    out.std_acc_per_seed.resize(cfg.seed_count);
    out.rob_acc_per_seed.resize(cfg.seed_count);
    std::vector<SeedOutcome> slots(cfg.seed_count);
    parallel_for(cfg.seed_count, cfg.threads, [&](int k) {
        slots[static_cast<std::size_t>(k)] =
            evaluate_one_seed(cfg, setup, gcfg, k, cfg.eval_count, false);
    });
    for (int k = 0; k < cfg.seed_count; ++k) {
        if (slots[static_cast<std::size_t>(k)].failed)
            throw std::runtime_error("purification eval failed: " + slots[static_cast<std::size_t>(k)].error);
        out.std_acc_per_seed[static_cast<std::size_t>(k)] = slots[static_cast<std::size_t>(k)].std_acc;
        out.rob_acc_per_seed[static_cast<std::size_t>(k)] = slots[static_cast<std::size_t>(k)].rob_acc;
    }
    out.std_acc_mean = mean_of(out.std_acc_per_seed);
    out.rob_acc_mean = mean_of(out.rob_acc_per_seed);
    return out;
}

AblationResult run_ablation(const ExperimentConfig& cfg, const ExperimentSetup& setup) {
    struct RowSpec {
        const char* label;
        bool gl, gs, sampled, guided;
        DistanceNorm norm;
    };
    const RowSpec specs[] = {
        {"unguided", false, false, false, false, DistanceNorm::L1},
        {"gl-l2", true, false, false, true, DistanceNorm::L2},
        {"gs-l2", false, true, false, true, DistanceNorm::L2},
        {"gl-l1", true, false, false, true, DistanceNorm::L1},
        {"gs-l1", false, true, false, true, DistanceNorm::L1},
        {"both-l2", true, true, false, true, DistanceNorm::L2},
        {"both-l1", true, true, false, true, DistanceNorm::L1},
        {"both-l1-sampled", true, true, true, true, DistanceNorm::L1},
    };

    AblationResult result;
    result.clean_acc = setup.clean_acc;
    result.adv_acc = setup.adv_acc;

    int n_rows = static_cast<int>(std::size(specs));
    int n_seeds = cfg.seed_count;
    std::vector<SeedOutcome> slots(static_cast<std::size_t>(n_rows) * n_seeds);

    auto row_config = [&](const RowSpec& spec) {
        GuidanceConfig g = cfg.guidance;
        g.use_long = spec.gl;
        g.use_short = spec.gs;
        g.norm = spec.norm;
        g.factor_rule = cfg.ablation_factor_rule;
        g.factor_constant = cfg.ablation_factor_c;
        if (spec.sampled) {
            g.interval_s = cfg.guidance.interval_s;
            g.interval_e = cfg.guidance.interval_e;
        } else {
            g.interval_s = setup.schedule.T;
            g.interval_e = 1;
        }
        if (!spec.guided) {
            g.use_long = false;
            g.use_short = false;
        }
        return g;
    };

    parallel_for(n_rows * n_seeds, cfg.threads, [&](int idx) {
        int r = idx / n_seeds, k = idx % n_seeds;
        GuidanceConfig g = row_config(specs[r]);
        slots[static_cast<std::size_t>(idx)] =
            evaluate_one_seed(cfg, setup, g, k, cfg.ablation_eval_count, specs[r].guided);
    });

    for (int r = 0; r < n_rows; ++r) {
        AblationRow row;
        row.label = specs[r].label;
        row.use_long = specs[r].gl;
        row.use_short = specs[r].gs;
        row.norm = specs[r].norm;
        row.sampled = specs[r].sampled;
        row.guided = specs[r].guided;
        for (int k = 0; k < n_seeds; ++k) {
            const auto& so = slots[static_cast<std::size_t>(r) * n_seeds + k];
            if (so.failed) {
                row.failed = true;
                row.error = so.error;
                continue;
            }
            row.std_acc_per_seed.push_back(so.std_acc);
            row.rob_acc_per_seed.push_back(so.rob_acc);
            row.dev_per_seed.push_back(so.dev);
            row.wall_time_s += so.wall;
        }
        row.std_acc_mean = mean_of(row.std_acc_per_seed);
        row.std_acc_sd = sd_of(row.std_acc_per_seed);
        row.rob_acc_mean = mean_of(row.rob_acc_per_seed);
        row.rob_acc_sd = sd_of(row.rob_acc_per_seed);
        row.dev_mean = mean_of(row.dev_per_seed);
        row.dev_sd = sd_of(row.dev_per_seed);
        result.rows.push_back(std::move(row));
    }
    return result;
}

void ablation_csv(const AblationResult& result, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("ablation_csv: cannot open " + path);
    os << "row,use_long,use_short,norm,sampled,status,std_acc_mean,std_acc_sd,rob_acc_mean,"
          "rob_acc_sd,mimic_dev_mean,mimic_dev_sd\n";
    for (const auto& r : result.rows) {
        os << r.label << ',' << (r.use_long ? 1 : 0) << ',' << (r.use_short ? 1 : 0) << ','
           << (r.norm == DistanceNorm::L1 ? "l1" : "l2") << ',' << (r.sampled ? 1 : 0) << ','
           << (r.failed ? "failed" : "ok") << ',' << format_double(r.std_acc_mean) << ','
           << format_double(r.std_acc_sd) << ',' << format_double(r.rob_acc_mean) << ','
           << format_double(r.rob_acc_sd) << ',' << format_double(r.dev_mean) << ','
           << format_double(r.dev_sd) << '\n';
    }
}

Lemma1Report verify_lemma1(long trials, std::size_t dim, double xi, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("verify_lemma1: trials must be >= 1");
    auto t0 = std::chrono::steady_clock::now();
    Lemma1Report rep;
    rep.trials = trials;
    rep.dim = dim;
    rep.xi = xi;

    RngStream rng(seed);
    // Case 1: |phi|_inf < xi and min|x_t - x_ori| > xi force equal gradients.
    long equal = 0;
    State gap(dim), phi(dim);
    for (long trial = 0; trial < trials; ++trial) {
        for (std::size_t i = 0; i < dim; ++i) {
            double mag = xi * (1.0 + rng.uniform(1e-9, 1.0));
            gap[i] = (rng.uniform_index(2) == 0 ? -1.0 : 1.0) * mag;
            phi[i] = xi * rng.uniform(-0.999999, 0.999999);
        }
        bool same = true;
        for (std::size_t i = 0; i < dim; ++i) {
            double a = gap[i] - phi[i];
            if ((a > 0.0) != (gap[i] > 0.0)) {
                same = false;
                break;
            }
        }
        if (same) ++equal;
    }
    rep.equal_trials = equal;
    rep.equality_rate = static_cast<double>(equal) / static_cast<double>(trials);

    // Case 2: one short-range coordinate flips the sign.
    rep.counter_gap = xi / 2.0;
    rep.counter_phi = 0.9 * xi;
    double flipped = rep.counter_gap - rep.counter_phi;  // -0.4 xi
    rep.counterexample_shown = (rep.counter_gap > 0.0) && (flipped < 0.0);

    // Empirical disagreement rate with unconstrained short-range gaps.
    long disagree = 0;
    long probe_trials = std::min<long>(trials, 20000);
    for (long trial = 0; trial < probe_trials; ++trial) {
        bool same = true;
        for (std::size_t i = 0; i < dim; ++i) {
            double g = xi * rng.gaussian();
            double p = xi * rng.uniform(-0.999999, 0.999999);
            if (((g - p) > 0.0) != (g > 0.0)) {
                same = false;
                break;
            }
        }
        if (!same) ++disagree;
    }
    rep.short_range_disagree_rate = static_cast<double>(disagree) / static_cast<double>(probe_trials);
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

void lemma1_report_json(const Lemma1Report& r, const std::string& path) {
    write_json_summary(path, {
        {"trials", std::to_string(r.trials)},
        {"dim", std::to_string(r.dim)},
        {"xi", format_double(r.xi)},
        {"equal_trials", std::to_string(r.equal_trials)},
        {"equality_rate", format_double(r.equality_rate)},
        {"counterexample_shown", r.counterexample_shown ? "true" : "false"},
        {"counter_gap", format_double(r.counter_gap)},
        {"counter_phi", format_double(r.counter_phi)},
        {"short_range_disagree_rate", format_double(r.short_range_disagree_rate)},
    });
}

TimingReport timing_report(const ExperimentConfig& cfg, const ExperimentSetup& setup, int runs) {
    TimingReport rep;
    rep.T = setup.schedule.T;
    rep.s = cfg.guidance.interval_s;
    rep.e = cfg.guidance.interval_e;
    rep.runs = runs;
    rep.guided_step_ratio = static_cast<double>(rep.s - rep.e + 1) / static_cast<double>(rep.T);

    GuidanceConfig sampled = cfg.guidance;
    sampled.factor_rule = cfg.ablation_factor_rule;
    sampled.factor_constant = cfg.ablation_factor_c;
    GuidanceConfig full = sampled;
    full.interval_s = setup.schedule.T;
    full.interval_e = 1;

    for (int k = 0; k < runs; ++k) {
        std::size_t i = static_cast<std::size_t>(k) % setup.attacked.size();
        std::uint64_t s = derive_seed(cfg.root_seed, "bench", static_cast<std::uint64_t>(k));
        PurifyResult rs = purify(*setup.score, setup.schedule, setup.attacked[i], sampled, s);
        PurifyResult rf = purify(*setup.score, setup.schedule, setup.attacked[i], full, s);
        rep.guided_steps_sampled += rs.guidance_evaluations;
        rep.guided_steps_full += rf.guidance_evaluations;
        rep.wall_guidance_sampled_s += rs.wall_time_guidance_s;
        rep.wall_guidance_full_s += rf.wall_time_guidance_s;
        rep.wall_total_sampled_s += rs.wall_time_total_s;
        rep.wall_total_full_s += rf.wall_time_total_s;
    }
    return rep;
}

void timing_counts_csv(const TimingReport& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("timing_counts_csv: cannot open " + path);
    os << "T,s,e,runs,guided_steps_sampled,guided_steps_full,guided_step_ratio\n";
    os << r.T << ',' << r.s << ',' << r.e << ',' << r.runs << ',' << r.guided_steps_sampled << ','
       << r.guided_steps_full << ',' << format_double(r.guided_step_ratio) << '\n';
}

LeakReport diagnose_l2_leak(const ScoreModel& model, const NoiseSchedule& sched, const State& x_ori,
                            const State& phi, const GuidanceConfig& cfg, std::uint64_t seed) {
    check_same_dim(x_ori, phi, "diagnose_l2_leak");
    State x_adv = x_ori + phi;
    LeakReport rep;
    rep.phi_linf = linf_norm(phi);

    GuidanceConfig l1_cfg = cfg;
    l1_cfg.use_long = true;
    l1_cfg.use_short = false;
    l1_cfg.norm = DistanceNorm::L1;

    GuidanceConfig l2jf_cfg = l1_cfg;
    l2jf_cfg.norm = DistanceNorm::L2;
    l2jf_cfg.jacobian_mode = JacobianMode::JacobianFree;

    StepProbe probe = [&](int t, const State& x_t, bool gated) {
        if (!gated) return;
        LeakStep step;
        step.t = t;
        State x_hat = tweedie_estimate(model, sched, x_t, t);
        step.minabs_to_ori = min_abs(x_hat - x_ori);
        step.long_range = step.minabs_to_ori > rep.phi_linf;

        State g1a = long_range_guidance(model, sched, x_t, t, x_adv, l1_cfg);
        State g1o = long_range_guidance(model, sched, x_t, t, x_ori, l1_cfg);
        step.diff_l1_linf = linf_norm(g1a - g1o);
        step.l1_bit_identical = (g1a == g1o);

        State g2a = long_range_guidance(model, sched, x_t, t, x_adv, l2jf_cfg);
        State g2o = long_range_guidance(model, sched, x_t, t, x_ori, l2jf_cfg);
        State d2 = g2a - g2o;
        step.diff_l2_linf = linf_norm(d2);
        double R = guided_factor(sched, t, l2jf_cfg.factor_rule, l2jf_cfg.factor_constant);
        double err = 0.0;
        for (std::size_t i = 0; i < d2.size(); ++i)
            err = std::max(err, std::abs(d2[i] - 2.0 * R * l2jf_cfg.guidance_scale * phi[i]));
        step.closed_form_err = err;
        rep.max_closed_form_err = std::max(rep.max_closed_form_err, err);
        if (step.long_range) {
            ++rep.long_range_steps;
            if (!step.l1_bit_identical) rep.l1_identical_in_long_range = false;
        }
        rep.steps.push_back(step);
    };

    purify_probed(model, sched, x_adv, cfg, seed, probe);
    return rep;
}

void leak_report_csv(const LeakReport& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("leak_report_csv: cannot open " + path);
    os << "t,minabs_to_ori,long_range,diff_l1_linf,l1_bit_identical,diff_l2_linf,closed_form_err\n";
    for (const auto& s : r.steps) {
        os << s.t << ',' << format_double(s.minabs_to_ori) << ',' << (s.long_range ? 1 : 0) << ','
           << format_double(s.diff_l1_linf) << ',' << (s.l1_bit_identical ? 1 : 0) << ','
           << format_double(s.diff_l2_linf) << ',' << format_double(s.closed_form_err) << '\n';
    }
}

void write_json_summary(const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& fields) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_json_summary: cannot open " + path);
    os << "{\n";
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto& [k, v] = fields[i];
        bool quote = v.empty() || !(v == "true" || v == "false" ||
                                    v.find_first_not_of("0123456789+-.eE") == std::string::npos);
        os << "  \"" << k << "\": ";
        if (quote) os << '"' << v << '"';
        else os << v;
        os << (i + 1 < fields.size() ? ",\n" : "\n");
    }
    os << "}\n";
}

}  // namespace diffpurify
