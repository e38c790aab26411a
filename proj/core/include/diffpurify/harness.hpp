#ifndef DIFFPURIFY_HARNESS_HPP
#define DIFFPURIFY_HARNESS_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "diffpurify/attack.hpp"
#include "diffpurify/dataset.hpp"
#include "diffpurify/guidance.hpp"
#include "diffpurify/sampler.hpp"
#include "diffpurify/schedule.hpp"
#include "diffpurify/score.hpp"

namespace diffpurify {

// Flat key-value configuration: one `section.key = value` per line, `#`
// comments. Unknown keys are rejected so typos do not silently vanish.
struct ExperimentConfig {
    ExperimentConfig() {
        guidance.interval_s = -1;  // resolved against T by finalize_config
        guidance.interval_e = -1;
    }

    // dataset
    std::string dataset_kind = "bars8x8";  // bars8x8 | blobs2d
    BarsSpec bars;
    BlobsSpec blobs;
    std::size_t train_count = 2048;
    std::size_t eval_count = 512;
    std::uint64_t data_seed = 7;

    // schedule (flat beta ramp by default; unset both to fall back to the
    // DDPM-style [1e-4, 0.02] * 1000/T ramp)
    int T = 100;
    ScheduleKind schedule_kind = ScheduleKind::LinearBeta;
    std::optional<double> beta_lo = 0.028;
    std::optional<double> beta_hi = 0.028;

    // score model
    std::string score_kind = "gmm";  // gmm | net
    ScoreTrainConfig score_train;

    // classifier
    ClassifierTrainConfig clf_train{150, 64, 1e-2, {32}, 0.15, 16};

    // attack
    AttackSpec attack{0.12, 200, 0.0048};

    // guidance (defaults: both terms, L1, operator picked per dataset,
    // [0.5T, 0.2T], inverse-sigma-squared factor, exact VJP, scale 1)
    GuidanceConfig guidance;
    std::string operator_choice = "auto";  // auto | bicubic4 | identity | nonlinear-lift

    // harness
    std::uint64_t root_seed = 1;
    int seed_count = 20;
    int threads = 0;  // 0 -> hardware concurrency
    std::string out_dir = "out";

    // ablation grid settings (the full-interval rows need the factor
    // override to stay finite; see README)
    FactorRule ablation_factor_rule = FactorRule::Constant;
    double ablation_factor_c = 2.0;
    std::size_t ablation_eval_count = 512;
    std::size_t deviation_count = 16;

    NoiseSchedule make_noise_schedule() const;
};

ExperimentConfig load_config(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Resolves interval/operator defaults against T and the dataset kind. Called
// by load_config; configs built in code must call it before use.
void finalize_config(ExperimentConfig& cfg);

// Dataset + schedule + score model + victim classifier + attacked eval set,
// built deterministically from a config.
struct ExperimentSetup {
    NoiseSchedule schedule;
    std::shared_ptr<ScoreModel> score;
    LabeledDataset train;
    LabeledDataset eval;
    Classifier clf;
    std::vector<State> attacked;
    double clean_acc = 0.0;
    double adv_acc = 0.0;
};
ExperimentSetup build_setup(const ExperimentConfig& cfg);

// Mean over guided steps of |x_hat(adv-target) - x_hat(clean-target)|_1 / n,
// with both runs driven by the same noise stream.
double mimic_deviation(const ScoreModel& model, const NoiseSchedule& sched, const State& x_ori,
                       const State& x_adv, const GuidanceConfig& cfg, std::uint64_t seed);

struct AblationRow {
    std::string label;
    bool use_long = false;
    bool use_short = false;
    DistanceNorm norm = DistanceNorm::L1;
    bool sampled = false;
    bool guided = true;
    bool failed = false;
    std::string error;
    double std_acc_mean = 0.0, std_acc_sd = 0.0;
    double rob_acc_mean = 0.0, rob_acc_sd = 0.0;
    double dev_mean = 0.0, dev_sd = 0.0;
    std::vector<double> std_acc_per_seed;
    std::vector<double> rob_acc_per_seed;
    std::vector<double> dev_per_seed;
    double wall_time_s = 0.0;  // measured; reported on stdout only
};

struct AblationResult {
    std::vector<AblationRow> rows;
    double clean_acc = 0.0;
    double adv_acc = 0.0;
};

// The seven guidance configurations plus the unguided baseline, averaged
// over seed_count replication seeds.
AblationResult run_ablation(const ExperimentConfig& cfg, const ExperimentSetup& setup);
void ablation_csv(const AblationResult& result, const std::string& path);

// Robust/standard accuracy of one guidance configuration over replication
// seeds (used for the default-configuration purification evaluation).
struct PurifyEval {
    std::vector<double> std_acc_per_seed;
    std::vector<double> rob_acc_per_seed;
    double std_acc_mean = 0.0;
    double rob_acc_mean = 0.0;
};
PurifyEval evaluate_purification(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                                 const GuidanceConfig& gcfg);

struct Lemma1Report {
    long trials = 0;
    std::size_t dim = 0;
    double xi = 0.0;
    long equal_trials = 0;
    double equality_rate = 0.0;
    bool counterexample_shown = false;
    double counter_gap = 0.0;
    double counter_phi = 0.0;
    double short_range_disagree_rate = 0.0;
    double runtime_s = 0.0;
};

// Case 1: random triples constrained to the long-range regime must give
// identical l1 gradients. Case 2: an explicit short-range counterexample
// plus the empirical disagreement rate over unconstrained short-range
// samples.
Lemma1Report verify_lemma1(long trials, std::size_t dim, double xi, std::uint64_t seed);
void lemma1_report_json(const Lemma1Report& r, const std::string& path);

struct TimingReport {
    int T = 0, s = 0, e = 0;
    long guided_steps_sampled = 0;
    long guided_steps_full = 0;
    double guided_step_ratio = 0.0;  // (s - e + 1) / T
    int runs = 0;
    double wall_guidance_sampled_s = 0.0;
    double wall_guidance_full_s = 0.0;
    double wall_total_sampled_s = 0.0;
    double wall_total_full_s = 0.0;
};

// Identical configurations except the gating; wall times are measured and
// printed, only the deterministic counts are written to files.
TimingReport timing_report(const ExperimentConfig& cfg, const ExperimentSetup& setup, int runs);
void timing_counts_csv(const TimingReport& r, const std::string& path);

struct LeakStep {
    int t = 0;
    double minabs_to_ori = 0.0;
    double diff_l1_linf = 0.0;      // |g_l1(adv-target) - g_l1(clean-target)|_inf, exact VJP
    double diff_l2_linf = 0.0;      // same under L2, jacobian-free
    double closed_form_err = 0.0;   // |(g_l2jf(adv) - g_l2jf(ori)) - 2 R_t phi|_inf
    bool long_range = false;        // minabs_to_ori > |phi|_inf
    bool l1_bit_identical = false;
};

struct LeakReport {
    std::vector<LeakStep> steps;
    double phi_linf = 0.0;
    double max_closed_form_err = 0.0;
    bool l1_identical_in_long_range = true;
    long long_range_steps = 0;
};

// Per-step comparison of the guidance evaluated against the attacked target
// versus the clean target, along one guided trajectory.
LeakReport diagnose_l2_leak(const ScoreModel& model, const NoiseSchedule& sched, const State& x_ori,
                            const State& phi, const GuidanceConfig& cfg, std::uint64_t seed);
void leak_report_csv(const LeakReport& r, const std::string& path);

// Deterministic %.17g float formatting shared by all writers.
std::string format_double(double v);

// JSON summary writing (insertion-ordered keys, 2-space indent).
void write_json_summary(const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& fields);

}  // namespace diffpurify

#endif
