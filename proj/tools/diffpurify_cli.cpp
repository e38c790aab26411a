// Command-line driver for the purification laboratory: dataset/model
// preparation, attacks, guided purification, and the experiment reports.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "diffpurify/harness.hpp"
#include "diffpurify/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace diffpurify;

namespace {

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
};

ExperimentConfig resolve_config(const CommonArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) {
        cfg = load_config(args.config_path);
    } else {
        finalize_config(cfg);
    }
    if (args.seed_set) cfg.root_seed = args.seed;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    fs::create_directories(cfg.out_dir);
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "configuration file (section.key = value lines)");
    cmd->add_option("--seed", args.seed, "root seed")->each([&](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--out", args.out_dir, "output directory");
}

std::string path_in(const ExperimentConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

int cmd_train_score(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    NoiseSchedule sched = cfg.make_noise_schedule();
    LabeledDataset data;
    if (cfg.dataset_kind == "bars8x8")
        data = make_bars8x8(cfg.bars, cfg.train_count, derive_seed(cfg.data_seed, "train"));
    else
        data = make_blobs2d(cfg.blobs, cfg.train_count, derive_seed(cfg.data_seed, "train"));
    ScoreTrainConfig tc = cfg.score_train;
    tc.seed = cfg.root_seed;
    ScoreTrainReport rep;
    NetScoreModel model = train_net_score(data.samples, sched, tc, &rep);
    std::string model_path = path_in(cfg, "score_model.bin");
    model.save(model_path);
    write_json_summary(path_in(cfg, "train_score.json"),
                       {{"dataset", cfg.dataset_kind},
                        {"samples", std::to_string(data.samples.size())},
                        {"epochs", std::to_string(rep.epochs_run)},
                        {"heldout_loss_initial", format_double(rep.initial_loss)},
                        {"heldout_loss_final", format_double(rep.final_loss)},
                        {"model_file", "score_model.bin"}});
    std::printf("train-score: heldout loss %.6f -> %.6f, model at %s\n", rep.initial_loss,
                rep.final_loss, model_path.c_str());
    return 0;
}

int cmd_train_clf(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    LabeledDataset train, eval;
    if (cfg.dataset_kind == "bars8x8") {
        train = make_bars8x8(cfg.bars, cfg.train_count, derive_seed(cfg.data_seed, "train"));
        eval = make_bars8x8(cfg.bars, cfg.eval_count, derive_seed(cfg.data_seed, "eval"));
    } else {
        train = make_blobs2d(cfg.blobs, cfg.train_count, derive_seed(cfg.data_seed, "train"));
        eval = make_blobs2d(cfg.blobs, cfg.eval_count, derive_seed(cfg.data_seed, "eval"));
    }
    Classifier clf = train_classifier(train, cfg.clf_train);
    double acc = accuracy(clf, eval.samples, eval.labels);
    std::string model_path = path_in(cfg, "classifier.bin");
    clf.save(model_path);
    write_json_summary(path_in(cfg, "train_clf.json"),
                       {{"dataset", cfg.dataset_kind},
                        {"train_samples", std::to_string(train.samples.size())},
                        {"eval_accuracy", format_double(acc)},
                        {"model_file", "classifier.bin"}});
    std::printf("train-clf: eval accuracy %.4f, model at %s\n", acc, model_path.c_str());
    return 0;
}

int cmd_attack(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    ExperimentSetup setup = build_setup(cfg);
    double max_linf = 0.0;
    for (std::size_t i = 0; i < setup.attacked.size(); ++i)
        max_linf = std::max(max_linf, linf_norm(setup.attacked[i] - setup.eval.samples[i]));
    save_dataset(path_in(cfg, "attacked.bin"), setup.attacked);
    save_dataset(path_in(cfg, "clean.bin"), setup.eval.samples);
    write_json_summary(path_in(cfg, "attack.json"),
                       {{"epsilon", format_double(cfg.attack.epsilon)},
                        {"steps", std::to_string(cfg.attack.steps)},
                        {"clean_accuracy", format_double(setup.clean_acc)},
                        {"adversarial_accuracy", format_double(setup.adv_acc)},
                        {"max_linf", format_double(max_linf)}});
    std::printf("attack: clean acc %.4f, adversarial acc %.4f, max |phi|_inf %.6f (budget %.6f)\n",
                setup.clean_acc, setup.adv_acc, max_linf, cfg.attack.epsilon);
    return 0;
}

int cmd_purify(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    ExperimentSetup setup = build_setup(cfg);
    PurifyEval eval = evaluate_purification(cfg, setup, cfg.guidance);

    // Purified set and per-step log for the first replication seed.
    std::uint64_t rep = derive_seed(cfg.root_seed, "replicate", 0);
    std::vector<State> purified;
    purified.reserve(setup.attacked.size());
    for (std::size_t i = 0; i < setup.attacked.size(); ++i)
        purified.push_back(purify(*setup.score, setup.schedule, setup.attacked[i], cfg.guidance,
                                  derive_seed(rep, "purify", i))
                               .x0);
    save_dataset(path_in(cfg, "purified.bin"), purified);
    PurifyResult first = purify(*setup.score, setup.schedule, setup.attacked[0], cfg.guidance,
                                derive_seed(rep, "purify", 0));
    guidance_log_csv(first, path_in(cfg, "guidance_log.csv"));
    trajectory_scalars_csv(first.trajectory, path_in(cfg, "trajectory.csv"));

    write_json_summary(path_in(cfg, "purify.json"),
                       {{"clean_accuracy", format_double(setup.clean_acc)},
                        {"adversarial_accuracy", format_double(setup.adv_acc)},
                        {"standard_accuracy_purified", format_double(eval.std_acc_mean)},
                        {"robust_accuracy_purified", format_double(eval.rob_acc_mean)},
                        {"seeds", std::to_string(cfg.seed_count)},
                        {"guided_steps_per_run", std::to_string(first.guidance_evaluations)}});
    std::printf("purify: standard %.4f, robust %.4f over %d seeds (unpurified adv %.4f)\n",
                eval.std_acc_mean, eval.rob_acc_mean, cfg.seed_count, setup.adv_acc);
    return 0;
}

int cmd_verify_lemma(const CommonArgs& args, long trials, std::size_t dim, double xi) {
    ExperimentConfig cfg = resolve_config(args);
    Lemma1Report rep = verify_lemma1(trials, dim, xi, derive_seed(cfg.root_seed, "lemma"));
    lemma1_report_json(rep, path_in(cfg, "lemma1.json"));
    std::printf(
        "verify-lemma: %ld trials dim=%zu xi=%g: equality rate %.6f, counterexample %s, "
        "short-range disagree rate %.4f (%.2fs)\n",
        rep.trials, rep.dim, rep.xi, rep.equality_rate, rep.counterexample_shown ? "shown" : "missing",
        rep.short_range_disagree_rate, rep.runtime_s);
    return rep.equality_rate == 1.0 && rep.counterexample_shown ? 0 : 1;
}

int cmd_ablate(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    ExperimentSetup setup = build_setup(cfg);
    AblationResult result = run_ablation(cfg, setup);
    ablation_csv(result, path_in(cfg, "ablation.csv"));
    std::vector<std::pair<std::string, std::string>> fields{
        {"clean_accuracy", format_double(result.clean_acc)},
        {"adversarial_accuracy", format_double(result.adv_acc)},
        {"seeds", std::to_string(cfg.seed_count)},
        {"eval_count", std::to_string(cfg.ablation_eval_count)}};
    for (const auto& row : result.rows) {
        fields.emplace_back(row.label + "_robust", format_double(row.rob_acc_mean));
        fields.emplace_back(row.label + "_standard", format_double(row.std_acc_mean));
    }
    write_json_summary(path_in(cfg, "ablation.json"), fields);
    std::printf("%-16s %8s %8s %8s %8s  %s\n", "row", "std", "rob", "dev", "wall(s)", "status");
    for (const auto& row : result.rows)
        std::printf("%-16s %8.4f %8.4f %8.5f %8.2f  %s\n", row.label.c_str(), row.std_acc_mean,
                    row.rob_acc_mean, row.dev_mean, row.wall_time_s,
                    row.failed ? row.error.c_str() : "ok");
    return 0;
}

int cmd_bench(const CommonArgs& args, int runs) {
    ExperimentConfig cfg = resolve_config(args);
    ExperimentSetup setup = build_setup(cfg);
    TimingReport rep = timing_report(cfg, setup, runs);
    timing_counts_csv(rep, path_in(cfg, "bench_counts.csv"));
    std::printf("bench: T=%d interval [%d,%d], guided steps per run %ld vs %ld (ratio %.4f)\n",
                rep.T, rep.s, rep.e, rep.guided_steps_sampled / rep.runs,
                rep.guided_steps_full / rep.runs, rep.guided_step_ratio);
    std::printf("bench: guidance wall time %.4fs (sampled) vs %.4fs (full); total %.4fs vs %.4fs\n",
                rep.wall_guidance_sampled_s, rep.wall_guidance_full_s, rep.wall_total_sampled_s,
                rep.wall_total_full_s);
    return 0;
}

int cmd_mimic(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    ExperimentSetup setup = build_setup(cfg);
    GuidanceConfig l1 = cfg.guidance;
    l1.norm = DistanceNorm::L1;
    GuidanceConfig l2 = cfg.guidance;
    l2.norm = DistanceNorm::L2;

    std::string csv_path = path_in(cfg, "mimic.csv");
    std::ofstream os(csv_path);
    os << "seed,deviation_l1,deviation_l2\n";
    double sum1 = 0.0, sum2 = 0.0;
    long l1_lower = 0;
    std::size_t count = std::min<std::size_t>(cfg.deviation_count, setup.eval.samples.size());
    for (int k = 0; k < cfg.seed_count; ++k) {
        std::uint64_t rep = derive_seed(cfg.root_seed, "replicate", static_cast<std::uint64_t>(k));
        double d1 = 0.0, d2 = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t s = derive_seed(rep, "mimic", i);
            d1 += mimic_deviation(*setup.score, setup.schedule, setup.eval.samples[i],
                                  setup.attacked[i], l1, s);
            d2 += mimic_deviation(*setup.score, setup.schedule, setup.eval.samples[i],
                                  setup.attacked[i], l2, s);
        }
        d1 /= static_cast<double>(count);
        d2 /= static_cast<double>(count);
        os << k << ',' << format_double(d1) << ',' << format_double(d2) << '\n';
        sum1 += d1;
        sum2 += d2;
        if (d1 < d2) ++l1_lower;
    }
    write_json_summary(path_in(cfg, "mimic.json"),
                       {{"seeds", std::to_string(cfg.seed_count)},
                        {"deviation_l1_mean", format_double(sum1 / cfg.seed_count)},
                        {"deviation_l2_mean", format_double(sum2 / cfg.seed_count)},
                        {"l1_lower_fraction", format_double(static_cast<double>(l1_lower) / cfg.seed_count)}});
    std::printf("mimic: mean deviation L1 %.6f vs L2 %.6f; L1 lower on %ld/%d seeds\n",
                sum1 / cfg.seed_count, sum2 / cfg.seed_count, l1_lower, cfg.seed_count);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"guided-diffusion adversarial purification laboratory"};
    app.require_subcommand(1);

    CommonArgs args;
    long trials = 100000;
    std::size_t dim = 64;
    double xi = 0.13;
    int bench_runs = 8;

    auto* c1 = app.add_subcommand("train-score", "train the score network on the configured dataset");
    add_common(c1, args);
    auto* c2 = app.add_subcommand("train-clf", "train the victim classifier");
    add_common(c2, args);
    auto* c3 = app.add_subcommand("attack", "generate the attacked evaluation set");
    add_common(c3, args);
    auto* c4 = app.add_subcommand("purify", "purify the attacked set with the configured guidance");
    add_common(c4, args);
    auto* c5 = app.add_subcommand("verify-lemma", "run the sign-gradient equality suite");
    add_common(c5, args);
    c5->add_option("--trials", trials, "number of randomized trials");
    c5->add_option("--dim", dim, "vector dimension");
    c5->add_option("--xi", xi, "perturbation bound");
    auto* c6 = app.add_subcommand("ablate", "run the guidance ablation grid");
    add_common(c6, args);
    auto* c7 = app.add_subcommand("bench", "time gated versus full-interval guidance");
    add_common(c7, args);
    c7->add_option("--runs", bench_runs, "number of purification runs per variant");
    auto* c8 = app.add_subcommand("mimic", "measure trajectory deviation between targets");
    add_common(c8, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c1->parsed()) return cmd_train_score(args);
        if (c2->parsed()) return cmd_train_clf(args);
        if (c3->parsed()) return cmd_attack(args);
        if (c4->parsed()) return cmd_purify(args);
        if (c5->parsed()) return cmd_verify_lemma(args, trials, dim, xi);
        if (c6->parsed()) return cmd_ablate(args);
        if (c7->parsed()) return cmd_bench(args, bench_runs);
        if (c8->parsed()) return cmd_mimic(args);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
