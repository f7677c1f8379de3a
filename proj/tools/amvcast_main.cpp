#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "amvcast/amv.hpp"
#include "amvcast/experiment.hpp"
#include "amvcast/gradcheck.hpp"
#include "amvcast/io.hpp"
#include "amvcast/synth.hpp"

namespace fs = std::filesystem;
using namespace amvcast;

namespace {

/// Every *.json in the directory whose top level looks like a stack
/// manifest, in path order. Other JSON files (configs, reports) are skipped.
std::vector<fs::path> find_manifests(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_object() && j.contains("variables") && j.contains("schema_version")) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw DataError("no stack manifests found in " + dir.string());
    return out;
}

struct SourceArgs {
    std::string data_dir;
    std::string synth_config;
};

void add_source_options(CLI::App* cmd, SourceArgs& args) {
    auto* grp = cmd->add_option_group("source", "where the ensemble comes from");
    grp->add_option("--data", args.data_dir, "directory of stack manifests");
    grp->add_option("--synth", args.synth_config, "synthetic-ensemble config JSON");
    grp->require_option(1);
}

std::vector<FieldStack> load_members(const SourceArgs& args) {
    std::vector<FieldStack> members;
    if (!args.data_dir.empty()) {
        const auto manifests = find_manifests(args.data_dir);
        members.reserve(manifests.size());
        for (const auto& p : manifests) members.push_back(read_stack(p));
        std::cerr << "read " << members.size() << " member stacks from " << args.data_dir << "\n";
    } else {
        const synth::SynthConfig cfg = synth::load_synth_config(args.synth_config);
        members = synth::generate_ensemble(cfg);
        std::cerr << "generated " << members.size() << " synthetic members\n";
    }
    return members;
}

void write_sigma_json(const fs::path& out_dir, double sigma, bool fitted) {
    nlohmann::json j{{"sigma", sigma}, {"source", fitted ? "fitted" : "fixed"}};
    std::string text = j.dump(2);
    text.push_back('\n');
    write_file_bytes(out_dir / "sigma.json", text.data(), text.size());
}

int g_exit = 0;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Atlantic multidecadal variability state-prediction pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic ensemble to disk");
    struct {
        std::string config;
        std::string out;
        std::uint64_t seed = 0;
        bool seed_set = false;
    } synth_args;
    synth_cmd->add_option("--config", synth_args.config, "config JSON (defaults when omitted)");
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
    synth_cmd->add_option("--seed", synth_args.seed, "override the config's master seed")
        ->each([&](const std::string&) { synth_args.seed_set = true; });
    synth_cmd->callback([&] {
        synth::SynthConfig cfg;
        if (!synth_args.config.empty()) cfg = synth::load_synth_config(synth_args.config);
        if (synth_args.seed_set) cfg.master_seed = synth_args.seed;
        cfg.validate();
        const fs::path out(synth_args.out);
        fs::create_directories(out);
        for (int m = 0; m < cfg.n_members; ++m) {
            const FieldStack stack = synth::generate_member(cfg, m);
            write_stack(stack, out / (stack.member + ".json"));
        }
        synth::write_synth_config(cfg, out / "synth_config.json");
        std::cerr << "wrote " << cfg.n_members << " member stacks to " << out.string() << "\n";
    });

    // index / label
    struct IndexArgs {
        SourceArgs source;
        std::string out;
        double sigma = 0.0;
    };
    IndexArgs index_args, label_args;
    auto* index_cmd = app.add_subcommand("index", "compute the per-member AMV index");
    auto* label_cmd = app.add_subcommand("label", "classify every (member, year) into AMV states");
    for (auto [cmd, args] : {std::pair{index_cmd, &index_args}, std::pair{label_cmd, &label_args}}) {
        add_source_options(cmd, args->source);
        cmd->add_option("--out", args->out, "output directory")->required();
        cmd->add_option("--sigma", args->sigma, "fixed classification threshold (default: fit)")
            ->check(CLI::PositiveNumber);
    }
    index_cmd->callback([&] {
        const auto src = experiment::prepare_source(load_members(index_args.source), index_args.sigma);
        const fs::path out(index_args.out);
        fs::create_directories(out);
        std::string text = "member,year,index\n";
        for (const AmvSeries& s : src.index) {
            for (std::size_t t = 0; t < s.index.size(); ++t) {
                char buf[96];
                std::snprintf(buf, sizeof(buf), "%s,%d,%.6f\n", s.member.c_str(), s.years[t],
                              s.index[t]);
                text += buf;
            }
        }
        write_file_bytes(out / "index.csv", text.data(), text.size());
        write_sigma_json(out, src.sigma, index_args.sigma <= 0.0);
        std::cerr << "sigma = " << src.sigma << "; wrote " << (out / "index.csv").string() << "\n";
    });
    label_cmd->callback([&] {
        const auto src = experiment::prepare_source(load_members(label_args.source), label_args.sigma);
        const fs::path out(label_args.out);
        fs::create_directories(out);
        write_labels_csv(src.index, src.labels, out / "labels.csv");
        write_sigma_json(out, src.sigma, label_args.sigma <= 0.0);
        std::cerr << "sigma = " << src.sigma << "; wrote " << (out / "labels.csv").string() << "\n";
    });

    // shared training knobs
    struct TrainKnobs {
        int epochs = 20;
        int batch = 32;
        double lr = 0.01;
        int patience = 3;
    };
    auto add_train_knobs = [](CLI::App* cmd, TrainKnobs& k) {
        cmd->add_option("--epochs", k.epochs, "max training epochs")->check(CLI::PositiveNumber);
        cmd->add_option("--batch", k.batch, "mini-batch size")->check(CLI::PositiveNumber);
        cmd->add_option("--lr", k.lr, "SGD learning rate")->check(CLI::PositiveNumber);
        cmd->add_option("--patience", k.patience,
                        "consecutive validation-loss increases before early stop")
            ->check(CLI::PositiveNumber);
    };

    // train
    struct {
        SourceArgs source;
        std::string out;
        int lead = 0;
        std::uint64_t seed = 1;
        std::size_t n_per_class = 300;
        double sigma = 0.0;
        TrainKnobs knobs;
    } train_args;
    auto* train_cmd = app.add_subcommand(
        "train", "train one classifier at a fixed lead on the canonical split");
    add_source_options(train_cmd, train_args.source);
    train_cmd->add_option("--lead", train_args.lead, "prediction lead in years")
        ->required()
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--out", train_args.out, "output directory")->required();
    train_cmd->add_option("--seed", train_args.seed, "master seed (reuse it in evaluate)");
    train_cmd->add_option("--n-per-class", train_args.n_per_class, "balanced samples per class");
    train_cmd->add_option("--sigma", train_args.sigma, "fixed classification threshold")
        ->check(CLI::PositiveNumber);
    add_train_knobs(train_cmd, train_args.knobs);
    train_cmd->callback([&] {
        const auto src =
            experiment::prepare_source(load_members(train_args.source), train_args.sigma);
        experiment::SweepConfig cfg;
        cfg.leads = {train_args.lead};
        cfg.repetitions = 1;
        cfg.n_per_class = train_args.n_per_class;
        cfg.freeze_split = true;
        cfg.master_seed = train_args.seed;
        cfg.train.max_epochs = train_args.knobs.epochs;
        cfg.train.batch_size = train_args.knobs.batch;
        cfg.train.learning_rate = train_args.knobs.lr;
        cfg.train.patience = train_args.knobs.patience;
        const fs::path out(train_args.out);
        cfg.checkpoint_dir = out / "checkpoints";
        const auto result = experiment::run_sweep(cfg, src);
        if (result.runs.front().failed) throw DataError(result.runs.front().error);
        fs::create_directories(out);
        write_skill_csv(result.table, out / "scores.csv");
        experiment::write_runs_json(result.runs, out / "train_metrics.json");
        std::cerr << "best val loss " << result.runs.front().best_val_loss << " at epoch "
                  << result.runs.front().best_epoch << "; test accuracy "
                  << result.runs.front().test_scores.overall << "\n"
                  << "checkpoint: " << result.runs.front().checkpoint.string() << "\n";
    });

    // evaluate
    struct {
        SourceArgs source;
        std::string model;
        std::string out;
        int lead = 0;
        std::uint64_t seed = 1;
        std::size_t n_per_class = 300;
        double sigma = 0.0;
    } eval_args;
    auto* eval_cmd = app.add_subcommand(
        "evaluate", "score a checkpoint on the canonical held-out split of its lead");
    add_source_options(eval_cmd, eval_args.source);
    eval_cmd->add_option("--model", eval_args.model, "checkpoint file")->required();
    eval_cmd->add_option("--lead", eval_args.lead, "prediction lead in years")
        ->required()
        ->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--out", eval_args.out, "output directory")->required();
    eval_cmd->add_option("--seed", eval_args.seed, "master seed used when training");
    eval_cmd->add_option("--n-per-class", eval_args.n_per_class, "balanced samples per class");
    eval_cmd->add_option("--sigma", eval_args.sigma, "fixed classification threshold")
        ->check(CLI::PositiveNumber);
    eval_cmd->callback([&] {
        const nn::Checkpoint ck = nn::load_checkpoint(eval_args.model);
        const auto src = experiment::prepare_source(load_members(eval_args.source), eval_args.sigma);
        const auto ld = experiment::prepare_lead(src, eval_args.lead, eval_args.n_per_class,
                                                 eval_args.seed);
        const auto te =
            experiment::materialize_set(src.anomalies, ld.balanced, ld.canonical.test, ld.stats);
        const std::vector<int> pred = nn::predict(ck.model, te.x);
        const ClassScores scores = score_predictions(pred, te.y);

        SkillTable table;
        for (int c = 0; c < kNumClasses; ++c) {
            table.rows.push_back({kModelCnn, eval_args.lead, static_cast<SkillClass>(c), 0,
                                  scores.accuracy[c], scores.n[c]});
        }
        table.rows.push_back(
            {kModelCnn, eval_args.lead, SkillClass::Overall, 0, scores.overall, scores.n_total});
        table.sort_rows();
        const fs::path out(eval_args.out);
        fs::create_directories(out);
        write_skill_csv(table, out / "scores.csv");
        std::cerr << "test accuracy " << scores.overall << " on " << scores.n_total
                  << " samples; wrote " << (out / "scores.csv").string() << "\n";
    });

    // sweep
    struct {
        SourceArgs source;
        std::string out;
        std::vector<int> leads = {0, 3, 6, 9, 12, 15, 18, 21, 24};
        int reps = 10;
        std::size_t n_per_class = 300;
        std::uint64_t seed = 1;
        int jobs = 0;
        bool freeze_split = false;
        bool persistence_full_pool = false;
        bool keep_checkpoints = false;
        double sigma = 0.0;
        TrainKnobs knobs;
    } sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "train the full lead x repetition design");
    add_source_options(sweep_cmd, sweep_args.source);
    sweep_cmd->add_option("--out", sweep_args.out, "output directory")->required();
    sweep_cmd->add_option("--leads", sweep_args.leads, "comma-separated leads in years")
        ->delimiter(',');
    sweep_cmd->add_option("--reps", sweep_args.reps, "repetitions per lead")
        ->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--n-per-class", sweep_args.n_per_class, "balanced samples per class");
    sweep_cmd->add_option("--seed", sweep_args.seed, "master seed");
    sweep_cmd->add_option("--jobs", sweep_args.jobs, "parallel training tasks (default: cores)")
        ->check(CLI::PositiveNumber);
    sweep_cmd->add_flag("--freeze-split", sweep_args.freeze_split,
                        "reuse the canonical split for every repetition");
    sweep_cmd->add_flag("--persistence-full-pool", sweep_args.persistence_full_pool,
                        "score persistence on all (member, year) pairs");
    sweep_cmd->add_flag("--checkpoints", sweep_args.keep_checkpoints, "keep per-run checkpoints");
    sweep_cmd->add_option("--sigma", sweep_args.sigma, "fixed classification threshold")
        ->check(CLI::PositiveNumber);
    add_train_knobs(sweep_cmd, sweep_args.knobs);
    sweep_cmd->callback([&] {
        const auto src =
            experiment::prepare_source(load_members(sweep_args.source), sweep_args.sigma);
        experiment::SweepConfig cfg;
        cfg.leads = sweep_args.leads;
        cfg.repetitions = sweep_args.reps;
        cfg.n_per_class = sweep_args.n_per_class;
        cfg.freeze_split = sweep_args.freeze_split;
        cfg.persistence_full_pool = sweep_args.persistence_full_pool;
        cfg.master_seed = sweep_args.seed;
        cfg.jobs = sweep_args.jobs > 0
                       ? sweep_args.jobs
                       : std::max(1u, std::thread::hardware_concurrency());
        cfg.train.max_epochs = sweep_args.knobs.epochs;
        cfg.train.batch_size = sweep_args.knobs.batch;
        cfg.train.learning_rate = sweep_args.knobs.lr;
        cfg.train.patience = sweep_args.knobs.patience;
        const fs::path out(sweep_args.out);
        if (sweep_args.keep_checkpoints) cfg.checkpoint_dir = out / "checkpoints";
        std::cerr << "running " << cfg.leads.size() << " leads x " << cfg.repetitions
                  << " repetitions on " << cfg.jobs << " jobs\n";
        const auto result = experiment::run_sweep(cfg, src);
        int failed = 0;
        for (const auto& r : result.runs) failed += r.failed ? 1 : 0;
        if (failed > 0) std::cerr << failed << " of " << result.runs.size() << " runs failed\n";
        experiment::report(result.table, out);
        experiment::write_runs_json(result.runs, out / "runs.json");
        std::cerr << "wrote report to " << out.string() << "\n";
    });

    // report
    struct {
        std::string skill;
        std::string out;
    } report_args;
    auto* report_cmd = app.add_subcommand("report", "rebuild summary files from a skill CSV");
    report_cmd->add_option("--skill", report_args.skill, "skill.csv produced by a sweep")
        ->required();
    report_cmd->add_option("--out", report_args.out, "output directory")->required();
    report_cmd->callback([&] {
        const SkillTable table = read_skill_csv(report_args.skill);
        experiment::report(table, report_args.out);
        std::cerr << "wrote report to " << report_args.out << "\n";
    });

    // gradcheck
    struct {
        std::uint64_t seed = 1;
        bool corrupt = false;
    } grad_args;
    auto* grad_cmd =
        app.add_subcommand("gradcheck", "finite-difference gradient check on a toy network");
    grad_cmd->add_option("--seed", grad_args.seed, "seed for the toy network and probes");
    grad_cmd->add_flag("--corrupt-backward", grad_args.corrupt)->group("");
    grad_cmd->callback([&] {
        const nn::GradCheckReport report = nn::run_gradient_check(grad_args.seed, grad_args.corrupt);
        for (const auto& g : report.groups) {
            std::fprintf(stderr, "%-14s n=%2d  max rel err %.3e", g.group.c_str(), g.n_checked,
                         g.max_rel_err);
            if (g.n_skipped > 0) std::fprintf(stderr, "  (skipped %d kink probes)", g.n_skipped);
            std::fprintf(stderr, "\n");
        }
        std::fprintf(stderr, "max relative error %.3e (%s)\n", report.max_rel_err,
                     report.passed() ? "pass" : "FAIL");
        if (!report.passed()) g_exit = 1;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return g_exit;
}
