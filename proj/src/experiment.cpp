#include "amvcast/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "amvcast/rng.hpp"

namespace amvcast::experiment {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTagBalance = 0x62616c616e6365ull;
constexpr std::uint64_t kTagSplit = 0x73706c6974ull;
constexpr std::uint64_t kTagRun = 0x72756eull;
constexpr std::uint64_t kTagInit = 0x696e6974ull;
constexpr std::uint64_t kTagShuffle = 0x7368756666ull;

}  // namespace

SourceData prepare_source(const std::vector<FieldStack>& raw_members, double sigma_override) {
    if (raw_members.empty()) throw DataError("no ensemble members");
    SourceData src;
    src.anomalies.reserve(raw_members.size());
    for (const FieldStack& raw : raw_members) {
        if (raw.height() != raw_members.front().height() ||
            raw.width() != raw_members.front().width()) {
            throw ShapeError("ensemble members must share grid dimensions");
        }
        src.anomalies.push_back(compute_anomalies(harmonize_masks(raw)));
        src.index.push_back(compute_amv_index(src.anomalies.back()));
    }
    src.sigma = sigma_override > 0.0 ? sigma_override : fit_sigma(src.index);
    src.labels.reserve(src.index.size());
    for (auto& series : src.index) {
        series.sigma = src.sigma;
        src.labels.push_back(classify(series, src.sigma));
    }
    return src;
}

void SweepConfig::validate() const {
    if (leads.empty()) throw ConfigError("at least one lead is required");
    std::set<int> seen;
    for (int l : leads) {
        if (l < 0) throw ConfigError("leads must be non-negative");
        if (!seen.insert(l).second) throw ConfigError("duplicate lead " + std::to_string(l));
    }
    if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
    if (n_per_class < 4) throw ConfigError("n_per_class too small to split");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    train.validate();
    cnn.validate();
}

PreparedLead prepare_lead(const SourceData& src, int lead, std::size_t n_per_class,
                          std::uint64_t master_seed) {
    PreparedLead ld;
    ld.lead = lead;
    const std::vector<Sample> pool = build_samples(src.anomalies, src.labels, lead);
    ld.balanced = balance_classes(
        pool, n_per_class, mix_seed({master_seed, kTagBalance, static_cast<std::uint64_t>(lead)}));
    ld.canonical =
        split(ld.balanced, mix_seed({master_seed, kTagSplit, static_cast<std::uint64_t>(lead)}));
    ld.stats = fit_standard_stats(src.anomalies, ld.balanced, ld.canonical.train);
    return ld;
}

TensorSet materialize_set(const std::vector<FieldStack>& stacks, const std::vector<Sample>& pool,
                          std::span<const std::size_t> indices, const StandardStats& stats) {
    if (indices.empty()) throw DataError("empty split");
    const int h = stacks.front().height();
    const int w = stacks.front().width();
    TensorSet set{Tensor4f(static_cast<int>(indices.size()), 3, h, w), {}};
    set.y.reserve(indices.size());
    const std::size_t sample_sz = static_cast<std::size_t>(3) * h * w;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Sample& s = pool[indices[k]];
        materialize_predictors(stacks, s, stats, set.x.v.data() + k * sample_sz);
        set.y.push_back(static_cast<int>(s.label));
    }
    return set;
}

namespace {

void append_score_rows(SkillTable& table, const std::string& model, int lead, int repetition,
                       const ClassScores& s) {
    for (int c = 0; c < kNumClasses; ++c) {
        table.rows.push_back(
            {model, lead, static_cast<SkillClass>(c), repetition, s.accuracy[c], s.n[c]});
    }
    table.rows.push_back({model, lead, SkillClass::Overall, repetition, s.overall, s.n_total});
}

RunRecord execute_run(const SweepConfig& cfg, const SourceData& src, const PreparedLead& ld,
                      int repetition) {
    RunRecord rec;
    rec.lead = ld.lead;
    rec.repetition = repetition;
    rec.run_seed = mix_seed({cfg.master_seed, kTagRun, static_cast<std::uint64_t>(ld.lead),
                             static_cast<std::uint64_t>(repetition)});
    try {
        const DatasetSplit sp = cfg.freeze_split
                                    ? ld.canonical
                                    : split(ld.balanced, mix_seed({rec.run_seed, kTagSplit}));
        const StandardStats stats = fit_standard_stats(src.anomalies, ld.balanced, sp.train);
        const TensorSet tr = materialize_set(src.anomalies, ld.balanced, sp.train, stats);
        const TensorSet va = materialize_set(src.anomalies, ld.balanced, sp.validation, stats);
        const TensorSet te = materialize_set(src.anomalies, ld.balanced, sp.test, stats);

        nn::CnnModel<float> model =
            nn::make_model<float>(cfg.cnn, 3, tr.x.h, tr.x.w, mix_seed({rec.run_seed, kTagInit}));
        nn::TrainConfig tc = cfg.train;
        tc.seed = mix_seed({rec.run_seed, kTagShuffle});
        nn::TrainResult res = nn::train(std::move(model), tr.x, tr.y, va.x, va.y, tc);

        const std::vector<int> pred = nn::predict(res.model, te.x);
        rec.test_scores = score_predictions(pred, te.y);
        rec.epochs_run = static_cast<int>(res.history.size());
        rec.best_epoch = res.best_epoch;
        rec.best_val_loss = res.best_val_loss;

        if (!cfg.checkpoint_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof(name), "cnn_lead%02d_rep%02d.ckpt", ld.lead, repetition);
            rec.checkpoint = cfg.checkpoint_dir / name;
            nn::save_checkpoint(res.model, rec.checkpoint, res.best_epoch);
        }
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
    }
    return rec;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg, const SourceData& src) {
    cfg.validate();
    if (src.anomalies.empty() || src.labels.size() != src.anomalies.size()) {
        throw DataError("source data is empty or inconsistent");
    }
    nn::compute_stage_dims(cfg.cnn, src.anomalies.front().height(),
                           src.anomalies.front().width());
    if (!cfg.checkpoint_dir.empty()) {
        std::filesystem::create_directories(cfg.checkpoint_dir);
    }

    std::vector<PreparedLead> lead_data;
    lead_data.reserve(cfg.leads.size());
    for (int lead : cfg.leads) {
        lead_data.push_back(prepare_lead(src, lead, cfg.n_per_class, cfg.master_seed));
    }

    const std::size_t n_tasks = lead_data.size() * static_cast<std::size_t>(cfg.repetitions);
    std::vector<RunRecord> records(n_tasks);
    const auto worker_body = [&](std::atomic<std::size_t>& next) {
        for (std::size_t t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) {
            const std::size_t li = t / cfg.repetitions;
            const int rep = static_cast<int>(t % cfg.repetitions);
            records[t] = execute_run(cfg, src, lead_data[li], rep);
        }
    };
    if (cfg.jobs <= 1 || n_tasks <= 1) {
        std::atomic<std::size_t> next{0};
        worker_body(next);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int n_threads = std::min<int>(cfg.jobs, static_cast<int>(n_tasks));
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back([&] { worker_body(next); });
        for (auto& th : pool) th.join();
    }

    SweepResult out;
    out.runs = std::move(records);
    for (std::size_t li = 0; li < lead_data.size(); ++li) {
        const PreparedLead& ld = lead_data[li];
        std::array<double, kNumClasses + 1> acc_sum{};
        std::array<long long, kNumClasses + 1> n_sum{};
        int ok = 0;
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            const RunRecord& rec = out.runs[li * cfg.repetitions + rep];
            if (rec.failed) continue;
            append_score_rows(out.table, kModelCnn, ld.lead, rep, rec.test_scores);
            for (int c = 0; c < kNumClasses; ++c) {
                acc_sum[c] += rec.test_scores.accuracy[c];
                n_sum[c] += rec.test_scores.n[c];
            }
            acc_sum[kNumClasses] += rec.test_scores.overall;
            n_sum[kNumClasses] += rec.test_scores.n_total;
            ++ok;
        }
        if (ok == 0) {
            std::ostringstream os;
            os << "every repetition failed at lead " << ld.lead << ": "
               << out.runs[li * cfg.repetitions].error;
            throw DataError(os.str());
        }
        for (int c = 0; c <= kNumClasses; ++c) {
            out.table.rows.push_back({kModelCnnMean, ld.lead, static_cast<SkillClass>(c), 0,
                                      acc_sum[c] / ok, static_cast<int>(n_sum[c])});
        }

        std::vector<Sample> test_pool;
        for (std::size_t i : ld.canonical.test) test_pool.push_back(ld.balanced[i]);
        const ClassScores persist =
            cfg.persistence_full_pool
                ? persistence_forecast(src.labels, ld.lead)
                : persistence_forecast(src.labels, ld.lead, test_pool);
        append_score_rows(out.table, kModelPersistence, ld.lead, 0, persist);

        ClassScores chance = chance_baseline();
        chance.n = persist.n;
        chance.n_total = persist.n_total;
        append_score_rows(out.table, kModelChance, ld.lead, 0, chance);
    }
    out.table.sort_rows();
    out.table.validate();
    return out;
}

double ensemble_mean(const SkillTable& table, const std::string& model, int lead, SkillClass cls) {
    double sum = 0.0;
    int n = 0;
    for (const SkillRow& r : table.rows) {
        if (r.model == model && r.lead == lead && r.cls == cls) {
            sum += r.accuracy;
            ++n;
        }
    }
    if (n == 0) {
        std::ostringstream os;
        os << "no rows for model " << model << " at lead " << lead;
        throw DataError(os.str());
    }
    return sum / n;
}

void report(const SkillTable& table, const std::filesystem::path& out_dir) {
    if (table.rows.empty()) throw DataError("cannot report an empty skill table");
    int max_n = 1;
    for (const SkillRow& r : table.rows) max_n = std::max(max_n, r.n_test);
    table.validate(std::max(1e-9, 5.1e-7 * max_n));  // tables may arrive CSV-quantized
    std::filesystem::create_directories(out_dir);
    write_skill_csv(table, out_dir / "skill.csv");

    std::set<std::string> model_set;
    std::set<int> lead_set;
    for (const SkillRow& r : table.rows) {
        model_set.insert(r.model);
        lead_set.insert(r.lead);
    }
    const std::vector<std::string> models(model_set.begin(), model_set.end());
    const std::vector<int> leads(lead_set.begin(), lead_set.end());

    std::vector<std::string> files = {"skill.csv"};
    for (int c = 0; c < 4; ++c) {
        const SkillClass cls = static_cast<SkillClass>(c);
        std::string text = "lead";
        for (const auto& m : models) text += "," + m;
        text += "\n";
        for (int lead : leads) {
            text += std::to_string(lead);
            for (const auto& m : models) {
                double sum = 0.0;
                int n = 0;
                for (const SkillRow& r : table.rows) {
                    if (r.model == m && r.lead == lead && r.cls == cls) {
                        sum += r.accuracy;
                        ++n;
                    }
                }
                if (n == 0) {
                    text += ",";
                } else {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), ",%.6f", sum / n);
                    text += buf;
                }
            }
            text += "\n";
        }
        const std::string fname = std::string("summary_") + to_string(cls) + ".csv";
        write_file_bytes(out_dir / fname, text.data(), text.size());
        files.push_back(fname);
    }

    json manifest;
    manifest["schema_version"] = 1;
    manifest["rows"] = table.rows.size();
    manifest["models"] = models;
    manifest["leads"] = leads;
    manifest["classes"] = {to_string(SkillClass::Negative), to_string(SkillClass::Neutral),
                           to_string(SkillClass::Positive), to_string(SkillClass::Overall)};
    manifest["files"] = files;
    std::string text = manifest.dump(2);
    text.push_back('\n');
    write_file_bytes(out_dir / "manifest.json", text.data(), text.size());
}

void write_runs_json(const std::vector<RunRecord>& runs, const std::filesystem::path& path) {
    json arr = json::array();
    for (const RunRecord& r : runs) {
        json jr;
        jr["lead"] = r.lead;
        jr["repetition"] = r.repetition;
        jr["run_seed"] = r.run_seed;
        jr["failed"] = r.failed;
        if (r.failed) {
            jr["error"] = r.error;
        } else {
            jr["epochs_run"] = r.epochs_run;
            jr["best_epoch"] = r.best_epoch;
            jr["best_val_loss"] = r.best_val_loss;
            jr["test_accuracy"] = {{"negative", r.test_scores.accuracy[0]},
                                   {"neutral", r.test_scores.accuracy[1]},
                                   {"positive", r.test_scores.accuracy[2]},
                                   {"overall", r.test_scores.overall}};
            jr["n_test"] = r.test_scores.n_total;
            if (!r.checkpoint.empty()) jr["checkpoint"] = r.checkpoint.string();
        }
        arr.push_back(std::move(jr));
    }
    std::string text = arr.dump(2);
    text.push_back('\n');
    write_file_bytes(path, text.data(), text.size());
}

}  // namespace amvcast::experiment
