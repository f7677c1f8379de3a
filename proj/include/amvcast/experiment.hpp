#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amvcast/amv.hpp"
#include "amvcast/baseline.hpp"
#include "amvcast/io.hpp"
#include "amvcast/nn.hpp"
#include "amvcast/train.hpp"

namespace amvcast::experiment {

/// Everything the sweep needs, precomputed once per dataset: harmonized
/// anomaly stacks, the per-member index, one pooled sigma, and labels.
struct SourceData {
    std::vector<FieldStack> anomalies;
    std::vector<AmvSeries> index;
    std::vector<std::vector<AmvClass>> labels;
    double sigma = 0.0;
};

/// Harmonizes masks, forms anomalies, computes the index, fits sigma over
/// the pooled ensemble (or takes sigma_override > 0 as-is), and labels
/// every (member, year). All members must share grid dimensions.
SourceData prepare_source(const std::vector<FieldStack>& raw_members,
                          double sigma_override = 0.0);

struct SweepConfig {
    std::vector<int> leads = {0, 3, 6, 9, 12, 15, 18, 21, 24};
    int repetitions = 10;
    std::size_t n_per_class = 300;
    /// Reuse one canonical split for every repetition of a lead instead of
    /// re-drawing it per run; isolates initialization/shuffle variance.
    bool freeze_split = false;
    /// Score persistence on every (member, year) pair instead of the
    /// canonical balanced test pool.
    bool persistence_full_pool = false;
    nn::TrainConfig train;
    nn::CnnConfig cnn;
    std::uint64_t master_seed = 1;
    int jobs = 1;
    std::filesystem::path checkpoint_dir;  // empty: keep no checkpoints

    void validate() const;
};

struct RunRecord {
    int lead = 0;
    int repetition = 0;
    std::uint64_t run_seed = 0;
    bool failed = false;
    std::string error;
    int epochs_run = 0;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    ClassScores test_scores;
    std::filesystem::path checkpoint;
};

struct SweepResult {
    SkillTable table;
    std::vector<RunRecord> runs;
};

/// One lead's canonical training pool: balanced samples, the canonical
/// split, and standardization stats fitted on its training part. The same
/// (source, lead, n_per_class, master_seed) always yields the same pool,
/// which is what lets a checkpoint be re-evaluated on its held-out split.
struct PreparedLead {
    int lead = 0;
    std::vector<Sample> balanced;
    DatasetSplit canonical;
    StandardStats stats;
};

PreparedLead prepare_lead(const SourceData& src, int lead, std::size_t n_per_class,
                          std::uint64_t master_seed);

struct TensorSet {
    Tensor4f x;
    std::vector<int> y;
};

TensorSet materialize_set(const std::vector<FieldStack>& stacks, const std::vector<Sample>& pool,
                          std::span<const std::size_t> indices, const StandardStats& stats);

/// Trains repetitions x leads networks and assembles the skill table:
/// per-run cnn rows, one cnn_mean row per (lead, class) over successful
/// runs, plus persistence and chance baselines on the canonical test pool.
/// A failed run is recorded with its error and skipped in the aggregates;
/// the sweep only throws if a lead has no successful run at all. Results
/// are deterministic for a given config regardless of `jobs`.
SweepResult run_sweep(const SweepConfig& cfg, const SourceData& src);

/// Mean accuracy over all repetitions of (model, lead, class).
double ensemble_mean(const SkillTable& table, const std::string& model, int lead, SkillClass cls);

/// Writes skill.csv, one summary_<class>.csv per class with models as
/// columns (repetitions collapsed to their mean), and manifest.json listing
/// the outputs. Byte-reproducible for a given table.
void report(const SkillTable& table, const std::filesystem::path& out_dir);

void write_runs_json(const std::vector<RunRecord>& runs, const std::filesystem::path& path);

}  // namespace amvcast::experiment
