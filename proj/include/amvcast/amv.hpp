#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "amvcast/grid.hpp"

namespace amvcast {

/// Three-state AMV label. The integer encoding is part of the contract.
enum class AmvClass : int { Negative = 0, Neutral = 1, Positive = 2 };

inline constexpr int kNumClasses = 3;

const char* to_string(AmvClass c);

/// Reference threshold of the AMV index in the CESM1 large ensemble (degC).
/// Recorded for labeling imported CESM-scale data; synthetic runs fit their
/// own sigma from the pooled index.
inline constexpr double kCesmLensSigmaC = 0.3625;

/// Per-year AMV index for one ensemble member.
struct AmvSeries {
    std::string member;
    std::vector<int> years;
    std::vector<double> index;  // degC
    double sigma = 0.0;         // classification threshold; 0 = not fitted
};

/// One training example: predictors are the member's anomaly fields at
/// source_year, the label is the AMV state at source_year + lead. The
/// predictor tensor is materialized later, at standardization time.
struct Sample {
    int member_idx = 0;
    int year_idx = 0;     // time index of the predictor snapshot
    int source_year = 0;  // calendar year of the predictor snapshot
    int lead = 0;
    AmvClass label = AmvClass::Neutral;
};

/// Disjoint, exhaustive train/validation/test partition of a sample pool.
struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

/// Per-variable standardization statistics over valid cells.
struct StandardStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// Subtracts each cell's time mean over the member's full record, per
/// variable. Masked cells are left untouched. Requires at least 2 years.
FieldStack compute_anomalies(const FieldStack& stack);

/// Area-weighted mean of SST anomalies over the North Atlantic index box,
/// one value per year. sigma is left unset.
AmvSeries compute_amv_index(const FieldStack& sst_anomalies);

/// index > sigma: Positive; index < -sigma: Negative; boundary inclusive to
/// Neutral.
std::vector<AmvClass> classify(const AmvSeries& series, double sigma);

/// Population standard deviation of the index pooled over all members and
/// years. Throws DegenerateError when the pooled variance is zero.
double fit_sigma(std::span<const AmvSeries> all_members);

/// Per-variable mean/std over valid cells of the whole stack.
StandardStats fit_standard_stats(const FieldStack& stack);

/// Per-variable mean/std over valid cells of the chosen samples' predictor
/// snapshots (typically the training split).
StandardStats fit_standard_stats(const std::vector<FieldStack>& stacks,
                                 const std::vector<Sample>& samples,
                                 std::span<const std::size_t> indices);

/// (value - mean)/std at valid cells; masked cells become 0.
FieldStack standardize(const FieldStack& stack, const StandardStats& stats);

/// All (member, year) pairs whose target year + lead stays inside the
/// record. Labels index one vector per member, aligned with stack time axes.
std::vector<Sample> build_samples(const std::vector<FieldStack>& stacks,
                                  const std::vector<std::vector<AmvClass>>& labels,
                                  int lead);

/// Draws min(n_per_class, smallest class size) samples per class without
/// replacement and shuffles the result. Deterministic per seed.
std::vector<Sample> balance_classes(const std::vector<Sample>& samples,
                                    std::size_t n_per_class, std::uint64_t seed);

/// Stratified 0.8/0.1/0.1 split; each split's class counts stay within one
/// sample of exact proportion. Requires at least 10 samples.
DatasetSplit split(const std::vector<Sample>& samples, std::uint64_t seed);

/// Writes "member,year,index,label" rows for every member.
void write_labels_csv(const std::vector<AmvSeries>& series,
                      const std::vector<std::vector<AmvClass>>& labels,
                      const std::filesystem::path& path);

/// Standardized 3xHxW predictor tensor for one sample; masked cells are 0.
/// Appends into `out` (size 3*H*W starting at `offset`).
void materialize_predictors(const std::vector<FieldStack>& stacks, const Sample& sample,
                            const StandardStats& stats, float* out);

}  // namespace amvcast
