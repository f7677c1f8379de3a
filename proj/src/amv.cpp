#include "amvcast/amv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "amvcast/rng.hpp"

namespace amvcast {

namespace {

/// Largest-remainder apportionment of `total` over proportional quotas.
/// Ties break toward the lowest bucket index. Deterministic.
std::vector<std::size_t> apportion(const std::vector<double>& quotas, std::size_t total) {
    const std::size_t n = quotas.size();
    std::vector<std::size_t> out(n, 0);
    double qsum = 0.0;
    for (double q : quotas) qsum += q;
    if (qsum <= 0.0) return out;

    std::size_t assigned = 0;
    std::vector<double> remainder(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double share = quotas[k] / qsum * static_cast<double>(total);
        out[k] = static_cast<std::size_t>(std::floor(share));
        remainder[k] = share - std::floor(share);
        assigned += out[k];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < total; ++k) {
        out[order[k % n]] += 1;
        ++assigned;
    }
    return out;
}

}  // namespace

const char* to_string(AmvClass c) {
    switch (c) {
        case AmvClass::Negative: return "negative";
        case AmvClass::Neutral: return "neutral";
        case AmvClass::Positive: return "positive";
    }
    throw DataError("invalid AMV class value");
}

FieldStack compute_anomalies(const FieldStack& stack) {
    const int T = stack.n_years();
    if (T < 2) throw DataError("anomaly baseline needs at least 2 years");
    FieldStack out = stack;
    const int V = stack.n_vars();
    const int H = stack.height();
    const int W = stack.width();
    for (int v = 0; v < V; ++v) {
        for (int i = 0; i < H; ++i) {
            for (int j = 0; j < W; ++j) {
                if (!stack.valid(v, i, j)) continue;  // masked cells untouched
                double sum = 0.0;
                for (int t = 0; t < T; ++t) sum += stack.value(v, t, i, j);
                const float mean = static_cast<float>(sum / T);
                for (int t = 0; t < T; ++t) {
                    out.value(v, t, i, j) = stack.value(v, t, i, j) - mean;
                }
            }
        }
    }
    return out;
}

AmvSeries compute_amv_index(const FieldStack& sst_anomalies) {
    const int v_sst = sst_anomalies.find_variable("SST");
    if (v_sst < 0) throw DataError("AMV index needs an SST variable");
    const std::vector<double> weights = area_weights(sst_anomalies.grid, kAmvIndexRegion);

    AmvSeries series;
    series.member = sst_anomalies.member;
    const int T = sst_anomalies.n_years();
    series.years.resize(T);
    series.index.resize(T);
    for (int t = 0; t < T; ++t) {
        series.years[t] = sst_anomalies.year_at(t);
        series.index[t] = masked_weighted_mean(sst_anomalies.field_at(v_sst, t), weights);
    }
    return series;
}

std::vector<AmvClass> classify(const AmvSeries& series, double sigma) {
    if (!(sigma > 0.0)) throw DegenerateError("classification threshold must be positive");
    std::vector<AmvClass> labels(series.index.size());
    for (std::size_t t = 0; t < series.index.size(); ++t) {
        const double x = series.index[t];
        if (x > sigma) {
            labels[t] = AmvClass::Positive;
        } else if (x < -sigma) {
            labels[t] = AmvClass::Negative;
        } else {
            labels[t] = AmvClass::Neutral;
        }
    }
    return labels;
}

double fit_sigma(std::span<const AmvSeries> all_members) {
    std::size_t n = 0;
    double sum = 0.0;
    for (const AmvSeries& s : all_members) {
        for (double x : s.index) {
            if (!std::isfinite(x)) throw NumericError("non-finite AMV index value");
            sum += x;
            ++n;
        }
    }
    if (n < 2) throw DataError("sigma fit needs at least 2 index values");
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const AmvSeries& s : all_members) {
        for (double x : s.index) {
            const double d = x - mean;
            ss += d * d;
        }
    }
    const double sigma = std::sqrt(ss / static_cast<double>(n));
    if (!(sigma > 0.0)) throw DegenerateError("pooled AMV index has zero variance");
    return sigma;
}

namespace {

struct Accumulator {
    double sum = 0.0;
    double sumsq = 0.0;
    std::size_t n = 0;

    void add(double x) {
        sum += x;
        sumsq += x * x;
        ++n;
    }
};

StandardStats finish_stats(std::vector<Accumulator>& acc) {
    StandardStats stats;
    stats.mean.resize(acc.size());
    stats.stddev.resize(acc.size());
    for (std::size_t v = 0; v < acc.size(); ++v) {
        if (acc[v].n == 0) throw DataError("no valid cells to fit standardization stats");
        const double mean = acc[v].sum / static_cast<double>(acc[v].n);
        const double var = std::max(0.0, acc[v].sumsq / static_cast<double>(acc[v].n) - mean * mean);
        stats.mean[v] = mean;
        stats.stddev[v] = std::sqrt(var);
        if (!(stats.stddev[v] > 0.0)) {
            throw DegenerateError("variable " + std::to_string(v) + " has zero spread");
        }
    }
    return stats;
}

}  // namespace

StandardStats fit_standard_stats(const FieldStack& stack) {
    std::vector<Accumulator> acc(stack.n_vars());
    const int T = stack.n_years();
    for (int v = 0; v < stack.n_vars(); ++v) {
        for (int i = 0; i < stack.height(); ++i) {
            for (int j = 0; j < stack.width(); ++j) {
                if (!stack.valid(v, i, j)) continue;
                for (int t = 0; t < T; ++t) acc[v].add(stack.value(v, t, i, j));
            }
        }
    }
    return finish_stats(acc);
}

StandardStats fit_standard_stats(const std::vector<FieldStack>& stacks,
                                 const std::vector<Sample>& samples,
                                 std::span<const std::size_t> indices) {
    if (stacks.empty()) throw DataError("no member stacks");
    const int V = stacks.front().n_vars();
    std::vector<Accumulator> acc(V);
    for (std::size_t idx : indices) {
        const Sample& s = samples.at(idx);
        const FieldStack& stack = stacks.at(s.member_idx);
        for (int v = 0; v < V; ++v) {
            for (int i = 0; i < stack.height(); ++i) {
                for (int j = 0; j < stack.width(); ++j) {
                    if (!stack.valid(v, i, j)) continue;
                    acc[v].add(stack.value(v, s.year_idx, i, j));
                }
            }
        }
    }
    return finish_stats(acc);
}

FieldStack standardize(const FieldStack& stack, const StandardStats& stats) {
    if (stats.mean.size() != static_cast<std::size_t>(stack.n_vars()) ||
        stats.stddev.size() != stats.mean.size()) {
        throw ShapeError("standardization stats do not match variable count");
    }
    FieldStack out = stack;
    const int T = stack.n_years();
    for (int v = 0; v < stack.n_vars(); ++v) {
        if (!(stats.stddev[v] > 0.0)) throw DegenerateError("zero standard deviation");
        const double mean = stats.mean[v];
        const double inv = 1.0 / stats.stddev[v];
        for (int i = 0; i < stack.height(); ++i) {
            for (int j = 0; j < stack.width(); ++j) {
                const bool ok = stack.valid(v, i, j);
                for (int t = 0; t < T; ++t) {
                    out.value(v, t, i, j) =
                        ok ? static_cast<float>((stack.value(v, t, i, j) - mean) * inv) : 0.0f;
                }
            }
        }
    }
    return out;
}

std::vector<Sample> build_samples(const std::vector<FieldStack>& stacks,
                                  const std::vector<std::vector<AmvClass>>& labels,
                                  int lead) {
    if (lead < 0) throw DataError("lead must be nonnegative");
    if (stacks.size() != labels.size()) throw ShapeError("stacks and labels count mismatch");
    std::vector<Sample> samples;
    for (std::size_t m = 0; m < stacks.size(); ++m) {
        const int T = stacks[m].n_years();
        if (labels[m].size() != static_cast<std::size_t>(T)) {
            throw ShapeError("label series length does not match member record");
        }
        for (int y = 0; y + lead < T; ++y) {
            Sample s;
            s.member_idx = static_cast<int>(m);
            s.year_idx = y;
            s.source_year = stacks[m].year_at(y);
            s.lead = lead;
            s.label = labels[m][y + lead];
            samples.push_back(s);
        }
    }
    if (samples.empty()) throw DataError("lead " + std::to_string(lead) + " exceeds every member record");
    return samples;
}

std::vector<Sample> balance_classes(const std::vector<Sample>& samples,
                                    std::size_t n_per_class, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        by_class[static_cast<int>(samples[k].label)].push_back(k);
    }
    std::size_t smallest = samples.size();
    for (const auto& cls : by_class) smallest = std::min(smallest, cls.size());
    if (smallest == 0) throw DataError("at least one AMV class has no samples");
    const std::size_t take = std::min(n_per_class, smallest);

    Rng rng(seed);
    std::vector<Sample> out;
    out.reserve(take * kNumClasses);
    for (auto& cls : by_class) {
        rng.shuffle(cls);
        for (std::size_t k = 0; k < take; ++k) out.push_back(samples[cls[k]]);
    }
    rng.shuffle(out);
    return out;
}

DatasetSplit split(const std::vector<Sample>& samples, std::uint64_t seed) {
    if (samples.size() < 10) throw DataError("split needs at least 10 samples");

    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        by_class[static_cast<int>(samples[k].label)].push_back(k);
    }
    std::vector<double> class_sizes(kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) class_sizes[c] = static_cast<double>(by_class[c].size());

    const std::size_t total = samples.size();
    const std::size_t total_train =
        static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(total)));
    const std::size_t total_rest = total - total_train;
    const std::size_t total_val = total_rest / 2;  // odd remainder goes to test

    // Per-class counts via largest remainder, so every split's class counts
    // stay within one sample of exact proportion.
    const std::vector<std::size_t> train_c = apportion(class_sizes, total_train);
    std::vector<double> rest_sizes(kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) {
        rest_sizes[c] = class_sizes[c] - static_cast<double>(train_c[c]);
    }
    const std::vector<std::size_t> val_c = apportion(rest_sizes, total_val);

    DatasetSplit out;
    out.seed = seed;
    Rng rng(seed);
    for (int c = 0; c < kNumClasses; ++c) {
        auto& pool = by_class[c];
        rng.shuffle(pool);
        if (train_c[c] + val_c[c] > pool.size()) throw DataError("split allocation exceeded class size");
        std::size_t k = 0;
        for (; k < train_c[c]; ++k) out.train.push_back(pool[k]);
        for (; k < train_c[c] + val_c[c]; ++k) out.validation.push_back(pool[k]);
        for (; k < pool.size(); ++k) out.test.push_back(pool[k]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

void write_labels_csv(const std::vector<AmvSeries>& series,
                      const std::vector<std::vector<AmvClass>>& labels,
                      const std::filesystem::path& path) {
    if (series.size() != labels.size()) throw ShapeError("series and labels count mismatch");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "member,year,index,label\n";
    char buf[32];
    for (std::size_t m = 0; m < series.size(); ++m) {
        const AmvSeries& s = series[m];
        if (labels[m].size() != s.index.size()) throw ShapeError("label series length mismatch");
        for (std::size_t t = 0; t < s.index.size(); ++t) {
            std::snprintf(buf, sizeof(buf), "%.6f", s.index[t]);
            out << s.member << ',' << s.years[t] << ',' << buf << ','
                << to_string(labels[m][t]) << '\n';
        }
    }
    if (!out) throw IoError("write failure on " + path.string());
}

void materialize_predictors(const std::vector<FieldStack>& stacks, const Sample& sample,
                            const StandardStats& stats, float* out) {
    const FieldStack& stack = stacks.at(sample.member_idx);
    const int V = stack.n_vars();
    const int H = stack.height();
    const int W = stack.width();
    if (stats.mean.size() != static_cast<std::size_t>(V)) {
        throw ShapeError("standardization stats do not match variable count");
    }
    for (int v = 0; v < V; ++v) {
        const double mean = stats.mean[v];
        if (!(stats.stddev[v] > 0.0)) throw DegenerateError("zero standard deviation");
        const double inv = 1.0 / stats.stddev[v];
        for (int i = 0; i < H; ++i) {
            for (int j = 0; j < W; ++j) {
                const std::size_t k = (static_cast<std::size_t>(v) * H + i) * W + j;
                out[k] = stack.valid(v, i, j)
                             ? static_cast<float>((stack.value(v, sample.year_idx, i, j) - mean) * inv)
                             : 0.0f;
            }
        }
    }
}

}  // namespace amvcast
