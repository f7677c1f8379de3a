// End-to-end acceptance gate. Each numbered criterion prints exactly one
// PASS/FAIL line; the process exits nonzero if any failed. Sizes are chosen
// for a single-core machine; the stated runtime bounds are asserted, not
// assumed.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "amvcast/experiment.hpp"
#include "amvcast/gradcheck.hpp"
#include "amvcast/io.hpp"
#include "amvcast/rng.hpp"
#include "amvcast/synth.hpp"

using namespace amvcast;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

struct Gate {
    bool all_ok = true;

    void line(int n, bool ok, const std::string& detail) {
        std::printf("criterion %d %s (%s)\n", n, ok ? "PASS" : "FAIL", detail.c_str());
        std::fflush(stdout);
        if (!ok) all_ok = false;
    }
};

template <class F>
void guarded(Gate& gate, int n, F body) {
    try {
        body();
    } catch (const std::exception& e) {
        gate.line(n, false, std::string("exception: ") + e.what());
    }
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("amvcast_accept_" + std::to_string(Rng(std::random_device{}()).next_u64()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

/// Reference convolution: direct quadruple loop over outputs with the sum
/// accumulated in double, written without reference to the production code.
template <class T>
Tensor4<T> conv_reference(const Tensor4<T>& x, const nn::ConvLayer<T>& L) {
    Tensor4<T> out(x.n, L.out_channels, x.h - L.kh + 1, x.w - L.kw + 1);
    for (int n = 0; n < x.n; ++n) {
        for (int o = 0; o < L.out_channels; ++o) {
            for (int i = 0; i < out.h; ++i) {
                for (int j = 0; j < out.w; ++j) {
                    double acc = L.bias[o];
                    for (int c = 0; c < L.in_channels; ++c) {
                        for (int dh = 0; dh < L.kh; ++dh) {
                            for (int dw = 0; dw < L.kw; ++dw) {
                                acc += static_cast<double>(x.at(n, c, i + dh, j + dw)) *
                                       L.weights[L.weight_index(o, c, dh, dw)];
                            }
                        }
                    }
                    out.at(n, o, i, j) = static_cast<T>(acc);
                }
            }
        }
    }
    return out;
}

/// 33x41 high-signal ensemble shared by criteria 6 and 7: strong oscillation,
/// weak noise (amplitude/noise = 7), lagged salinity and tendency-coupled
/// pressure channels.
synth::SynthConfig full_grid_config() {
    synth::SynthConfig cfg;
    cfg.n_members = 20;
    cfg.n_years = 86;
    cfg.amplitude = 0.35;
    cfg.ar1_innovation_std = 0.01;
    cfg.sst_noise_std = 0.05;
    cfg.sss_noise_std = 0.05;
    cfg.slp_noise_std = 0.05;
    cfg.master_seed = 77;
    return cfg;
}

double extreme_mean(const SkillTable& table, const std::string& model, int lead) {
    return 0.5 * (experiment::ensemble_mean(table, model, lead, SkillClass::Negative) +
                  experiment::ensemble_mean(table, model, lead, SkillClass::Positive));
}

}  // namespace

int main() {
    Gate gate;

    // 1: analytic gradients against central finite differences.
    guarded(gate, 1, [&] {
        const auto t0 = Clock::now();
        const nn::GradCheckReport report = nn::run_gradient_check(1);
        const double secs = seconds_since(t0);
        gate.line(1, report.passed() && secs < 10.0,
                  fmt("max rel err %.3e vs 1e-3, %.1f s vs 10 s", report.max_rel_err, secs));
    });

    // 2: convolution against an independent direct-sum reference.
    guarded(gate, 2, [&] {
        const auto t0 = Clock::now();
        Rng rng(7);
        double max_diff = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            nn::ConvLayer<double> L;
            L.out_channels = 1 + static_cast<int>(rng.below(5));
            L.in_channels = 1 + static_cast<int>(rng.below(4));
            L.kh = 1 + static_cast<int>(rng.below(4));
            L.kw = 1 + static_cast<int>(rng.below(4));
            const int n = 1 + static_cast<int>(rng.below(3));
            const int h = L.kh + static_cast<int>(rng.below(8));
            const int w = L.kw + static_cast<int>(rng.below(8));
            L.weights.resize(static_cast<std::size_t>(L.out_channels) * L.in_channels * L.kh *
                             L.kw);
            L.bias.resize(L.out_channels);
            for (auto& v : L.weights) v = rng.uniform(-1.0, 1.0);
            for (auto& v : L.bias) v = rng.uniform(-1.0, 1.0);
            Tensor4<double> x(n, L.in_channels, h, w);
            for (auto& v : x.v) v = rng.uniform(-1.0, 1.0);

            const Tensor4<double> got = nn::conv2d_forward(x, L);
            const Tensor4<double> want = conv_reference(x, L);
            if (!got.same_shape(want)) throw ShapeError("conv output shape mismatch");
            for (std::size_t i = 0; i < got.v.size(); ++i) {
                max_diff = std::max(max_diff, std::abs(got.v[i] - want.v[i]));
            }
        }
        const double secs = seconds_since(t0);
        gate.line(2, max_diff <= 1e-6 && secs < 30.0,
                  fmt("50 shapes, max |diff| %.3e vs 1e-6, %.1f s vs 30 s", max_diff, secs));
    });

    // 3: index of a uniform anomaly, the boundary label, and threshold
    // scale-invariance.
    guarded(gate, 3, [&] {
        FieldStack stack;
        stack.variables = {{"SST", "degC"}, {"SSS", "psu"}, {"SLP", "hPa"}};
        stack.start_year = 1920;
        stack.member = "m000";
        stack.grid = make_uniform_grid(6, 8, 0.0, 64.0, -80.0, 0.0);
        const int T = 4;
        stack.data.assign(3 * T * 48, 0.0f);
        stack.masks.assign(3 * 48, 1);
        for (int t = 0; t < T; ++t) {
            for (int cell = 0; cell < 48; ++cell) stack.data[t * 48 + cell] = 0.5f;
        }
        const AmvSeries series = compute_amv_index(stack);
        bool index_exact = true;
        for (double v : series.index) index_exact = index_exact && v == 0.5;

        AmvSeries probe;
        probe.years = {0, 1, 2, 3, 4, 5, 6};
        probe.index = {-0.9, -0.3, -0.15, 0.0, 0.15, 0.3, 0.9};
        const double sigma = 0.3;
        const auto base = classify(probe, sigma);
        const bool boundary_neutral =
            base[1] == AmvClass::Neutral && base[5] == AmvClass::Neutral &&
            base[0] == AmvClass::Negative && base[6] == AmvClass::Positive;

        bool scale_invariant = true;
        for (double k : {0.1, 1.0, 10.0}) {
            AmvSeries scaled = probe;
            for (double& v : scaled.index) v = k * v;
            scale_invariant = scale_invariant && classify(scaled, k * sigma) == base;
        }
        gate.line(3, index_exact && boundary_neutral && scale_invariant,
                  fmt("uniform index %s, boundary %s, k-invariance %s",
                      index_exact ? "exact" : "off", boundary_neutral ? "neutral" : "wrong",
                      scale_invariant ? "holds" : "broken"));
    });

    // 4: persistence is perfect at lead 0 and collapses half a period out.
    guarded(gate, 4, [&] {
        synth::SynthConfig cfg;
        cfg.n_members = 20;
        cfg.n_years = 128;
        cfg.height = 4;
        cfg.width = 5;
        cfg.period_years = 64.0;
        cfg.amplitude = 0.35;
        cfg.ar1_innovation_std = 0.0;
        cfg.sst_noise_std = 0.0;
        cfg.sss_noise_std = 0.0;
        cfg.slp_noise_std = 0.0;
        cfg.pattern.base = 1.0;
        cfg.pattern.subpolar_amp = 0.0;
        cfg.pattern.tropical_amp = 0.0;
        cfg.pattern.trough_amp = 0.0;
        cfg.land.reset();
        const auto src = experiment::prepare_source(synth::generate_ensemble(cfg));

        const ClassScores now = persistence_forecast(src.labels, 0);
        bool lead0_exact = now.overall == 1.0;
        for (int c = 0; c < 3; ++c) {
            lead0_exact = lead0_exact && now.n[c] > 0 && now.accuracy[c] == 1.0;
        }
        const ClassScores half = persistence_forecast(src.labels, 33);
        const bool collapsed = half.n[0] > 0 && half.n[2] > 0 &&
                               half.accuracy[0] < 1.0 / 3.0 && half.accuracy[2] < 1.0 / 3.0;
        gate.line(4, lead0_exact && collapsed,
                  fmt("lead-0 all classes %s; lead-33 extremes %.3f/%.3f vs 1/3",
                      lead0_exact ? "exact" : "imperfect", half.accuracy[0], half.accuracy[2]));
    });

    // 5: the default sweep design on a 40-member x 86-year ensemble.
    guarded(gate, 5, [&] {
        synth::SynthConfig data_cfg;
        data_cfg.n_members = 40;
        data_cfg.n_years = 86;
        data_cfg.height = 10;
        data_cfg.width = 18;
        data_cfg.master_seed = 21;
        const auto src = experiment::prepare_source(synth::generate_ensemble(data_cfg));

        experiment::SweepConfig cfg;  // default leads and repetitions
        cfg.n_per_class = 30;
        cfg.train.max_epochs = 1;
        cfg.master_seed = 5;
        const auto res = experiment::run_sweep(cfg, src);

        const std::vector<int> want_leads = {0, 3, 6, 9, 12, 15, 18, 21, 24};
        bool ok = cfg.leads == want_leads && cfg.repetitions == 10;
        std::size_t cnn_rows = 0;
        for (int lead : want_leads) {
            std::set<int> reps;
            int persist = 0;
            int chance = 0;
            for (const SkillRow& r : res.table.rows) {
                if (r.lead != lead) continue;
                if (r.model == kModelCnn) {
                    reps.insert(r.repetition);
                    ++cnn_rows;
                } else if (r.model == kModelPersistence) {
                    ++persist;
                } else if (r.model == kModelChance) {
                    ++chance;
                }
            }
            ok = ok && reps.size() == 10 && persist == 4 && chance == 4;
        }
        ok = ok && cnn_rows == 9 * 10 * 4;
        gate.line(5, ok,
                  fmt("9 leads x 10 reps: %zu cnn rows, baselines per lead %s", cnn_rows,
                      ok ? "present" : "wrong"));
    });

    // Shared 33x41 source for criteria 6 and 7.
    experiment::SourceData hs_src;
    bool hs_ready = false;
    guarded(gate, 6, [&] {
        hs_src = experiment::prepare_source(synth::generate_ensemble(full_grid_config()));
        hs_ready = true;

        bool ok = true;
        std::string detail;
        for (std::uint64_t seed : {101ull, 202ull, 303ull}) {
            experiment::SweepConfig cfg;
            cfg.leads = {0};
            cfg.repetitions = 1;
            cfg.n_per_class = 200;
            cfg.master_seed = seed;
            const auto t0 = Clock::now();
            const auto res = experiment::run_sweep(cfg, hs_src);
            const double secs = seconds_since(t0);
            const double neg = experiment::ensemble_mean(res.table, kModelCnn, 0,
                                                         SkillClass::Negative);
            const double pos = experiment::ensemble_mean(res.table, kModelCnn, 0,
                                                         SkillClass::Positive);
            ok = ok && neg >= 0.90 && pos >= 0.90 && secs < 300.0;
            detail += fmt("%s%.2f/%.2f in %.0fs", detail.empty() ? "" : ", ", neg, pos, secs);
        }
        gate.line(6, ok, "lead-0 extremes per seed: " + detail + " vs 0.90, 300 s");
    });

    // 7: networks must beat persistence for extremes at the longest lead.
    guarded(gate, 7, [&] {
        if (!hs_ready) {
            hs_src = experiment::prepare_source(synth::generate_ensemble(full_grid_config()));
            hs_ready = true;
        }
        const auto t0 = Clock::now();
        const int lead = 24;
        int wins = 0;
        std::string detail;
        for (int trial = 0; trial < 10; ++trial) {
            experiment::SweepConfig cfg;
            cfg.leads = {lead};
            cfg.repetitions = 3;
            cfg.n_per_class = 150;
            cfg.train.max_epochs = 10;
            cfg.master_seed = 1000 + trial;
            const auto res = experiment::run_sweep(cfg, hs_src);
            const double cnn = extreme_mean(res.table, kModelCnnMean, lead);
            const double persist = extreme_mean(res.table, kModelPersistence, lead);
            if (cnn >= persist) ++wins;
            detail += fmt("%s%.2f%s%.2f", trial ? " " : "", cnn, cnn >= persist ? ">=" : "<",
                          persist);
        }
        const double secs = seconds_since(t0);
        gate.line(7, wins >= 8 && secs < 3600.0,
                  fmt("lead-24 wins %d/10 vs 8, %.0f s vs 3600 s [%s]", wins, secs,
                      detail.c_str()));
    });

    // 8: stage shapes at the regridded and native input sizes.
    guarded(gate, 8, [&] {
        const nn::CnnConfig cfg;
        const nn::StageDims big = nn::compute_stage_dims(cfg, 224, 224);
        bool ok = big.pool1_h == 111 && big.pool1_w == 74 && big.pool2_h == 54 &&
                  big.pool2_w == 24 && big.flatten == 82944;

        nn::CnnModel<float> model = nn::make_model<float>(cfg, 3, 224, 224, 3);
        Tensor4f x(1, 3, 224, 224);
        Rng rng(8);
        for (auto& v : x.v) v = static_cast<float>(rng.normal());
        nn::ForwardCache<float> cache;
        const auto logits = nn::forward(model, x, &cache);
        ok = ok && cache.pool1.out.c == 32 && cache.pool1.out.h == 111 &&
             cache.pool1.out.w == 74 && cache.pool2.out.c == 64 && cache.pool2.out.h == 54 &&
             cache.pool2.out.w == 24 && logits.size() == 3;

        const nn::StageDims grid = nn::compute_stage_dims(cfg, 33, 41);
        ok = ok && grid.flatten == 1344;
        gate.line(8, ok,
                  fmt("224x224 -> 32x%dx%d, 64x%dx%d, flatten %d; 33x41 -> flatten %d",
                      big.pool1_h, big.pool1_w, big.pool2_h, big.pool2_w, big.flatten,
                      grid.flatten));
    });

    // 9: bit-level determinism of the sweep and io round-trip identities.
    guarded(gate, 9, [&] {
        synth::SynthConfig data_cfg;
        data_cfg.n_members = 4;
        data_cfg.n_years = 48;
        data_cfg.height = 10;
        data_cfg.width = 18;
        data_cfg.master_seed = 9;
        const auto members = synth::generate_ensemble(data_cfg);
        const auto src = experiment::prepare_source(members);

        experiment::SweepConfig cfg;
        cfg.leads = {0, 2};
        cfg.repetitions = 2;
        cfg.n_per_class = 12;
        cfg.train.max_epochs = 2;
        cfg.master_seed = 31;
        const auto a = experiment::run_sweep(cfg, src);
        const auto b = experiment::run_sweep(cfg, src);
        bool identical = a.table.rows.size() == b.table.rows.size();
        for (std::size_t i = 0; identical && i < a.table.rows.size(); ++i) {
            const SkillRow& ra = a.table.rows[i];
            const SkillRow& rb = b.table.rows[i];
            identical = ra.model == rb.model && ra.lead == rb.lead && ra.cls == rb.cls &&
                        ra.repetition == rb.repetition && ra.accuracy == rb.accuracy &&
                        ra.n_test == rb.n_test;
        }

        TempDir tmp;
        const fs::path manifest = tmp.path / "m.json";
        write_stack(members[0], manifest);
        const FieldStack back = read_stack(manifest);
        const bool stack_id = back.data == members[0].data && back.masks == members[0].masks &&
                              back.grid == members[0].grid &&
                              back.start_year == members[0].start_year;

        const fs::path csv1 = tmp.path / "a.csv";
        const fs::path csv2 = tmp.path / "b.csv";
        write_skill_csv(a.table, csv1);
        write_skill_csv(read_skill_csv(csv1), csv2);
        const bool csv_id = read_file_bytes(csv1) == read_file_bytes(csv2);

        nn::CnnModel<float> model = nn::make_model<float>(nn::CnnConfig{}, 3, 10, 18, 42);
        const fs::path ck = tmp.path / "m.ckpt";
        nn::save_checkpoint(model, ck, 5);
        const nn::Checkpoint loaded = nn::load_checkpoint(ck);
        bool ck_id = loaded.epoch == 5 && loaded.model.init_seed == 42;
        const auto pa = nn::param_groups(model);
        const auto pb = nn::param_groups(loaded.model);
        for (int g = 0; g < 8; ++g) ck_id = ck_id && *pa[g] == *pb[g];

        gate.line(9, identical && stack_id && csv_id && ck_id,
                  fmt("sweep %s, stack %s, csv %s, checkpoint %s",
                      identical ? "bit-identical" : "diverged", stack_id ? "exact" : "broken",
                      csv_id ? "exact" : "broken", ck_id ? "exact" : "broken"));
    });

    std::printf("acceptance %s\n", gate.all_ok ? "PASSED" : "FAILED");
    return gate.all_ok ? 0 : 1;
}
