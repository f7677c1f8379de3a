#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "amvcast/grid.hpp"

namespace amvcast::synth {

/// Spatial loading pattern for the latent index: a flat base plus three
/// lat-Gaussian lobes (subpolar and tropical highs, a midlatitude trough)
/// tapered by a lon-Gaussian envelope. base=1 with zero amplitudes gives a
/// uniform pattern, which makes the basin mean of the field equal the
/// latent index exactly.
struct PatternSpec {
    double base = 0.0;
    double lon_center = -40.0;
    double lon_width = 25.0;
    double subpolar_amp = 1.0;
    double subpolar_lat = 55.0;
    double subpolar_width = 8.0;
    double tropical_amp = 0.6;
    double tropical_lat = 15.0;
    double tropical_width = 8.0;
    double trough_amp = 0.3;
    double trough_lat = 35.0;
    double trough_width = 6.0;
};

/// Rectangle of cells masked out as land in every member.
struct LandBox {
    double lat_min = 0.0, lat_max = 0.0, lon_min = 0.0, lon_max = 0.0;
};

struct SynthConfig {
    int n_members = 40;
    int n_years = 86;
    int start_year = 1920;
    int height = 33;
    int width = 41;
    double lat_min = 0.0, lat_max = 64.0;
    double lon_min = -80.0, lon_max = 0.0;

    double period_years = 64.0;  // latent oscillation period
    double amplitude = 0.35;
    double trend_per_century = 0.0;
    double ar1_coeff = 0.5;
    double ar1_innovation_std = 0.08;

    double sst_noise_std = 0.15;
    double sss_noise_std = 0.10;
    double slp_noise_std = 0.10;
    double sss_coupling = 0.8;  // SSS tracks the index lagged by sss_lag_years
    int sss_lag_years = 1;
    double slp_coupling = 25.0;  // SLP tracks the index tendency, so it leads

    PatternSpec pattern;
    std::optional<LandBox> land = LandBox{40.0, 64.0, -80.0, -55.0};
    std::uint64_t master_seed = 1;

    void validate() const;
};

/// Member phases step around the circle by the golden angle, so any subset
/// of members samples the oscillation evenly. Member 0 has phase 0.
double member_phase(int member_id);

/// One member's (SST, SSS, SLP) stack. All variables share the land mask,
/// so the result is harmonized by construction. Fully determined by
/// (config, member_id).
FieldStack generate_member(const SynthConfig& cfg, int member_id);

std::vector<FieldStack> generate_ensemble(const SynthConfig& cfg);

/// JSON config round trip. Missing keys take defaults; unknown keys are a
/// ConfigError so typos cannot silently revert a field to its default.
SynthConfig load_synth_config(const std::filesystem::path& path);
void write_synth_config(const SynthConfig& cfg, const std::filesystem::path& path);

}  // namespace amvcast::synth
