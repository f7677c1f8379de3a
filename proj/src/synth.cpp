#include "amvcast/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "amvcast/errors.hpp"
#include "amvcast/io.hpp"
#include "amvcast/rng.hpp"

namespace amvcast::synth {

using nlohmann::json;

void SynthConfig::validate() const {
    if (n_members < 1) throw ConfigError("n_members must be at least 1");
    if (n_years < 2) throw ConfigError("n_years must be at least 2");
    if (height < 2 || width < 2) throw ConfigError("grid must be at least 2x2");
    if (!(lat_min < lat_max) || lat_min < -90.0 || lat_max > 90.0) {
        throw ConfigError("latitude range must be ascending within [-90, 90]");
    }
    if (!(lon_min < lon_max) || lon_max - lon_min >= 360.0) {
        throw ConfigError("longitude range must be ascending and span less than 360 degrees");
    }
    if (!(period_years > 0.0)) throw ConfigError("period_years must be positive");
    if (amplitude < 0.0) throw ConfigError("amplitude must be non-negative");
    if (ar1_coeff < 0.0 || ar1_coeff >= 1.0) throw ConfigError("ar1_coeff must lie in [0, 1)");
    if (ar1_innovation_std < 0.0 || sst_noise_std < 0.0 || sss_noise_std < 0.0 ||
        slp_noise_std < 0.0) {
        throw ConfigError("noise levels must be non-negative");
    }
    if (sss_lag_years < 0) throw ConfigError("sss_lag_years must be non-negative");
    if (!(pattern.lon_width > 0.0) || !(pattern.subpolar_width > 0.0) ||
        !(pattern.tropical_width > 0.0) || !(pattern.trough_width > 0.0)) {
        throw ConfigError("pattern widths must be positive");
    }
}

double member_phase(int member_id) {
    constexpr double golden = 0.6180339887498949;
    const double frac = member_id * golden - std::floor(member_id * golden);
    return 2.0 * std::numbers::pi * frac;
}

namespace {

double gauss(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z);
}

double pattern_at(const PatternSpec& p, double lat, double lon) {
    const double envelope = gauss(lon, p.lon_center, p.lon_width);
    const double lobes = p.subpolar_amp * gauss(lat, p.subpolar_lat, p.subpolar_width) +
                         p.tropical_amp * gauss(lat, p.tropical_lat, p.tropical_width) -
                         p.trough_amp * gauss(lat, p.trough_lat, p.trough_width);
    return p.base + envelope * lobes;
}

bool in_land(const LandBox& b, double lat, double lon) {
    return lat >= b.lat_min && lat <= b.lat_max && lon >= b.lon_min && lon <= b.lon_max;
}

}  // namespace

FieldStack generate_member(const SynthConfig& cfg, int member_id) {
    cfg.validate();
    if (member_id < 0 || member_id >= cfg.n_members) {
        throw ConfigError("member_id outside the configured ensemble");
    }

    FieldStack stack;
    stack.variables = {{"SST", "degC"}, {"SSS", "psu"}, {"SLP", "hPa"}};
    stack.start_year = cfg.start_year;
    char name[16];
    std::snprintf(name, sizeof(name), "m%03d", member_id);
    stack.member = name;
    stack.grid = make_uniform_grid(cfg.height, cfg.width, cfg.lat_min, cfg.lat_max, cfg.lon_min,
                                   cfg.lon_max);

    const int T = cfg.n_years;
    const int H = cfg.height;
    const int W = cfg.width;
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    stack.data.assign(3 * static_cast<std::size_t>(T) * hw, 0.0f);
    stack.masks.assign(3 * hw, 1);

    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            if (cfg.land && in_land(*cfg.land, stack.grid.lats[i], stack.grid.lons[j])) {
                for (int v = 0; v < 3; ++v) stack.masks[v * hw + i * static_cast<std::size_t>(W) + j] = 0;
            }
        }
    }

    std::vector<double> pattern(hw);
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            pattern[i * static_cast<std::size_t>(W) + j] =
                pattern_at(cfg.pattern, stack.grid.lats[i], stack.grid.lons[j]);
        }
    }

    // The latent index is tabulated on [-(lag+1), T] so that lagged lookups
    // and the centered tendency stay in range for every output year.
    const int lo = -(cfg.sss_lag_years + 1);
    const int count = T + cfg.sss_lag_years + 2;
    const double phase = member_phase(member_id);
    const double two_pi = 2.0 * std::numbers::pi;

    Rng rng(mix_seed({cfg.master_seed, 0x73796e7468ull, static_cast<std::uint64_t>(member_id)}));
    std::vector<double> noise(count, 0.0);
    const double stationary =
        cfg.ar1_innovation_std / std::sqrt(1.0 - cfg.ar1_coeff * cfg.ar1_coeff);
    noise[0] = stationary * rng.normal();
    for (int k = 1; k < count; ++k) {
        noise[k] = cfg.ar1_coeff * noise[k - 1] + cfg.ar1_innovation_std * rng.normal();
    }
    std::vector<double> latent(count);
    for (int k = 0; k < count; ++k) {
        const double t = lo + k;
        latent[k] = cfg.amplitude * std::sin(two_pi * t / cfg.period_years + phase) +
                    (cfg.trend_per_century / 100.0) * t + noise[k];
    }
    const auto idx_at = [&](int t) { return latent[t - lo]; };

    // Draw order is fixed per member: AR innovations above, then one noise
    // block per variable in stack order. Changing it changes every field.
    const struct {
        int v;
        double noise_std;
    } blocks[] = {{0, cfg.sst_noise_std}, {1, cfg.sss_noise_std}, {2, cfg.slp_noise_std}};
    for (const auto& blk : blocks) {
        for (int t = 0; t < T; ++t) {
            double signal = 0.0;
            if (blk.v == 0) {
                signal = idx_at(t);
            } else if (blk.v == 1) {
                signal = cfg.sss_coupling * idx_at(t - cfg.sss_lag_years);
            } else {
                signal = cfg.slp_coupling * 0.5 * (idx_at(t + 1) - idx_at(t - 1));
            }
            for (std::size_t cell = 0; cell < hw; ++cell) {
                const double eps = rng.normal();
                if (stack.masks[blk.v * hw + cell] == 0) continue;
                stack.data[(static_cast<std::size_t>(blk.v) * T + t) * hw + cell] =
                    static_cast<float>(signal * pattern[cell] + blk.noise_std * eps);
            }
        }
    }
    stack.validate();
    return stack;
}

std::vector<FieldStack> generate_ensemble(const SynthConfig& cfg) {
    cfg.validate();
    std::vector<FieldStack> out;
    out.reserve(cfg.n_members);
    for (int m = 0; m < cfg.n_members; ++m) out.push_back(generate_member(cfg, m));
    return out;
}

namespace {

void take(const json& j, const char* key, double& into) {
    if (j.contains(key)) into = j.at(key).get<double>();
}
void take(const json& j, const char* key, int& into) {
    if (j.contains(key)) into = j.at(key).get<int>();
}
void take(const json& j, const char* key, std::uint64_t& into) {
    if (j.contains(key)) into = j.at(key).get<std::uint64_t>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const char* where) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (item.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError(std::string("unknown key \"") + item.key() + "\" in " + where);
    }
}

PatternSpec pattern_from_json(const json& j) {
    PatternSpec p;
    reject_unknown(j,
                   {"base", "lon_center", "lon_width", "subpolar_amp", "subpolar_lat",
                    "subpolar_width", "tropical_amp", "tropical_lat", "tropical_width",
                    "trough_amp", "trough_lat", "trough_width"},
                   "pattern");
    take(j, "base", p.base);
    take(j, "lon_center", p.lon_center);
    take(j, "lon_width", p.lon_width);
    take(j, "subpolar_amp", p.subpolar_amp);
    take(j, "subpolar_lat", p.subpolar_lat);
    take(j, "subpolar_width", p.subpolar_width);
    take(j, "tropical_amp", p.tropical_amp);
    take(j, "tropical_lat", p.tropical_lat);
    take(j, "tropical_width", p.tropical_width);
    take(j, "trough_amp", p.trough_amp);
    take(j, "trough_lat", p.trough_lat);
    take(j, "trough_width", p.trough_width);
    return p;
}

json pattern_to_json(const PatternSpec& p) {
    return json{{"base", p.base},
                {"lon_center", p.lon_center},
                {"lon_width", p.lon_width},
                {"subpolar_amp", p.subpolar_amp},
                {"subpolar_lat", p.subpolar_lat},
                {"subpolar_width", p.subpolar_width},
                {"tropical_amp", p.tropical_amp},
                {"tropical_lat", p.tropical_lat},
                {"tropical_width", p.tropical_width},
                {"trough_amp", p.trough_amp},
                {"trough_lat", p.trough_lat},
                {"trough_width", p.trough_width}};
}

}  // namespace

SynthConfig load_synth_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown(j,
                   {"n_members",       "n_years",           "start_year",
                    "height",          "width",             "lat_min",
                    "lat_max",         "lon_min",           "lon_max",
                    "period_years",    "amplitude",         "trend_per_century",
                    "ar1_coeff",       "ar1_innovation_std", "sst_noise_std",
                    "sss_noise_std",   "slp_noise_std",     "sss_coupling",
                    "sss_lag_years",   "slp_coupling",      "pattern",
                    "land",            "master_seed"},
                   "config");
    SynthConfig c;
    try {
        take(j, "n_members", c.n_members);
        take(j, "n_years", c.n_years);
        take(j, "start_year", c.start_year);
        take(j, "height", c.height);
        take(j, "width", c.width);
        take(j, "lat_min", c.lat_min);
        take(j, "lat_max", c.lat_max);
        take(j, "lon_min", c.lon_min);
        take(j, "lon_max", c.lon_max);
        take(j, "period_years", c.period_years);
        take(j, "amplitude", c.amplitude);
        take(j, "trend_per_century", c.trend_per_century);
        take(j, "ar1_coeff", c.ar1_coeff);
        take(j, "ar1_innovation_std", c.ar1_innovation_std);
        take(j, "sst_noise_std", c.sst_noise_std);
        take(j, "sss_noise_std", c.sss_noise_std);
        take(j, "slp_noise_std", c.slp_noise_std);
        take(j, "sss_coupling", c.sss_coupling);
        take(j, "sss_lag_years", c.sss_lag_years);
        take(j, "slp_coupling", c.slp_coupling);
        take(j, "master_seed", c.master_seed);
        if (j.contains("pattern")) c.pattern = pattern_from_json(j.at("pattern"));
        if (j.contains("land")) {
            if (j.at("land").is_null()) {
                c.land.reset();
            } else {
                const json& lb = j.at("land");
                reject_unknown(lb, {"lat_min", "lat_max", "lon_min", "lon_max"}, "land");
                LandBox box;
                take(lb, "lat_min", box.lat_min);
                take(lb, "lat_max", box.lat_max);
                take(lb, "lon_min", box.lon_min);
                take(lb, "lon_max", box.lon_max);
                c.land = box;
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

void write_synth_config(const SynthConfig& c, const std::filesystem::path& path) {
    json j{{"n_members", c.n_members},
           {"n_years", c.n_years},
           {"start_year", c.start_year},
           {"height", c.height},
           {"width", c.width},
           {"lat_min", c.lat_min},
           {"lat_max", c.lat_max},
           {"lon_min", c.lon_min},
           {"lon_max", c.lon_max},
           {"period_years", c.period_years},
           {"amplitude", c.amplitude},
           {"trend_per_century", c.trend_per_century},
           {"ar1_coeff", c.ar1_coeff},
           {"ar1_innovation_std", c.ar1_innovation_std},
           {"sst_noise_std", c.sst_noise_std},
           {"sss_noise_std", c.sss_noise_std},
           {"slp_noise_std", c.slp_noise_std},
           {"sss_coupling", c.sss_coupling},
           {"sss_lag_years", c.sss_lag_years},
           {"slp_coupling", c.slp_coupling},
           {"pattern", pattern_to_json(c.pattern)},
           {"master_seed", c.master_seed}};
    if (c.land) {
        j["land"] = json{{"lat_min", c.land->lat_min},
                         {"lat_max", c.land->lat_max},
                         {"lon_min", c.land->lon_min},
                         {"lon_max", c.land->lon_max}};
    } else {
        j["land"] = nullptr;
    }
    std::string text = j.dump(2);
    text.push_back('\n');
    write_file_bytes(path, text.data(), text.size());
}

}  // namespace amvcast::synth
