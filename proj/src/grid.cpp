#include "amvcast/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace amvcast {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

double wrap360(double x) {
    double r = std::fmod(x, 360.0);
    if (r < 0.0) r += 360.0;
    return r;
}

/// Shortest angular distance between two longitudes, degrees in [0, 180].
double lon_distance(double a, double b) {
    const double d = wrap360(a - b);
    return std::min(d, 360.0 - d);
}

}  // namespace

void Grid::validate() const {
    if (lats.size() < 2 || lons.size() < 2) {
        throw ConfigError("grid axes need at least 2 points each");
    }
    for (std::size_t i = 1; i < lats.size(); ++i) {
        if (!(lats[i] > lats[i - 1])) throw ConfigError("grid latitudes must be strictly ascending");
    }
    for (std::size_t j = 1; j < lons.size(); ++j) {
        if (!(lons[j] > lons[j - 1])) throw ConfigError("grid longitudes must be strictly ascending");
    }
    if (lats.front() < -90.0 || lats.back() > 90.0) {
        throw ConfigError("grid latitudes must lie within [-90, 90]");
    }
    if (lons.back() - lons.front() >= 360.0) {
        throw ConfigError("grid longitudes must span less than 360 degrees");
    }
    for (double v : lats) {
        if (!std::isfinite(v)) throw ConfigError("non-finite grid latitude");
    }
    for (double v : lons) {
        if (!std::isfinite(v)) throw ConfigError("non-finite grid longitude");
    }
}

Grid make_uniform_grid(int height, int width, double lat_min, double lat_max,
                       double lon_min, double lon_max) {
    if (height < 2 || width < 2) throw ConfigError("uniform grid needs at least 2x2 cells");
    Grid g;
    g.lats.resize(height);
    g.lons.resize(width);
    for (int i = 0; i < height; ++i) {
        g.lats[i] = lat_min + (lat_max - lat_min) * i / (height - 1);
    }
    for (int j = 0; j < width; ++j) {
        g.lons[j] = lon_min + (lon_max - lon_min) * j / (width - 1);
    }
    g.validate();
    return g;
}

bool lon_in_region(double lon, const Region& region) {
    const double width = region.lon_max - region.lon_min;
    if (width < 0.0) throw RegionError("region has lon_max < lon_min");
    if (width >= 360.0) return true;
    const double offset = wrap360(lon - region.lon_min);
    return offset <= width + 1e-9;
}

void Field::validate() const {
    grid.validate();
    const std::size_t cells = grid.lats.size() * grid.lons.size();
    if (values.size() != cells) throw ShapeError("field values size does not match grid");
    if (mask.size() != cells) throw ShapeError("field mask size does not match grid");
    for (std::size_t k = 0; k < cells; ++k) {
        if (mask[k] != 0 && !std::isfinite(values[k])) {
            throw FormatError("non-finite value at masked-valid cell");
        }
    }
}

int FieldStack::find_variable(const std::string& name) const {
    for (std::size_t v = 0; v < variables.size(); ++v) {
        if (variables[v].name == name) return static_cast<int>(v);
    }
    return -1;
}

Field FieldStack::field_at(int v, int t) const {
    Field f;
    f.grid = grid;
    const std::size_t cells = grid.lats.size() * grid.lons.size();
    f.values.resize(cells);
    f.mask.resize(cells);
    const std::size_t base = value_index(v, t, 0, 0);
    std::copy_n(data.begin() + base, cells, f.values.begin());
    std::copy_n(masks.begin() + static_cast<std::size_t>(v) * cells, cells, f.mask.begin());
    return f;
}

bool FieldStack::has_shared_mask() const {
    const std::size_t cells = grid.lats.size() * grid.lons.size();
    for (std::size_t v = 1; v < variables.size(); ++v) {
        if (!std::equal(masks.begin(), masks.begin() + cells,
                        masks.begin() + v * cells)) {
            return false;
        }
    }
    return true;
}

void FieldStack::validate() const {
    grid.validate();
    if (variables.empty()) throw FormatError("field stack has no variables");
    const std::size_t cells = grid.lats.size() * grid.lons.size();
    if (masks.size() != variables.size() * cells) {
        throw ShapeError("field stack mask size mismatch");
    }
    const std::size_t vtc = variables.size() * cells;
    if (vtc == 0 || data.size() % vtc != 0) {
        throw ShapeError("field stack data size is not a whole number of time steps");
    }
    if (data.empty()) throw ShapeError("field stack has no time steps");
    const int T = n_years();
    for (int v = 0; v < n_vars(); ++v) {
        for (int i = 0; i < height(); ++i) {
            for (int j = 0; j < width(); ++j) {
                if (!valid(v, i, j)) continue;
                for (int t = 0; t < T; ++t) {
                    if (!std::isfinite(value(v, t, i, j))) {
                        throw FormatError("non-finite value at masked-valid cell");
                    }
                }
            }
        }
    }
}

std::vector<double> area_weights(const Grid& grid, const Region& region) {
    grid.validate();
    if (region.lat_max < region.lat_min) throw RegionError("region has lat_max < lat_min");
    const int H = grid.height();
    const int W = grid.width();
    std::vector<double> w(static_cast<std::size_t>(H) * W, 0.0);
    bool any = false;
    for (int i = 0; i < H; ++i) {
        const double lat = grid.lats[i];
        if (lat < region.lat_min - 1e-9 || lat > region.lat_max + 1e-9) continue;
        const double cw = std::cos(lat * kDegToRad);
        for (int j = 0; j < W; ++j) {
            if (!lon_in_region(grid.lons[j], region)) continue;
            w[static_cast<std::size_t>(i) * W + j] = cw;
            any = true;
        }
    }
    if (!any) throw RegionError("region does not overlap the grid");
    return w;
}

double masked_weighted_mean(const Field& field, const std::vector<double>& weights) {
    const std::size_t cells = field.grid.lats.size() * field.grid.lons.size();
    if (field.values.size() != cells || field.mask.size() != cells) {
        throw ShapeError("field arrays do not match its grid");
    }
    if (weights.size() != cells) throw ShapeError("weights do not match field shape");

    // Anchor on the first usable value so constant fields come out exact.
    double ref = 0.0;
    bool found = false;
    for (std::size_t k = 0; k < cells; ++k) {
        if (field.mask[k] != 0 && weights[k] > 0.0) {
            ref = field.values[k];
            found = true;
            break;
        }
    }
    if (!found) throw RegionError("no cell is both masked-valid and positively weighted");

    double wsum = 0.0;
    double dsum = 0.0;
    for (std::size_t k = 0; k < cells; ++k) {
        if (field.mask[k] == 0 || weights[k] <= 0.0) continue;
        wsum += weights[k];
        dsum += weights[k] * (static_cast<double>(field.values[k]) - ref);
    }
    return ref + dsum / wsum;
}

Field regrid_nearest(const Field& source, const Grid& target) {
    source.grid.validate();
    target.validate();
    const std::size_t cells = source.grid.lats.size() * source.grid.lons.size();
    if (source.values.size() != cells || source.mask.size() != cells) {
        throw ShapeError("source field arrays do not match its grid");
    }

    // Squared distance is separable in lat and lon, so the nearest source
    // cell is (nearest lat row, nearest lon column); lowest-index tie-break
    // also separates.
    const auto nearest = [](const std::vector<double>& axis, double x, bool wrap) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < axis.size(); ++k) {
            const double d = wrap ? lon_distance(axis[k], x) : std::abs(axis[k] - x);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(k);
            }
        }
        return best;
    };

    const int Ht = target.height();
    const int Wt = target.width();
    std::vector<int> row_of(Ht), col_of(Wt);
    for (int i = 0; i < Ht; ++i) row_of[i] = nearest(source.grid.lats, target.lats[i], false);
    for (int j = 0; j < Wt; ++j) col_of[j] = nearest(source.grid.lons, target.lons[j], true);

    Field out;
    out.grid = target;
    out.values.resize(static_cast<std::size_t>(Ht) * Wt);
    out.mask.resize(static_cast<std::size_t>(Ht) * Wt);
    const int Ws = source.width();
    for (int i = 0; i < Ht; ++i) {
        for (int j = 0; j < Wt; ++j) {
            const std::size_t src = static_cast<std::size_t>(row_of[i]) * Ws + col_of[j];
            const std::size_t dst = static_cast<std::size_t>(i) * Wt + j;
            out.values[dst] = source.values[src];
            out.mask[dst] = source.mask[src];
        }
    }
    return out;
}

FieldStack harmonize_masks(const FieldStack& stack) {
    const int v_sst = stack.find_variable("SST");
    const int v_sss = stack.find_variable("SSS");
    const int v_slp = stack.find_variable("SLP");
    if (v_sst < 0 || v_sss < 0 || v_slp < 0) {
        throw DataError("mask harmonization needs SST, SSS and SLP variables");
    }
    const std::size_t cells = stack.grid.lats.size() * stack.grid.lons.size();

    std::vector<std::uint8_t> combined(cells);
    bool any = false;
    for (std::size_t k = 0; k < cells; ++k) {
        const std::uint8_t m = stack.masks[static_cast<std::size_t>(v_sst) * cells + k] &
                               stack.masks[static_cast<std::size_t>(v_sss) * cells + k];
        combined[k] = m;
        any = any || m != 0;
    }
    if (!any) throw MaskError("combined ocean mask is empty");

    FieldStack out = stack;
    for (int v = 0; v < out.n_vars(); ++v) {
        std::copy(combined.begin(), combined.end(),
                  out.masks.begin() + static_cast<std::size_t>(v) * cells);
    }
    return out;
}

}  // namespace amvcast
