#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amvcast/errors.hpp"

namespace amvcast {

/// Regular rectilinear lat/lon grid. Axes hold cell-center coordinates in
/// degrees, strictly ascending; lons must stay within one 360-degree window.
struct Grid {
    std::vector<double> lats;  // degrees north
    std::vector<double> lons;  // degrees east

    int height() const { return static_cast<int>(lats.size()); }
    int width() const { return static_cast<int>(lons.size()); }

    void validate() const;

    bool operator==(const Grid&) const = default;
};

/// Builds a grid with evenly spaced cell centers spanning the given bounds.
Grid make_uniform_grid(int height, int width, double lat_min, double lat_max,
                       double lon_min, double lon_max);

/// Lat/lon bounding box, bounds inclusive. Longitudes may wrap through the
/// date line (lon_min > lon_max is expressed by going the long way around
/// via the +360 convention used by lon_in_region).
struct Region {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;
};

/// North Atlantic AMV index box: 80W-0 longitude, 0-65N latitude.
inline constexpr Region kAmvIndexRegion{0.0, 65.0, -80.0, 0.0};

/// True if lon falls inside [lon_min, lon_max] modulo 360.
bool lon_in_region(double lon, const Region& region);

/// One 2D surface field on a grid with a validity mask (1 = valid ocean cell).
struct Field {
    Grid grid;
    std::vector<float> values;        // H*W row-major
    std::vector<std::uint8_t> mask;   // H*W, 0 or 1

    int height() const { return grid.height(); }
    int width() const { return grid.width(); }

    float& at(int i, int j) { return values[static_cast<std::size_t>(i) * grid.lons.size() + j]; }
    float at(int i, int j) const { return values[static_cast<std::size_t>(i) * grid.lons.size() + j]; }
    bool valid(int i, int j) const { return mask[static_cast<std::size_t>(i) * grid.lons.size() + j] != 0; }

    void validate() const;
};

struct Variable {
    std::string name;   // SST, SSS, SLP
    std::string units;  // degC, psu, hPa

    bool operator==(const Variable&) const = default;
};

/// (V, T, H, W) stack of yearly surface fields for one ensemble member.
/// Each variable carries its own validity mask until harmonize_masks folds
/// them into one shared ocean mask.
struct FieldStack {
    std::vector<Variable> variables;
    int start_year = 0;
    std::string member;
    Grid grid;
    std::vector<float> data;           // V*T*H*W row-major
    std::vector<std::uint8_t> masks;   // V*H*W row-major

    int n_vars() const { return static_cast<int>(variables.size()); }
    int n_years() const {
        const std::size_t vhw = variables.size() * grid.lats.size() * grid.lons.size();
        return vhw == 0 ? 0 : static_cast<int>(data.size() / vhw);
    }
    int height() const { return grid.height(); }
    int width() const { return grid.width(); }
    int year_at(int t) const { return start_year + t; }

    std::size_t value_index(int v, int t, int i, int j) const {
        const std::size_t H = grid.lats.size();
        const std::size_t W = grid.lons.size();
        return ((static_cast<std::size_t>(v) * n_years() + t) * H + i) * W + j;
    }
    std::size_t mask_index(int v, int i, int j) const {
        const std::size_t H = grid.lats.size();
        const std::size_t W = grid.lons.size();
        return (static_cast<std::size_t>(v) * H + i) * W + j;
    }

    float value(int v, int t, int i, int j) const { return data[value_index(v, t, i, j)]; }
    float& value(int v, int t, int i, int j) { return data[value_index(v, t, i, j)]; }
    bool valid(int v, int i, int j) const { return masks[mask_index(v, i, j)] != 0; }

    /// Index of the named variable, or -1.
    int find_variable(const std::string& name) const;

    /// Copies variable v at time step t into a standalone Field.
    Field field_at(int v, int t) const;

    /// True when every variable carries an identical mask.
    bool has_shared_mask() const;

    void validate() const;
};

/// cos(latitude) weights for cells inside the region, 0 outside. Unnormalized;
/// masked_weighted_mean divides by the total weight. Throws RegionError when
/// no grid cell falls inside the region.
std::vector<double> area_weights(const Grid& grid, const Region& region);

/// Weighted mean of the field over cells that are both masked-valid and
/// positively weighted. Exact for constant fields. Throws RegionError when
/// the total usable weight is zero.
double masked_weighted_mean(const Field& field, const std::vector<double>& weights);

/// Nearest-neighbor regridding: each target cell copies the value and mask
/// bit of the source cell whose center is closest in (lat, lon) degrees,
/// with longitude wrap-around; ties break toward the lowest source index.
Field regrid_nearest(const Field& source, const Grid& target);

/// Applies the combined SST & SSS ocean mask to all variables in the stack.
/// Throws DataError if SST, SSS or SLP is missing, MaskError if the combined
/// mask has no valid cell.
FieldStack harmonize_masks(const FieldStack& stack);

}  // namespace amvcast
