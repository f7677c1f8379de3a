#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "amvcast/grid.hpp"

using namespace amvcast;

namespace {

Field make_field(int h, int w, float fill = 1.0f) {
    Field f;
    f.grid = make_uniform_grid(h, w, 0.0, 60.0, -80.0, 0.0);
    f.values.assign(static_cast<std::size_t>(h) * w, fill);
    f.mask.assign(static_cast<std::size_t>(h) * w, 1);
    return f;
}

}  // namespace

TEST_CASE("uniform grid hits both endpoints and stays ascending") {
    const Grid g = make_uniform_grid(5, 9, 0.0, 64.0, -80.0, 0.0);
    CHECK(g.lats.front() == doctest::Approx(0.0));
    CHECK(g.lats.back() == doctest::Approx(64.0));
    CHECK(g.lons.front() == doctest::Approx(-80.0));
    CHECK(g.lons.back() == doctest::Approx(0.0));
    g.validate();
}

TEST_CASE("grid validation rejects bad axes") {
    Grid g;
    g.lats = {10.0, 5.0};
    g.lons = {0.0, 1.0};
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.lats = {0.0, 95.0};
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.lats = {0.0, 10.0};
    g.lons = {0.0, 10.0, 365.0};
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.lons = {0.0};
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("longitude region test wraps across the dateline") {
    // A 20-degree window over the dateline, written with the +360 convention.
    const Region r{0.0, 10.0, 170.0, 190.0};
    CHECK(lon_in_region(175.0, r));
    CHECK(lon_in_region(-175.0, r));
    CHECK(lon_in_region(180.0, r));
    CHECK_FALSE(lon_in_region(0.0, r));
    CHECK_FALSE(lon_in_region(160.0, r));
    CHECK_THROWS_AS(lon_in_region(0.0, Region{0.0, 10.0, 170.0, -170.0}), RegionError);
}

TEST_CASE("area weights are cos(lat) inside the region and zero outside") {
    const Grid g = make_uniform_grid(5, 5, 0.0, 80.0, -80.0, 0.0);
    const Region box{0.0, 40.0, -80.0, 0.0};
    const auto w = area_weights(g, box);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            const double lat = g.lats[i];
            const double expect =
                lat <= 40.0 ? std::cos(lat * std::numbers::pi / 180.0) : 0.0;
            CHECK(w[i * 5 + j] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(area_weights(g, Region{85.0, 89.0, -80.0, 0.0}), RegionError);
}

TEST_CASE("weighted mean of a constant field is exact") {
    Field f = make_field(7, 11, 0.5f);
    const auto w = area_weights(f.grid, kAmvIndexRegion);
    CHECK(masked_weighted_mean(f, w) == 0.5);
}

TEST_CASE("weighted mean is scale invariant to the weights") {
    Field f = make_field(6, 8);
    float v = 0.1f;
    for (auto& x : f.values) {
        x = v;
        v = v * 1.7f - static_cast<int>(v * 1.7f);
    }
    auto w = area_weights(f.grid, kAmvIndexRegion);
    const double base = masked_weighted_mean(f, w);
    for (double k : {0.1, 10.0, 1000.0}) {
        auto scaled = w;
        for (auto& x : scaled) x *= k;
        CHECK(masked_weighted_mean(f, scaled) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("weighted mean skips masked cells and zero weights") {
    Field f = make_field(2, 2);
    f.grid = Grid{{0.0, 1.0}, {0.0, 1.0}};
    f.values = {100.0f, 2.0f, 4.0f, 100.0f};
    f.mask = {0, 1, 1, 0};
    const std::vector<double> w = {5.0, 1.0, 1.0, 5.0};
    CHECK(masked_weighted_mean(f, w) == doctest::Approx(3.0));
    f.mask = {0, 0, 0, 0};
    CHECK_THROWS_AS(masked_weighted_mean(f, w), RegionError);
    f.mask = {1, 0, 0, 0};
    CHECK_THROWS_AS(masked_weighted_mean(f, {0.0, 1.0, 1.0, 1.0}), RegionError);
    CHECK_THROWS_AS(masked_weighted_mean(f, {1.0, 1.0}), ShapeError);
}

TEST_CASE("regridding onto the same grid is the identity") {
    Field f = make_field(9, 13);
    float v = -3.0f;
    for (auto& x : f.values) {
        x = v;
        v += 0.37f;
    }
    f.mask[5] = 0;
    f.values[5] = 0.0f;
    const Field g = regrid_nearest(f, f.grid);
    CHECK(g.values == f.values);
    CHECK(g.mask == f.mask);
}

TEST_CASE("regridding picks the nearest source cell, lowest index on ties") {
    Field f;
    f.grid = Grid{{0.0, 10.0}, {0.0, 10.0}};
    f.values = {1.0f, 2.0f, 3.0f, 4.0f};
    f.mask = {1, 1, 1, 0};
    Grid target{{5.0, 9.0}, {5.0, 9.0}};  // first target cell ties all four sources
    const Field g = regrid_nearest(f, target);
    CHECK(g.values[0] == 1.0f);   // tie -> lowest flat index
    CHECK(g.values[3] == 4.0f);   // nearest is (10, 10)
    CHECK(g.mask[3] == 0);        // mask bit travels with the value
}

TEST_CASE("regridding wraps longitude") {
    Field f;
    f.grid = Grid{{0.0, 10.0}, {-179.0, 0.0, 179.0}};
    f.values = {1, 2, 3, 4, 5, 6};
    f.mask.assign(6, 1);
    Grid target{{0.0, 10.0}, {-179.5, 179.5}};
    const Field g = regrid_nearest(f, target);
    // -179.5 is 0.5 degrees from -179 going west and 1.5 from 179.
    CHECK(g.values[0] == 1.0f);
    CHECK(g.values[1] == 3.0f);
}

TEST_CASE("mask harmonization applies the SST & SSS ocean mask everywhere") {
    FieldStack stack;
    stack.variables = {{"SST", "degC"}, {"SSS", "psu"}, {"SLP", "hPa"}};
    stack.start_year = 2000;
    stack.grid = make_uniform_grid(2, 2, 0.0, 10.0, -10.0, 0.0);
    stack.data.assign(3 * 2 * 4, 1.0f);
    stack.masks = {
        1, 1, 0, 1,   // SST
        1, 0, 1, 1,   // SSS
        1, 1, 1, 1,   // SLP (atmospheric grid covers land)
    };
    const FieldStack h = harmonize_masks(stack);
    const std::vector<std::uint8_t> expect = {1, 0, 0, 1};
    for (int v = 0; v < 3; ++v) {
        for (int c = 0; c < 4; ++c) {
            CHECK(h.masks[v * 4 + c] == expect[c]);
        }
    }
    CHECK(h.has_shared_mask());

    SUBCASE("a variable missing is a DataError") {
        stack.variables[2].name = "PSL";
        CHECK_THROWS_AS(harmonize_masks(stack), DataError);
    }
    SUBCASE("an all-land intersection is a MaskError") {
        for (int c = 0; c < 4; ++c) stack.masks[c] = 0;
        CHECK_THROWS_AS(harmonize_masks(stack), MaskError);
    }
}
