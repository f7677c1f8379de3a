#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "amvcast/io.hpp"
#include "amvcast/nn.hpp"
#include "amvcast/rng.hpp"

using namespace amvcast;
using namespace amvcast::nn;
namespace fs = std::filesystem;

namespace {

/// Reference convolution: direct sum over every index, no reuse tricks.
template <class T>
Tensor4<T> conv_oracle(const Tensor4<T>& x, const ConvLayer<T>& layer) {
    const int oh = x.h - layer.kh + 1;
    const int ow = x.w - layer.kw + 1;
    Tensor4<T> out(x.n, layer.out_channels, oh, ow);
    for (int n = 0; n < x.n; ++n)
        for (int k = 0; k < layer.out_channels; ++k)
            for (int r = 0; r < oh; ++r)
                for (int q = 0; q < ow; ++q) {
                    T acc = layer.bias[k];
                    for (int c = 0; c < layer.in_channels; ++c)
                        for (int dh = 0; dh < layer.kh; ++dh)
                            for (int dw = 0; dw < layer.kw; ++dw)
                                acc += layer.weights[layer.weight_index(k, c, dh, dw)] *
                                       x.at(n, c, r + dh, q + dw);
                    out.at(n, k, r, q) = acc;
                }
    return out;
}

ConvLayer<float> random_conv(int oc, int ic, int kh, int kw, Rng& rng) {
    ConvLayer<float> l{oc, ic, kh, kw, {}, {}};
    l.weights.resize(static_cast<std::size_t>(oc) * ic * kh * kw);
    l.bias.resize(oc);
    for (auto& v : l.weights) v = static_cast<float>(rng.normal());
    for (auto& v : l.bias) v = static_cast<float>(rng.normal());
    return l;
}

}  // namespace

TEST_CASE("convolution matches the direct-sum oracle on random shapes") {
    Rng rng(2024);
    for (int trial = 0; trial < 12; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(3));
        const int ic = 1 + static_cast<int>(rng.below(4));
        const int oc = 1 + static_cast<int>(rng.below(5));
        const int kh = 1 + static_cast<int>(rng.below(4));
        const int kw = 1 + static_cast<int>(rng.below(4));
        const int h = kh + static_cast<int>(rng.below(6));
        const int w = kw + static_cast<int>(rng.below(6));
        Tensor4<float> x(n, ic, h, w);
        for (auto& v : x.v) v = static_cast<float>(rng.normal());
        const ConvLayer<float> layer = random_conv(oc, ic, kh, kw, rng);

        const Tensor4<float> got = conv2d_forward(x, layer);
        const Tensor4<float> want = conv_oracle(x, layer);
        REQUIRE(got.same_shape(want));
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(std::abs(got.v[i] - want.v[i]) < 1e-6f * std::max(1.0f, std::abs(want.v[i])));
        }
    }
}

TEST_CASE("convolution rejects kernels larger than their input") {
    Rng rng(1);
    Tensor4<float> x(1, 1, 2, 2);
    const ConvLayer<float> layer = random_conv(1, 1, 3, 3, rng);
    CHECK_THROWS_AS(conv2d_forward(x, layer), ShapeError);
    const ConvLayer<float> wrong_c = random_conv(1, 2, 1, 1, rng);
    CHECK_THROWS_AS(conv2d_forward(x, wrong_c), ShapeError);
}

TEST_CASE("max pooling keeps window maxima, drops the remainder, ties go first") {
    Tensor4<float> x(1, 1, 3, 5);
    x.v = {1, 5, 2, 2, 9,
           5, 4, 2, 2, 8,
           0, 1, 3, 4, 7};  // 3x5 with a 2x2 pool -> 1x2, row 2 and col 4 dropped
    const PoolResult<float> p = maxpool_forward(x, 2, 2);
    CHECK(p.out.h == 1);
    CHECK(p.out.w == 2);
    CHECK(p.out.v[0] == 5.0f);
    CHECK(p.out.v[1] == 2.0f);
    CHECK(p.argmax[0] == 1);  // the first 5 in row-major window order
    CHECK(p.argmax[1] == 2);  // four-way tie of 2s -> first one

    Tensor4<float> dy(1, 1, 1, 2);
    dy.v = {10.0f, 20.0f};
    const Tensor4<float> dx = maxpool_backward(dy, p.argmax, 1, 1, 3, 5);
    CHECK(dx.v[1] == 10.0f);
    CHECK(dx.v[2] == 20.0f);
    CHECK(dx.v[0] == 0.0f);
    CHECK(dx.v[14] == 0.0f);
}

TEST_CASE("stage dims follow valid convolutions and floor pooling") {
    const CnnConfig cfg;  // 32@2x3, pool 2x3, 64@3x3, pool 2x3
    SUBCASE("a 224x224 regridded input") {
        const StageDims d = compute_stage_dims(cfg, 224, 224);
        CHECK(d.conv1_h == 223);
        CHECK(d.conv1_w == 222);
        CHECK(d.pool1_h == 111);
        CHECK(d.pool1_w == 74);
        CHECK(d.conv2_h == 109);
        CHECK(d.conv2_w == 72);
        CHECK(d.pool2_h == 54);
        CHECK(d.pool2_w == 24);
        CHECK(d.flatten == 82944);
    }
    SUBCASE("the native 33x41 input") {
        const StageDims d = compute_stage_dims(cfg, 33, 41);
        CHECK(d.pool1_h == 16);
        CHECK(d.pool1_w == 13);
        CHECK(d.pool2_h == 7);
        CHECK(d.pool2_w == 3);
        CHECK(d.flatten == 1344);
    }
    SUBCASE("the smallest workable input and one below it") {
        CHECK(compute_stage_dims(cfg, 9, 17).flatten == 64);
        CHECK_THROWS_AS(compute_stage_dims(cfg, 8, 17), ShapeError);
        CHECK_THROWS_AS(compute_stage_dims(cfg, 9, 16), ShapeError);
    }
    SUBCASE("degenerate hyperparameters are rejected") {
        CnnConfig bad = cfg;
        bad.conv1_filters = 0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        bad = cfg;
        bad.n_classes = 2;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("initialization is seed-deterministic with He-uniform bounds") {
    const CnnConfig cfg;
    const auto a = make_model<float>(cfg, 3, 12, 20, 77);
    const auto b = make_model<float>(cfg, 3, 12, 20, 77);
    const auto c = make_model<float>(cfg, 3, 12, 20, 78);
    CHECK(a.conv1.weights == b.conv1.weights);
    CHECK(a.fc2.weights == b.fc2.weights);
    CHECK(a.conv1.weights != c.conv1.weights);

    const double bound1 = std::sqrt(6.0 / (3.0 * 2 * 3));
    for (float wv : a.conv1.weights) {
        CHECK(std::abs(wv) <= bound1);
    }
    for (float bv : a.conv1.bias) CHECK(bv == 0.0f);
    const double boundf = std::sqrt(6.0 / a.fc1.in_features);
    for (float wv : a.fc1.weights) CHECK(std::abs(wv) <= boundf);
}

TEST_CASE("softmax cross-entropy matches hand values and is shift invariant") {
    const std::vector<float> logits = {1.0f, 1.0f, 1.0f, 5.0f, 1.0f, 1.0f};
    const std::vector<int> labels = {0, 1};
    std::vector<float> dl;
    const double loss = softmax_cross_entropy<float>(logits, 2, 3, labels, &dl);
    const double row0 = std::log(3.0);
    const double row1 = std::log(std::exp(0.0) + 2 * std::exp(-4.0)) + 4.0;
    CHECK(loss == doctest::Approx((row0 + row1) / 2).epsilon(1e-6));

    // Gradient rows sum to zero and point away from the true class.
    CHECK(dl[0] + dl[1] + dl[2] == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(dl[0] < 0.0);
    CHECK(dl[4] < 0.0);

    std::vector<float> shifted = logits;
    for (int k = 0; k < 3; ++k) shifted[k] += 100.0f;
    const double shifted_loss = softmax_cross_entropy<float>(shifted, 2, 3, labels, nullptr);
    CHECK(shifted_loss == doctest::Approx(loss).epsilon(1e-5));

    std::vector<float> inf_logits = {1.0f, std::numeric_limits<float>::infinity(), 0.0f};
    const std::vector<int> one = {0};
    CHECK_THROWS_AS(softmax_cross_entropy<float>(inf_logits, 1, 3, one, nullptr), NumericError);
    const std::vector<int> out_of_range = {0, 9};
    CHECK_THROWS_AS(softmax_cross_entropy<float>(logits, 2, 3, out_of_range, nullptr), DataError);
}

TEST_CASE("prediction breaks logit ties toward the lowest class") {
    const float row[3] = {2.0f, 2.0f, 1.0f};
    CHECK(argmax_row(row, 3) == 0);
    const float row2[3] = {1.0f, 3.0f, 3.0f};
    CHECK(argmax_row(row2, 3) == 1);
}

TEST_CASE("forward pass is shape-checked and deterministic") {
    CnnConfig cfg;
    cfg.conv1_filters = 4;
    cfg.conv2_filters = 6;
    cfg.hidden = 8;
    const auto m = make_model<float>(cfg, 3, 12, 20, 5);
    Tensor4<float> x(2, 3, 12, 20);
    Rng rng(9);
    for (auto& v : x.v) v = static_cast<float>(rng.normal());
    const auto l1 = forward(m, x);
    const auto l2 = forward(m, x);
    CHECK(l1 == l2);
    REQUIRE(l1.size() == 6);

    Tensor4<float> bad(1, 3, 11, 20);
    CHECK_THROWS_AS(forward(m, bad), ShapeError);
}

TEST_CASE("checkpoints round trip bit exactly and reject tampering") {
    const fs::path dir =
        fs::temp_directory_path() / ("amvcast_nn_" + std::to_string(Rng(1).next_u64()));
    fs::create_directories(dir);
    CnnConfig cfg;
    cfg.conv1_filters = 4;
    cfg.conv2_filters = 6;
    cfg.hidden = 8;
    auto m = make_model<float>(cfg, 3, 12, 20, 123);
    m.conv1.weights[0] = 0.125f;
    m.fc2.bias[2] = -7.5f;

    const fs::path path = dir / "model.ckpt";
    save_checkpoint(m, path, 14);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.epoch == 14);
    CHECK(back.model.init_seed == 123);
    auto pa = param_groups(m);
    auto pb = param_groups(back.model);
    for (int i = 0; i < 8; ++i) CHECK(*pa[i] == *pb[i]);

    SUBCASE("truncated parameter blob") {
        auto bytes = read_file_bytes(path);
        bytes.resize(bytes.size() - 4);
        write_file_bytes(path, bytes.data(), bytes.size());
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SUBCASE("missing header newline") {
        const std::string junk(64, 'x');
        write_file_bytes(path, junk.data(), junk.size());
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    fs::remove_all(dir);
}
