#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "amvcast/errors.hpp"
#include "amvcast/rng.hpp"
#include "amvcast/tensor.hpp"

namespace amvcast::nn {

inline constexpr int kNumClasses = 3;

/// Architecture hyperparameters. Spatial input dims live on the model, not
/// here, so one config can be reused across grids.
struct CnnConfig {
    int conv1_filters = 32;
    int conv1_kh = 2;
    int conv1_kw = 3;
    int pool1_h = 2;
    int pool1_w = 3;
    int conv2_filters = 64;
    int conv2_kh = 3;
    int conv2_kw = 3;
    int pool2_h = 2;
    int pool2_w = 3;
    int hidden = 128;
    int n_classes = kNumClasses;

    void validate() const;
};

/// Per-stage output shapes for a given input size.
struct StageDims {
    int conv1_h = 0, conv1_w = 0;
    int pool1_h = 0, pool1_w = 0;
    int conv2_h = 0, conv2_w = 0;
    int pool2_h = 0, pool2_w = 0;
    int flatten = 0;
};

/// Valid convolution, stride 1: out = in - k + 1. Pooling windows are
/// non-overlapping and truncate: out = floor(in / p). Throws ShapeError if
/// any stage collapses below 1x1.
StageDims compute_stage_dims(const CnnConfig& cfg, int in_h, int in_w);

template <class T>
struct ConvLayer {
    int out_channels = 0, in_channels = 0, kh = 0, kw = 0;
    std::vector<T> weights;  // (out, in, kh, kw) row-major
    std::vector<T> bias;     // (out)

    std::size_t weight_index(int o, int i, int dh, int dw) const {
        return ((static_cast<std::size_t>(o) * in_channels + i) * kh + dh) * kw + dw;
    }
};

template <class T>
struct FcLayer {
    int out_features = 0, in_features = 0;
    std::vector<T> weights;  // (out, in) row-major
    std::vector<T> bias;     // (out)
};

/// Gradients mirroring the parameter layout of CnnModel.
template <class T>
struct Grads {
    std::vector<T> conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b;
};

template <class T>
struct CnnModel {
    CnnConfig config;
    int in_channels = 0, in_height = 0, in_width = 0;
    std::uint64_t init_seed = 0;
    StageDims dims;
    ConvLayer<T> conv1, conv2;
    FcLayer<T> fc1, fc2;
};

/// Canonical parameter-group order used by serialization, SGD, and the
/// gradient checker.
inline constexpr std::array<const char*, 8> kParamGroupNames = {
    "conv1.weights", "conv1.bias", "conv2.weights", "conv2.bias",
    "fc1.weights",   "fc1.bias",   "fc2.weights",   "fc2.bias"};

template <class T>
std::array<std::vector<T>*, 8> param_groups(CnnModel<T>& m) {
    return {&m.conv1.weights, &m.conv1.bias, &m.conv2.weights, &m.conv2.bias,
            &m.fc1.weights,   &m.fc1.bias,   &m.fc2.weights,   &m.fc2.bias};
}

template <class T>
std::array<const std::vector<T>*, 8> param_groups(const CnnModel<T>& m) {
    return {&m.conv1.weights, &m.conv1.bias, &m.conv2.weights, &m.conv2.bias,
            &m.fc1.weights,   &m.fc1.bias,   &m.fc2.weights,   &m.fc2.bias};
}

template <class T>
std::array<const std::vector<T>*, 8> grad_groups(const Grads<T>& g) {
    return {&g.conv1_w, &g.conv1_b, &g.conv2_w, &g.conv2_b,
            &g.fc1_w,   &g.fc1_b,   &g.fc2_w,   &g.fc2_b};
}

/// He-style uniform init: weights ~ U(-b, b) with b = sqrt(6 / fan_in),
/// biases zero. Weight draws happen in a fixed order (conv1, conv2, fc1,
/// fc2) so the same seed yields the same network at any precision.
template <class T>
CnnModel<T> make_model(const CnnConfig& cfg, int in_channels, int in_h, int in_w,
                       std::uint64_t init_seed) {
    cfg.validate();
    if (in_channels < 1) throw ShapeError("model needs at least one input channel");
    CnnModel<T> m;
    m.config = cfg;
    m.in_channels = in_channels;
    m.in_height = in_h;
    m.in_width = in_w;
    m.init_seed = init_seed;
    m.dims = compute_stage_dims(cfg, in_h, in_w);

    m.conv1 = {cfg.conv1_filters, in_channels, cfg.conv1_kh, cfg.conv1_kw, {}, {}};
    m.conv2 = {cfg.conv2_filters, cfg.conv1_filters, cfg.conv2_kh, cfg.conv2_kw, {}, {}};
    m.fc1 = {cfg.hidden, m.dims.flatten, {}, {}};
    m.fc2 = {cfg.n_classes, cfg.hidden, {}, {}};

    Rng rng(init_seed);
    auto fill = [&rng](std::vector<T>& w, std::size_t count, double fan_in) {
        const double bound = std::sqrt(6.0 / fan_in);
        w.resize(count);
        for (auto& x : w) x = static_cast<T>(rng.uniform(-bound, bound));
    };
    fill(m.conv1.weights,
         static_cast<std::size_t>(m.conv1.out_channels) * m.conv1.in_channels * m.conv1.kh * m.conv1.kw,
         static_cast<double>(m.conv1.in_channels) * m.conv1.kh * m.conv1.kw);
    m.conv1.bias.assign(m.conv1.out_channels, T(0));
    fill(m.conv2.weights,
         static_cast<std::size_t>(m.conv2.out_channels) * m.conv2.in_channels * m.conv2.kh * m.conv2.kw,
         static_cast<double>(m.conv2.in_channels) * m.conv2.kh * m.conv2.kw);
    m.conv2.bias.assign(m.conv2.out_channels, T(0));
    fill(m.fc1.weights, static_cast<std::size_t>(m.fc1.out_features) * m.fc1.in_features,
         static_cast<double>(m.fc1.in_features));
    m.fc1.bias.assign(m.fc1.out_features, T(0));
    fill(m.fc2.weights, static_cast<std::size_t>(m.fc2.out_features) * m.fc2.in_features,
         static_cast<double>(m.fc2.in_features));
    m.fc2.bias.assign(m.fc2.out_features, T(0));
    return m;
}

template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const ConvLayer<T>& layer) {
    if (x.c != layer.in_channels) throw ShapeError("conv input channels mismatch");
    const int oh = x.h - layer.kh + 1;
    const int ow = x.w - layer.kw + 1;
    if (oh < 1 || ow < 1) throw ShapeError("conv kernel larger than input");
    Tensor4<T> out(x.n, layer.out_channels, oh, ow);
    for (int n = 0; n < x.n; ++n) {
        for (int k = 0; k < layer.out_channels; ++k) {
            T* op = out.plane(n, k);
            const T b = layer.bias[k];
            for (int i = 0; i < oh * ow; ++i) op[i] = b;
            for (int c = 0; c < layer.in_channels; ++c) {
                const T* xp = x.plane(n, c);
                for (int dh = 0; dh < layer.kh; ++dh) {
                    for (int dw = 0; dw < layer.kw; ++dw) {
                        const T wv = layer.weights[layer.weight_index(k, c, dh, dw)];
                        for (int r = 0; r < oh; ++r) {
                            const T* xrow = xp + static_cast<std::size_t>(r + dh) * x.w + dw;
                            T* orow = op + static_cast<std::size_t>(r) * ow;
                            for (int q = 0; q < ow; ++q) orow[q] += wv * xrow[q];
                        }
                    }
                }
            }
        }
    }
    return out;
}

/// Backward pass for valid conv. dy has the forward output shape; returns
/// dx and accumulates weight/bias grads into gw/gb (which must be
/// pre-sized and zeroed by the caller).
template <class T>
Tensor4<T> conv2d_backward(const Tensor4<T>& x, const ConvLayer<T>& layer,
                           const Tensor4<T>& dy, std::vector<T>& gw, std::vector<T>& gb) {
    const int oh = dy.h, ow = dy.w;
    Tensor4<T> dx(x.n, x.c, x.h, x.w);
    for (int n = 0; n < x.n; ++n) {
        for (int k = 0; k < layer.out_channels; ++k) {
            const T* dyp = dy.plane(n, k);
            T acc = T(0);
            for (int i = 0; i < oh * ow; ++i) acc += dyp[i];
            gb[k] += acc;
            for (int c = 0; c < layer.in_channels; ++c) {
                const T* xp = x.plane(n, c);
                T* dxp = dx.plane(n, c);
                for (int dh = 0; dh < layer.kh; ++dh) {
                    for (int dw = 0; dw < layer.kw; ++dw) {
                        const std::size_t wi = layer.weight_index(k, c, dh, dw);
                        const T wv = layer.weights[wi];
                        T gacc = T(0);
                        for (int r = 0; r < oh; ++r) {
                            const T* xrow = xp + static_cast<std::size_t>(r + dh) * x.w + dw;
                            T* dxrow = dxp + static_cast<std::size_t>(r + dh) * x.w + dw;
                            const T* dyrow = dyp + static_cast<std::size_t>(r) * ow;
                            for (int q = 0; q < ow; ++q) {
                                gacc += dyrow[q] * xrow[q];
                                dxrow[q] += wv * dyrow[q];
                            }
                        }
                        gw[wi] += gacc;
                    }
                }
            }
        }
    }
    return dx;
}

template <class T>
struct PoolResult {
    Tensor4<T> out;
    std::vector<std::int64_t> argmax;  // flat index into the pool input, per output cell
};

/// Max pooling over non-overlapping ph x pw windows; trailing rows/cols
/// that do not fill a window are dropped. Ties go to the first element in
/// row-major window order.
template <class T>
PoolResult<T> maxpool_forward(const Tensor4<T>& x, int ph, int pw) {
    if (ph < 1 || pw < 1) throw ShapeError("pool window must be at least 1x1");
    const int oh = x.h / ph;
    const int ow = x.w / pw;
    if (oh < 1 || ow < 1) throw ShapeError("pool window larger than input");
    PoolResult<T> res{Tensor4<T>(x.n, x.c, oh, ow), {}};
    res.argmax.resize(res.out.size());
    std::size_t oi = 0;
    for (int n = 0; n < x.n; ++n) {
        for (int c = 0; c < x.c; ++c) {
            const T* xp = x.plane(n, c);
            const std::size_t base = x.index(n, c, 0, 0);
            for (int r = 0; r < oh; ++r) {
                for (int q = 0; q < ow; ++q) {
                    std::size_t best = static_cast<std::size_t>(r) * ph * x.w + static_cast<std::size_t>(q) * pw;
                    T bv = xp[best];
                    for (int dh = 0; dh < ph; ++dh) {
                        const std::size_t row = (static_cast<std::size_t>(r) * ph + dh) * x.w + static_cast<std::size_t>(q) * pw;
                        for (int dw = 0; dw < pw; ++dw) {
                            if (xp[row + dw] > bv) {
                                bv = xp[row + dw];
                                best = row + dw;
                            }
                        }
                    }
                    res.out.v[oi] = bv;
                    res.argmax[oi] = static_cast<std::int64_t>(base + best);
                    ++oi;
                }
            }
        }
    }
    return res;
}

template <class T>
Tensor4<T> maxpool_backward(const Tensor4<T>& dy, const std::vector<std::int64_t>& argmax,
                            int in_n, int in_c, int in_h, int in_w) {
    Tensor4<T> dx(in_n, in_c, in_h, in_w);
    for (std::size_t i = 0; i < dy.size(); ++i) {
        dx.v[static_cast<std::size_t>(argmax[i])] += dy.v[i];
    }
    return dx;
}

template <class T>
void relu_inplace(std::vector<T>& v) {
    for (auto& x : v) {
        if (x < T(0)) x = T(0);
    }
}

/// y (n_rows x out) = x (n_rows x in) * W^T + b.
template <class T>
std::vector<T> fc_forward(const std::vector<T>& x, int n_rows, const FcLayer<T>& layer) {
    if (x.size() != static_cast<std::size_t>(n_rows) * layer.in_features) {
        throw ShapeError("fc input size mismatch");
    }
    std::vector<T> y(static_cast<std::size_t>(n_rows) * layer.out_features);
    for (int n = 0; n < n_rows; ++n) {
        const T* xr = x.data() + static_cast<std::size_t>(n) * layer.in_features;
        T* yr = y.data() + static_cast<std::size_t>(n) * layer.out_features;
        for (int o = 0; o < layer.out_features; ++o) {
            const T* wr = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_features;
            T acc = layer.bias[o];
            for (int i = 0; i < layer.in_features; ++i) acc += wr[i] * xr[i];
            yr[o] = acc;
        }
    }
    return y;
}

template <class T>
std::vector<T> fc_backward(const std::vector<T>& x, int n_rows, const FcLayer<T>& layer,
                           const std::vector<T>& dy, std::vector<T>& gw, std::vector<T>& gb) {
    std::vector<T> dx(x.size(), T(0));
    for (int n = 0; n < n_rows; ++n) {
        const T* xr = x.data() + static_cast<std::size_t>(n) * layer.in_features;
        const T* dyr = dy.data() + static_cast<std::size_t>(n) * layer.out_features;
        T* dxr = dx.data() + static_cast<std::size_t>(n) * layer.in_features;
        for (int o = 0; o < layer.out_features; ++o) {
            const T g = dyr[o];
            gb[o] += g;
            const T* wr = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_features;
            T* gwr = gw.data() + static_cast<std::size_t>(o) * layer.in_features;
            for (int i = 0; i < layer.in_features; ++i) {
                gwr[i] += g * xr[i];
                dxr[i] += wr[i] * g;
            }
        }
    }
    return dx;
}

template <class T>
struct ForwardCache {
    Tensor4<T> conv1_pre;
    PoolResult<T> pool1;
    Tensor4<T> conv2_pre;
    PoolResult<T> pool2;
    std::vector<T> fc1_pre;
    std::vector<T> logits;  // n x n_classes
};

/// Full forward pass; returns logits (n x n_classes). When cache is given
/// the per-stage activations needed for backprop are kept.
template <class T>
std::vector<T> forward(const CnnModel<T>& m, const Tensor4<T>& x, ForwardCache<T>* cache = nullptr) {
    if (x.c != m.in_channels || x.h != m.in_height || x.w != m.in_width) {
        throw ShapeError("input tensor does not match model input dims");
    }
    Tensor4<T> conv1_pre = conv2d_forward(x, m.conv1);
    Tensor4<T> a1 = conv1_pre;
    relu_inplace(a1.v);
    PoolResult<T> pool1 = maxpool_forward(a1, m.config.pool1_h, m.config.pool1_w);

    Tensor4<T> conv2_pre = conv2d_forward(pool1.out, m.conv2);
    Tensor4<T> a2 = conv2_pre;
    relu_inplace(a2.v);
    PoolResult<T> pool2 = maxpool_forward(a2, m.config.pool2_h, m.config.pool2_w);

    std::vector<T> fc1_pre = fc_forward(pool2.out.v, x.n, m.fc1);
    std::vector<T> h = fc1_pre;
    relu_inplace(h);
    std::vector<T> logits = fc_forward(h, x.n, m.fc2);

    if (cache) {
        cache->conv1_pre = std::move(conv1_pre);
        cache->pool1 = std::move(pool1);
        cache->conv2_pre = std::move(conv2_pre);
        cache->pool2 = std::move(pool2);
        cache->fc1_pre = std::move(fc1_pre);
        cache->logits = logits;
    }
    return logits;
}

/// Mean softmax cross-entropy over the batch. Fills dlogits (same shape as
/// logits, already divided by batch size) when non-null. Throws
/// NumericError if any logit or the loss is non-finite.
template <class T>
double softmax_cross_entropy(const std::vector<T>& logits, int n_rows, int n_classes,
                             std::span<const int> labels, std::vector<T>* dlogits) {
    if (static_cast<int>(labels.size()) != n_rows) throw ShapeError("label count mismatch");
    if (dlogits) dlogits->assign(logits.size(), T(0));
    double total = 0.0;
    for (int n = 0; n < n_rows; ++n) {
        const T* lr = logits.data() + static_cast<std::size_t>(n) * n_classes;
        const int y = labels[n];
        if (y < 0 || y >= n_classes) throw DataError("label out of range");
        double mx = lr[0];
        for (int k = 1; k < n_classes; ++k) mx = std::max(mx, static_cast<double>(lr[k]));
        if (!std::isfinite(mx)) throw NumericError("non-finite logits");
        double denom = 0.0;
        for (int k = 0; k < n_classes; ++k) denom += std::exp(static_cast<double>(lr[k]) - mx);
        total += std::log(denom) - (static_cast<double>(lr[y]) - mx);
        if (dlogits) {
            T* dr = dlogits->data() + static_cast<std::size_t>(n) * n_classes;
            for (int k = 0; k < n_classes; ++k) {
                double p = std::exp(static_cast<double>(lr[k]) - mx) / denom;
                dr[k] = static_cast<T>((p - (k == y ? 1.0 : 0.0)) / n_rows);
            }
        }
    }
    const double loss = total / n_rows;
    if (!std::isfinite(loss)) throw NumericError("non-finite loss");
    return loss;
}

template <class T>
struct LossGrads {
    double loss = 0.0;
    int correct = 0;
    Grads<T> grads;
};

template <class T>
Grads<T> make_zero_grads(const CnnModel<T>& m) {
    Grads<T> g;
    auto ps = param_groups(m);
    std::array<std::vector<T>*, 8> gs = {&g.conv1_w, &g.conv1_b, &g.conv2_w, &g.conv2_b,
                                         &g.fc1_w,   &g.fc1_b,   &g.fc2_w,   &g.fc2_b};
    for (int i = 0; i < 8; ++i) gs[i]->assign(ps[i]->size(), T(0));
    return g;
}

/// Argmax with ties broken toward the lowest class index.
template <class T>
int argmax_row(const T* row, int n) {
    int best = 0;
    for (int k = 1; k < n; ++k) {
        if (row[k] > row[best]) best = k;
    }
    return best;
}

template <class T>
LossGrads<T> loss_and_grads(const CnnModel<T>& m, const Tensor4<T>& x, std::span<const int> labels) {
    LossGrads<T> out;
    out.grads = make_zero_grads(m);
    ForwardCache<T> cache;
    forward(m, x, &cache);
    const int nc = m.config.n_classes;

    std::vector<T> dlogits;
    out.loss = softmax_cross_entropy(cache.logits, x.n, nc, labels, &dlogits);
    for (int n = 0; n < x.n; ++n) {
        if (argmax_row(cache.logits.data() + static_cast<std::size_t>(n) * nc, nc) == labels[n]) {
            ++out.correct;
        }
    }

    std::vector<T> h = cache.fc1_pre;
    relu_inplace(h);
    std::vector<T> dh = fc_backward(h, x.n, m.fc2, dlogits, out.grads.fc2_w, out.grads.fc2_b);
    for (std::size_t i = 0; i < dh.size(); ++i) {
        if (cache.fc1_pre[i] <= T(0)) dh[i] = T(0);
    }
    std::vector<T> dflat = fc_backward(cache.pool2.out.v, x.n, m.fc1, dh, out.grads.fc1_w, out.grads.fc1_b);

    Tensor4<T> dpool2 = cache.pool2.out;
    dpool2.v = std::move(dflat);
    Tensor4<T> da2 = maxpool_backward(dpool2, cache.pool2.argmax, x.n, m.config.conv2_filters,
                                      m.dims.conv2_h, m.dims.conv2_w);
    for (std::size_t i = 0; i < da2.size(); ++i) {
        if (cache.conv2_pre.v[i] <= T(0)) da2.v[i] = T(0);
    }
    Tensor4<T> dpool1 = conv2d_backward(cache.pool1.out, m.conv2, da2, out.grads.conv2_w, out.grads.conv2_b);

    Tensor4<T> da1 = maxpool_backward(dpool1, cache.pool1.argmax, x.n, m.config.conv1_filters,
                                      m.dims.conv1_h, m.dims.conv1_w);
    for (std::size_t i = 0; i < da1.size(); ++i) {
        if (cache.conv1_pre.v[i] <= T(0)) da1.v[i] = T(0);
    }
    conv2d_backward(x, m.conv1, da1, out.grads.conv1_w, out.grads.conv1_b);
    return out;
}

template <class T>
double loss_only(const CnnModel<T>& m, const Tensor4<T>& x, std::span<const int> labels) {
    std::vector<T> logits = forward(m, x);
    return softmax_cross_entropy<T>(logits, x.n, m.config.n_classes, labels, nullptr);
}

template <class T>
void sgd_step(CnnModel<T>& m, const Grads<T>& g, double lr) {
    auto ps = param_groups(m);
    auto gs = grad_groups(g);
    for (int i = 0; i < 8; ++i) {
        auto& p = *ps[i];
        const auto& gr = *gs[i];
        if (p.size() != gr.size()) throw ShapeError("gradient shape mismatch");
        for (std::size_t j = 0; j < p.size(); ++j) {
            p[j] -= static_cast<T>(lr * gr[j]);
        }
    }
}

template <class T>
std::vector<int> predict(const CnnModel<T>& m, const Tensor4<T>& x) {
    std::vector<T> logits = forward(m, x);
    std::vector<int> out(x.n);
    for (int n = 0; n < x.n; ++n) {
        out[n] = argmax_row(logits.data() + static_cast<std::size_t>(n) * m.config.n_classes,
                            m.config.n_classes);
    }
    return out;
}

/// Checkpoint format: one JSON header line, then raw little-endian float32
/// parameters in the canonical group order.
void save_checkpoint(const CnnModel<float>& m, const std::filesystem::path& path, int epoch);

struct Checkpoint {
    CnnModel<float> model;
    int epoch = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace amvcast::nn
