#include "amvcast/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "amvcast/nn.hpp"
#include "amvcast/rng.hpp"

namespace amvcast::nn {

namespace {

constexpr double kEps = 1e-4;
constexpr double kDeadZone = 1e-7;
constexpr int kPerGroup = 20;

double rel_err(double analytic, double numeric) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale < kDeadZone) return 0.0;
    return std::abs(analytic - numeric) / scale;
}

/// Loss plus the linear region the forward pass landed in: ReLU signs and
/// pooling argmax choices. With every other parameter held fixed each
/// preactivation is affine in the probed one as long as the upstream
/// pattern is unchanged, so matching regions at both endpoints certify the
/// whole segment between them is smooth.
struct ProbeEval {
    double loss = 0.0;
    std::vector<std::uint8_t> relu_signs;
    std::vector<std::int64_t> argmax;
};

ProbeEval eval_probe(const CnnModel<double>& model, const Tensor4<double>& x,
                     std::span<const int> labels) {
    ForwardCache<double> cache;
    forward(model, x, &cache);
    ProbeEval e;
    e.loss = softmax_cross_entropy<double>(cache.logits, x.n, model.config.n_classes, labels,
                                           nullptr);
    e.relu_signs.reserve(cache.conv1_pre.size() + cache.conv2_pre.size() + cache.fc1_pre.size());
    for (double v : cache.conv1_pre.v) e.relu_signs.push_back(v > 0.0 ? 1 : 0);
    for (double v : cache.conv2_pre.v) e.relu_signs.push_back(v > 0.0 ? 1 : 0);
    for (double v : cache.fc1_pre) e.relu_signs.push_back(v > 0.0 ? 1 : 0);
    e.argmax = cache.pool1.argmax;
    e.argmax.insert(e.argmax.end(), cache.pool2.argmax.begin(), cache.pool2.argmax.end());
    return e;
}

bool same_region(const ProbeEval& a, const ProbeEval& b) {
    return a.relu_signs == b.relu_signs && a.argmax == b.argmax;
}

}  // namespace

GradCheckReport run_gradient_check(std::uint64_t seed, bool corrupt_backward) {
    CnnConfig cfg;
    cfg.conv1_filters = 4;
    cfg.conv1_kh = 2;
    cfg.conv1_kw = 3;
    cfg.pool1_h = 2;
    cfg.pool1_w = 2;
    cfg.conv2_filters = 6;
    cfg.conv2_kh = 3;
    cfg.conv2_kw = 3;
    cfg.pool2_h = 1;
    cfg.pool2_w = 1;
    cfg.hidden = 8;

    CnnModel<double> model = make_model<double>(cfg, 3, 8, 9, mix_seed({seed, 0x6d6f64}));

    Rng rng(mix_seed({seed, 0x64617461}));
    Tensor4<double> x(4, 3, 8, 9);
    for (auto& v : x.v) v = rng.normal();
    const std::vector<int> labels = {0, 1, 2, 0};

    LossGrads<double> lg = loss_and_grads<double>(model, x, labels);
    if (corrupt_backward) {
        for (double& g : lg.grads.conv2_w) g += 0.5;
    }

    auto params = param_groups(model);
    auto grads = grad_groups(lg.grads);

    GradCheckReport report;
    Rng pick(mix_seed({seed, 0x7069636b}));
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        std::vector<double>& p = *params[gi];
        const std::vector<double>& g = *grads[gi];
        std::vector<std::size_t> idx(p.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        pick.shuffle(idx);

        GroupCheckResult gr;
        gr.group = kParamGroupNames[gi];
        for (std::size_t k = 0; k < idx.size() && gr.n_checked < kPerGroup; ++k) {
            const std::size_t j = idx[k];
            const double keep = p[j];
            p[j] = keep + kEps;
            const ProbeEval up = eval_probe(model, x, labels);
            p[j] = keep - kEps;
            const ProbeEval down = eval_probe(model, x, labels);
            p[j] = keep;
            if (!same_region(up, down)) {
                // The probe straddles a ReLU or pooling kink; the central
                // difference there does not estimate any derivative.
                ++gr.n_skipped;
                continue;
            }
            const double numeric = (up.loss - down.loss) / (2.0 * kEps);
            gr.max_rel_err = std::max(gr.max_rel_err, rel_err(g[j], numeric));
            ++gr.n_checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, gr.max_rel_err);
        report.groups.push_back(std::move(gr));
    }
    return report;
}

}  // namespace amvcast::nn
