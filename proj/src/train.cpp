#include "amvcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

namespace amvcast::nn {

void TrainConfig::validate() const {
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be positive and finite");
    }
}

Tensor4<float> gather_rows(const Tensor4<float>& x, const std::vector<int>& order,
                           int begin, int end) {
    if (begin < 0 || end > static_cast<int>(order.size()) || begin >= end) {
        throw ShapeError("bad batch range");
    }
    Tensor4<float> out(end - begin, x.c, x.h, x.w);
    const std::size_t row = static_cast<std::size_t>(x.c) * x.h * x.w;
    for (int i = begin; i < end; ++i) {
        std::memcpy(out.v.data() + static_cast<std::size_t>(i - begin) * row,
                    x.v.data() + static_cast<std::size_t>(order[i]) * row, row * sizeof(float));
    }
    return out;
}

EvalStats evaluate(const CnnModel<float>& m, const Tensor4<float>& x,
                   const std::vector<int>& y, int batch_size) {
    if (x.n < 1 || static_cast<std::size_t>(x.n) != y.size()) {
        throw DataError("evaluation set empty or label count mismatch");
    }
    std::vector<int> idx(y.size());
    std::iota(idx.begin(), idx.end(), 0);
    double loss_sum = 0.0;
    int correct = 0;
    for (int b = 0; b < x.n; b += batch_size) {
        const int e = std::min(b + batch_size, x.n);
        Tensor4<float> xb = gather_rows(x, idx, b, e);
        std::vector<float> logits = forward(m, xb);
        std::vector<int> yb(y.begin() + b, y.begin() + e);
        loss_sum += softmax_cross_entropy<float>(logits, xb.n, m.config.n_classes, yb, nullptr) * xb.n;
        for (int n = 0; n < xb.n; ++n) {
            if (argmax_row(logits.data() + static_cast<std::size_t>(n) * m.config.n_classes,
                           m.config.n_classes) == yb[n]) {
                ++correct;
            }
        }
    }
    return {loss_sum / x.n, static_cast<double>(correct) / x.n};
}

TrainResult train(CnnModel<float> model, const Tensor4<float>& x_train,
                  const std::vector<int>& y_train, const Tensor4<float>& x_val,
                  const std::vector<int>& y_val, const TrainConfig& cfg) {
    cfg.validate();
    if (x_train.n < 1 || static_cast<std::size_t>(x_train.n) != y_train.size()) {
        throw DataError("training set empty or label count mismatch");
    }
    if (x_val.n < 1 || static_cast<std::size_t>(x_val.n) != y_val.size()) {
        throw DataError("validation set empty or label count mismatch");
    }

    TrainResult res;
    res.best_val_loss = std::numeric_limits<double>::infinity();
    Rng rng(cfg.seed);
    std::vector<int> order(y_train.size());
    std::iota(order.begin(), order.end(), 0);

    EarlyStopper stopper(cfg.patience);
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        int correct = 0;
        for (int b = 0; b < x_train.n; b += cfg.batch_size) {
            const int e = std::min(b + cfg.batch_size, x_train.n);
            Tensor4<float> xb = gather_rows(x_train, order, b, e);
            std::vector<int> yb(e - b);
            for (int i = b; i < e; ++i) yb[i - b] = y_train[order[i]];
            LossGrads<float> lg = loss_and_grads<float>(model, xb, yb);
            sgd_step(model, lg.grads, cfg.learning_rate);
            loss_sum += lg.loss * xb.n;
            correct += lg.correct;
        }
        EvalStats val = evaluate(model, x_val, y_val, cfg.batch_size);
        EpochStats st;
        st.epoch = epoch;
        st.train_loss = loss_sum / x_train.n;
        st.train_accuracy = static_cast<double>(correct) / x_train.n;
        st.val_loss = val.loss;
        st.val_accuracy = val.accuracy;
        res.history.push_back(st);
        if (!std::isfinite(st.train_loss) || !std::isfinite(st.val_loss)) {
            throw NumericError("training diverged to a non-finite loss");
        }

        if (val.loss < res.best_val_loss) {
            res.best_val_loss = val.loss;
            res.best_epoch = epoch;
            res.model = model;
        }
        if (stopper.update(val.loss)) break;
    }
    return res;
}

}  // namespace amvcast::nn
