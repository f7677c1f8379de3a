#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "amvcast/nn.hpp"

namespace amvcast::nn {

struct TrainConfig {
    int max_epochs = 20;
    int patience = 3;  // consecutive validation-loss increases before stopping
    int batch_size = 32;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;  // drives the per-epoch shuffles

    void validate() const;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

/// Stop once the validation loss has risen for `patience` consecutive
/// epochs; equal or lower readings reset the run. Tracks the best epoch so
/// the caller can restore its parameters.
class EarlyStopper {
  public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    /// Feeds one epoch's validation loss; true means stop now.
    bool update(double val_loss) {
        ++epoch_;
        if (val_loss < best_loss_) {
            best_loss_ = val_loss;
            best_epoch_ = epoch_;
        }
        rising_ = val_loss > prev_ ? rising_ + 1 : 0;
        prev_ = val_loss;
        return rising_ >= patience_;
    }

    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

  private:
    int patience_;
    int epoch_ = 0;
    int rising_ = 0;
    int best_epoch_ = 0;
    double prev_ = std::numeric_limits<double>::infinity();
    double best_loss_ = std::numeric_limits<double>::infinity();
};

struct TrainResult {
    CnnModel<float> model;  // parameters from the best-validation epoch
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

struct EvalStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Loss/accuracy over a dataset, run in batches to bound memory.
EvalStats evaluate(const CnnModel<float>& m, const Tensor4<float>& x,
                   const std::vector<int>& y, int batch_size = 32);

/// Mini-batch SGD with a fresh shuffle each epoch. Stops early after
/// `patience` consecutive epochs of rising validation loss and returns the
/// parameters from the epoch whose validation loss was lowest.
TrainResult train(CnnModel<float> model, const Tensor4<float>& x_train,
                  const std::vector<int>& y_train, const Tensor4<float>& x_val,
                  const std::vector<int>& y_val, const TrainConfig& cfg);

/// Gathers rows of x at the given sample indices into a new batch tensor.
Tensor4<float> gather_rows(const Tensor4<float>& x, const std::vector<int>& order,
                           int begin, int end);

}  // namespace amvcast::nn
