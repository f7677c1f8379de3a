#pragma once

#include <array>
#include <span>
#include <vector>

#include "amvcast/amv.hpp"

namespace amvcast {

/// Per-class recall plus overall accuracy for a batch of predictions.
struct ClassScores {
    std::array<double, kNumClasses> accuracy{};  // classes absent from truth score 0 with n 0
    std::array<int, kNumClasses> n{};
    double overall = 0.0;
    int n_total = 0;
};

ClassScores score_predictions(std::span<const int> predicted, std::span<const int> truth);

/// Persistence: forecast the state at t+lead to equal the state at t.
/// The record overload scores every (member, year) pair with y + lead in
/// range; the pool overload scores exactly the given samples, so it can be
/// evaluated on the same balanced test set as a trained model.
ClassScores persistence_forecast(const std::vector<std::vector<AmvClass>>& labels, int lead);
ClassScores persistence_forecast(const std::vector<std::vector<AmvClass>>& labels, int lead,
                                 std::span<const Sample> pool);

/// Uniform random guessing scores 1/3 on every class in expectation; the
/// returned row is that analytic constant, not a sampled draw.
ClassScores chance_baseline();

}  // namespace amvcast
