#include "amvcast/baseline.hpp"

#include <string>

#include "amvcast/errors.hpp"

namespace amvcast {

ClassScores score_predictions(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw DataError("prediction/truth size mismatch");
    if (truth.empty()) throw DataError("cannot score an empty prediction set");
    ClassScores s;
    std::array<int, kNumClasses> hits{};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        const int p = predicted[i];
        if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) {
            throw DataError("class index out of range at position " + std::to_string(i));
        }
        ++s.n[t];
        if (p == t) ++hits[t];
    }
    int correct = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        correct += hits[c];
        s.accuracy[c] = s.n[c] > 0 ? static_cast<double>(hits[c]) / s.n[c] : 0.0;
    }
    s.n_total = static_cast<int>(truth.size());
    s.overall = static_cast<double>(correct) / s.n_total;
    return s;
}

ClassScores persistence_forecast(const std::vector<std::vector<AmvClass>>& labels, int lead) {
    if (lead < 0) throw DataError("lead must be non-negative");
    if (labels.empty()) throw DataError("no label records");
    std::vector<int> pred, truth;
    for (const auto& rec : labels) {
        const int t = static_cast<int>(rec.size());
        for (int y = 0; y + lead < t; ++y) {
            pred.push_back(static_cast<int>(rec[y]));
            truth.push_back(static_cast<int>(rec[y + lead]));
        }
    }
    if (truth.empty()) throw DataError("lead exceeds every record length");
    return score_predictions(pred, truth);
}

ClassScores persistence_forecast(const std::vector<std::vector<AmvClass>>& labels, int lead,
                                 std::span<const Sample> pool) {
    if (pool.empty()) throw DataError("empty sample pool");
    std::vector<int> pred, truth;
    pred.reserve(pool.size());
    truth.reserve(pool.size());
    for (const Sample& s : pool) {
        if (s.lead != lead) throw DataError("sample lead does not match requested lead");
        if (s.member_idx < 0 || s.member_idx >= static_cast<int>(labels.size())) {
            throw DataError("sample member out of range");
        }
        const auto& rec = labels[s.member_idx];
        if (s.year_idx < 0 || s.year_idx >= static_cast<int>(rec.size())) {
            throw DataError("sample year out of range");
        }
        pred.push_back(static_cast<int>(rec[s.year_idx]));
        truth.push_back(static_cast<int>(s.label));
    }
    return score_predictions(pred, truth);
}

ClassScores chance_baseline() {
    ClassScores s;
    s.accuracy = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    s.overall = 1.0 / 3.0;
    return s;
}

}  // namespace amvcast
