#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace amvcast::nn {

struct GroupCheckResult {
    std::string group;
    int n_checked = 0;
    int n_skipped = 0;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GroupCheckResult> groups;
    double max_rel_err = 0.0;

    bool passed(double tol = 1e-3) const { return max_rel_err < tol; }
};

/// Compares analytic gradients against central finite differences on a small
/// double-precision network (random input batch, fixed labels). Per group up
/// to 20 randomly chosen parameters are perturbed with eps = 1e-4; relative
/// error uses max(|analytic|, |numeric|) as denominator and counts as zero
/// when both magnitudes sit below 1e-7. Probes whose +/-eps endpoints land
/// in different linear regions of the network (a ReLU sign or a pooling
/// argmax flips) are discarded and replaced, since a difference quotient
/// across a kink does not estimate any derivative. `corrupt_backward`
/// injects a bias into one weight gradient so the harness itself can be
/// tested.
GradCheckReport run_gradient_check(std::uint64_t seed, bool corrupt_backward = false);

}  // namespace amvcast::nn
