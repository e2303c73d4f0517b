#pragma once

// Central finite-difference verification of every analytic gradient in the
// forecaster: each layer in isolation and each model wiring end to end.

#include "hybridcast/numcore.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hybridcast::neural {

struct BlockCheck {
    std::string block;
    double max_rel_error = 0.0;
    Index entries = 0;
    bool passed = false;
};

struct GradCheckReport {
    std::vector<BlockCheck> blocks;
    double tolerance = 1e-4;

    bool passed() const;
    std::vector<std::string> failed_blocks() const;
};

struct GradCheckOptions {
    std::uint64_t seed = 1234;
    double step = 1e-5;
    double tolerance = 1e-4;
    // Test hook: the analytic gradient of this block is scaled by 1.1 before
    // comparison, which must make the check fail.
    std::string corrupt_block;
};

// |a - n| / max(|a|, |n|, 1e-7). The floor keeps entries whose true value is
// zero from dividing round-off by round-off.
double relative_error(double analytic, double numeric);

// Central differences of `loss` with respect to every entry of `values`,
// restoring each entry afterwards.
std::vector<double> numeric_gradient(std::span<double> values, const std::function<double()>& loss,
                                     double step);

GradCheckReport run_gradient_checks(const GradCheckOptions& options = {});

}  // namespace hybridcast::neural
