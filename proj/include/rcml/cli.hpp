#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>

#include "rcml/grad_check.hpp"

namespace rcml {

struct GradcheckOptions {
    std::size_t width = 8;
    std::size_t batch = 4;
    double beta = 0.6;
    double step = 1e-5;
    std::uint64_t seed = 42;
    bool inject_fault = false;
};

/// Finite-difference check of the full loss (all four terms) on a small
/// random model and batch.
GradCheckReport run_gradcheck(const GradcheckOptions& options);

struct ClipCheckResult {
    bool passed = false;
    std::size_t batches = 0;
    double max_hard_gap = 0.0;  // hard beta = 1 versus the reference loss
    double min_soft_gap = 0.0;  // soft beta = 1 versus the reference loss
};

/// Compares the relation-conditioned loss in its CLIP configuration with an
/// independently written pairwise image-text InfoNCE.
ClipCheckResult run_clip_check(std::uint64_t seed, std::size_t batches = 20, double tolerance = 1e-12);

/// Entry point of the `rcml` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rcml
