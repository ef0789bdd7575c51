#pragma once

// Finite-difference suites over every loss, the encoders and the decoders.
// Backs the `gradcheck` command.

#include <cstdint>
#include <string>
#include <vector>

#include "hse/tensor.hpp"

namespace hse::gradcheck {

struct SuiteResult {
    std::string name;
    std::size_t trials = 0;
    std::size_t coordinates = 0;
    std::size_t kinks = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
};

/// Runs each suite `trials` times on small random instances drawn from `seed`
/// (dims 2..4, batch 2..4, sequences of 1..4 steps).
///
/// Suites: the five embedding-level losses, loss_reconstruct through the
/// decoders, the hierarchical encoders, and total_loss with tau = 0 through
/// the whole model. Reconstruction targets are detached in training, so the
/// decoder suite holds them fixed.
std::vector<SuiteResult> run_suites(std::uint64_t seed, std::size_t trials,
                                    const tk::GradCheckOptions& options = {});

}  // namespace hse::gradcheck
