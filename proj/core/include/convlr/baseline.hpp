#pragma once

#include <span>
#include <vector>

#include "convlr/image.hpp"
#include "convlr/kspace.hpp"

namespace convlr {

enum class StepRule { fixed, backtracking };

struct GraspConfig {
    double lambda = 0.02;  // temporal TV weight
    std::size_t n_iter = 60;
    StepRule step_rule = StepRule::backtracking;
    double backtrack_factor = 0.5;
    std::size_t max_backtracks = 40;

    void validate() const;
};

struct GraspResult {
    std::vector<ComplexImage> frames;
    std::vector<double> objective;  // objective[0] at the initial iterate, then one entry per iteration
    std::vector<double> step_sizes;
    std::size_t rejected_steps = 0;
};

/// sum_t ||E_t x_t - y_t||^2 + lambda sum_t ||x_{t+1} - x_t||_1
double grasp_objective(std::span<const NudftOperator> ops, std::span<const KSpaceData> y,
                       std::span<const ComplexImage> x, double lambda);

/// Proximal-gradient reconstruction with temporal total variation.
GraspResult grasp_reconstruct(std::span<const KSpaceData> y_frames, std::size_t width, std::size_t height,
                              const GraspConfig& cfg);

/// Soft-thresholds each temporal difference x_{t+1} - x_t by `threshold` in
/// complex magnitude, keeping its phase, and rebuilds the frames around
/// each pair's midpoint.
std::vector<ComplexImage> temporal_tv_prox(const std::vector<ComplexImage>& x, double threshold);

}  // namespace convlr
