#pragma once

#include <string>
#include <vector>

#include "convlr/autodiff.hpp"

namespace convlr {

struct GradCheckCase {
    std::string name;
    ad::GradCheckResult result;
    bool passed = false;
};

/// Central-difference checks over every primitive op and every composed
/// block (encoder, Conv-LSTM cell, deconv head, DC layer, RNN block,
/// initializer, discriminator, losses). With `sabotage`, a deliberately
/// wrong backward pass is appended so the harness can prove it fails.
std::vector<GradCheckCase> run_gradcheck_suite(double tolerance = 1e-4, double eps = 1e-5, bool sabotage = false);

/// A sigmoid whose backward pass is off by 10 percent.
ad::Tensor sabotaged_sigmoid(const ad::Tensor& x);

}  // namespace convlr
