#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cresmd/tensor.hpp"

namespace cresmd {

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kOpTolerance = 1e-4;
inline constexpr double kModelTolerance = 1e-3;

// Builds a scalar loss from the current values of the checked inputs.
using LossBuilder = std::function<Tensor<double>(Tape<double>&)>;

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t entries = 0;
  // Entries that were retried with a shorter step.
  std::size_t kinks = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

// |a - n| / max(|a|, |n|, floor), where a is the analytic and n the central
// difference derivative.
double relative_error(double analytic, double numeric, double floor = 1e-7);

// Compares the tape gradient of `loss` with central differences for every
// entry of every tensor in `inputs`. Inputs are perturbed in place and
// restored afterwards. Entries not clearly within tolerance at `step` are
// retried at step/10, step/100 and step/1000, keeping the smallest error. The error floor is 1e-6 of the largest gradient entry.
GradCheckResult check_gradients(const std::string& name, const LossBuilder& loss,
                                std::vector<Tensor<double>> inputs, double tolerance,
                                double step = kGradCheckStep);

// Every differentiable op, then a C=8, B=2, G=2 model on a 16x16 input.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed);

}  // namespace cresmd
