#include "cresmd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cresmd/model.hpp"
#include "cresmd/ops.hpp"
#include "cresmd/rng.hpp"

namespace cresmd {
namespace {

using D = double;

Tensor<D> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  auto t = Tensor<D>::zeros(std::move(shape));
  for (D& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

// Values with |v| >= margin, so a step of kGradCheckStep never crosses zero.
Tensor<D> away_from_zero(Rng& rng, Shape shape, double margin) {
  auto t = random_tensor(rng, std::move(shape));
  for (D& v : t.data()) {
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
  }
  return t;
}

// sum(y * r) with fixed random r, so every output entry gets its own weight.
Tensor<D> weighted_sum(Tape<D>& tape, const Tensor<D>& y, const Tensor<D>& weights) {
  return ops::sum(tape, ops::mul(tape, y, weights));
}

D loss_value(const LossBuilder& loss) {
  Tape<D> tape(Tape<D>::Mode::kInference);
  return loss(tape).item();
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult check_gradients(const std::string& name, const LossBuilder& loss,
                                std::vector<Tensor<double>> inputs, double tolerance, double step) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape<D> tape;
    tape.backward(loss(tape));
  }
  // Round-off in the loss limits how small a derivative can be resolved, so
  // the relative error floor follows the largest gradient entry.
  double largest = 0.0;
  for (const auto& t : inputs) {
    for (D g : t.grad()) largest = std::max(largest, std::abs(g));
  }
  const double floor = std::max(1e-7, 1e-6 * largest);

  GradCheckResult result{name, 0.0, tolerance, 0, 0};
  for (auto& t : inputs) {
    const std::vector<D> analytic(t.grad().begin(), t.grad().end());
    auto values = t.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const D saved = values[i];
      const auto central = [&](double h) {
        values[i] = saved + h;
        const D plus = loss_value(loss);
        values[i] = saved - h;
        const D minus = loss_value(loss);
        values[i] = saved;
        return relative_error(analytic[i], (plus - minus) / (2 * h), floor);
      };
      double error = central(step);
      if (error >= tolerance / 10) {
        // A ReLU input within `step` of zero flips sign inside the stencil.
        // Shorter steps no longer reach it, while a wrong gradient stays
        // wrong at every step.
        bool resolved = false;
        for (double h : {step / 10, step / 100, step / 1000}) {
          const double retry = central(h);
          if (retry < error) {
            error = retry;
            resolved = error < tolerance;
          }
        }
        if (resolved) ++result.kinks;
      }
      result.max_rel_error = std::max(result.max_rel_error, error);
      ++result.entries;
    }
    t.clear_grad();
    t.set_requires_grad(false);
  }
  return result;
}

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckResult> results;
  const auto op = [&](const std::string& name, const LossBuilder& loss, std::vector<Tensor<D>> inputs) {
    results.push_back(check_gradients(name, loss, std::move(inputs), kOpTolerance));
  };

  {
    auto x = random_tensor(rng, {3, 7, 6});
    auto w = random_tensor(rng, {4, 3, 3, 3});
    auto b = random_tensor(rng, {4});
    auto r1 = random_tensor(rng, {4, 7, 6});
    op("conv2d stride 1 pad 1",
       [=](Tape<D>& t) { return weighted_sum(t, ops::conv2d(t, x, w, b, {1, 1}), r1); }, {x, w, b});
    auto r2 = random_tensor(rng, {4, 4, 3});
    op("conv2d stride 2 pad 1",
       [=](Tape<D>& t) { return weighted_sum(t, ops::conv2d(t, x, w, b, {2, 1}), r2); }, {x, w, b});
    auto r3 = random_tensor(rng, {4, 5, 4});
    op("conv2d no bias pad 0",
       [=](Tape<D>& t) { return weighted_sum(t, ops::conv2d(t, x, w, Tensor<D>(), {1, 0}), r3); }, {x, w});
  }
  {
    auto x = away_from_zero(rng, {2, 4, 5}, 1e-3);
    auto r = random_tensor(rng, {2, 4, 5});
    op("relu", [=](Tape<D>& t) { return weighted_sum(t, ops::relu(t, x), r); }, {x});
  }
  {
    auto x = random_tensor(rng, {3, 4, 4});
    auto alpha = random_tensor(rng, {3});
    auto r = random_tensor(rng, {3, 4, 4});
    op("scale_channels", [=](Tape<D>& t) { return weighted_sum(t, ops::scale_channels(t, x, alpha), r); },
       {x, alpha});
  }
  {
    auto x = random_tensor(rng, {2, 3, 3});
    auto y = random_tensor(rng, {2, 3, 3});
    auto r = random_tensor(rng, {2, 3, 3});
    op("add", [=](Tape<D>& t) { return weighted_sum(t, ops::add(t, x, y), r); }, {x, y});
    op("mul", [=](Tape<D>& t) { return weighted_sum(t, ops::mul(t, x, y), r); }, {x, y});
    op("add fan-out", [=](Tape<D>& t) { return weighted_sum(t, ops::mul(t, ops::add(t, x, x), x), r); }, {x});
  }
  {
    auto x = random_tensor(rng, {8, 3, 2});
    auto r = random_tensor(rng, {2, 6, 4});
    op("pixel_shuffle", [=](Tape<D>& t) { return weighted_sum(t, ops::pixel_shuffle(t, x, 2), r); }, {x});
    auto y = random_tensor(rng, {2, 6, 4});
    auto s = random_tensor(rng, {8, 3, 2});
    op("pixel_unshuffle", [=](Tape<D>& t) { return weighted_sum(t, ops::pixel_unshuffle(t, y, 2), s); },
       {y});
  }
  {
    auto z = random_tensor(rng, {3});
    auto w = random_tensor(rng, {5, 3});
    auto r = random_tensor(rng, {5});
    op("linear_nobias", [=](Tape<D>& t) { return weighted_sum(t, ops::linear_nobias(t, z, w), r); }, {z, w});
  }
  {
    auto pred = random_tensor(rng, {2, 3, 4});
    auto target = pred.clone();
    // Keep every difference at least 1e-3 away from the kink at 0.
    auto offsets = away_from_zero(rng, {2, 3, 4}, 1e-3);
    for (std::size_t i = 0; i < target.numel(); ++i) target.data()[i] += offsets.data()[i];
    op("l1_loss", [=](Tape<D>& t) { return ops::l1_loss(t, pred, target); }, {pred, target});
  }
  {
    auto x = random_tensor(rng, {2, 2, 3});
    op("sum", [=](Tape<D>& t) { return ops::sum(t, x); }, {x});
  }

  {
    ArchConfig arch;
    arch.channels = 8;
    arch.blocks = 2;
    arch.groups = 2;
    arch.image_channels = 3;
    arch.condition_dim = 2;
    CResMDModel<D> model(arch, DegradationSpace::desk_2d(), ModelKind::kConditional, rng.fork_seed());
    // Non-zero biases exercise the bias gradients through every layer.
    for (auto& p : model.named_parameters()) {
      if (p.name.ends_with(".bias")) {
        for (D& v : p.tensor.data()) v = 0.1 * (2 * rng.uniform() - 1);
      }
    }
    auto x = random_tensor(rng, {3, 16, 16}, 0.0, 1.0);
    auto z = random_tensor(rng, {2}, 0.2, 0.9);
    auto r = random_tensor(rng, {3, 16, 16});
    auto inputs = model.parameters();
    inputs.push_back(z);
    results.push_back(check_gradients(
        "model C=8 B=2 G=2 16x16",
        [&model, x, z, r](Tape<D>& t) { return weighted_sum(t, model_forward(t, model, x, z), r); },
        std::move(inputs), kModelTolerance));
  }
  return results;
}

}  // namespace cresmd
