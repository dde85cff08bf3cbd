#include "cresmd/eval.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cresmd/error.hpp"
#include "cresmd/rng.hpp"
#include "cresmd/synthesis.hpp"

namespace cresmd {
namespace {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

double mean_abs_difference(const Image& a, const Image& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
  return acc / static_cast<double>(a.data.size());
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "blur_r,noise_sigma,jpeg_q,psnr,baseline_psnr,distance\n";
  for (const auto& row : rows) {
    out << format_number(row.spec.blur_r) << ',' << format_number(row.spec.noise_sigma) << ','
        << (row.spec.jpeg_quality ? std::to_string(*row.spec.jpeg_quality) : "none") << ','
        << format_number(row.psnr) << ',' << (row.baseline_psnr ? format_number(*row.baseline_psnr) : "") << ','
        << (row.distance ? format_number(*row.distance) : "") << '\n';
  }
  return out.str();
}

void EvalReport::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv();
  if (!out) throw IoError("failed writing " + path.string());
}

std::uint64_t eval_seed(const DegradationSpec& spec, std::size_t index) {
  std::uint64_t h = mix64(std::bit_cast<std::uint64_t>(spec.blur_r));
  h = mix64(h ^ std::bit_cast<std::uint64_t>(spec.noise_sigma));
  h = mix64(h ^ static_cast<std::uint64_t>(spec.jpeg_quality.value_or(-1) + 1000));
  return mix64(h ^ static_cast<std::uint64_t>(index));
}

EvalReport evaluate(const CResMDModel<float>& model, std::span<const Image> dataset,
                    std::span<const DegradationSpec> specs, std::span<const Baseline> baselines) {
  if (dataset.empty()) throw RangeError("evaluation dataset is empty");
  const DegradationSpace& space = model.space();
  EvalReport report;
  for (const auto& spec : specs) {
    space.validate(spec);
    const auto z = space.encode(spec);
    const Baseline* baseline = nullptr;
    for (const auto& b : baselines) {
      if (b.spec == spec) baseline = &b;
    }

    EvalRow row;
    row.spec = spec;
    double restored_sum = 0.0, degraded_sum = 0.0, baseline_sum = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      Rng rng(eval_seed(spec, i));
      const Image degraded = degrade(dataset[i], spec, rng);
      degraded_sum += psnr(degraded, dataset[i]);
      restored_sum += psnr(restore_image(model, degraded, z), dataset[i]);
      if (baseline) baseline_sum += psnr(restore_image(baseline->model, degraded, z), dataset[i]);
    }
    const double n = static_cast<double>(dataset.size());
    row.psnr = restored_sum / n;
    row.degraded_psnr = degraded_sum / n;
    if (baseline) {
      row.baseline_psnr = baseline_sum / n;
      // Two identities (+inf each) are at distance 0, not NaN.
      row.distance = *row.baseline_psnr == row.psnr ? 0.0 : *row.baseline_psnr - row.psnr;
    }
    report.rows.push_back(row);
  }
  return report;
}

std::vector<SweepPoint> modulation_sweep(const CResMDModel<float>& model, const Image& degraded,
                                         std::size_t dim, int steps, const std::vector<double>& fixed_z,
                                         const std::optional<Image>& clean) {
  if (steps < 2) throw RangeError("sweep needs at least 2 steps, got " + std::to_string(steps));
  if (fixed_z.size() != static_cast<std::size_t>(model.arch().condition_dim)) {
    throw ShapeError("condition vector must have " + std::to_string(model.arch().condition_dim) +
                     " entries, got " + std::to_string(fixed_z.size()));
  }
  if (dim >= fixed_z.size()) {
    throw RangeError("sweep dimension " + std::to_string(dim) + " out of range [0, " +
                     std::to_string(fixed_z.size() - 1) + "]");
  }
  if (clean && !clean->same_dims(degraded)) throw ShapeError("clean and degraded images differ in size");

  std::vector<SweepPoint> points;
  for (int k = 0; k < steps; ++k) {
    SweepPoint p;
    p.z = fixed_z;
    p.z[dim] = static_cast<double>(k) / (steps - 1);
    p.restored = restore_image(model, degraded, p.z);
    if (clean) p.psnr = psnr(p.restored, *clean);
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<GlobalScalePoint> global_alpha_sweep(const CResMDModel<float>& model, const Image& degraded,
                                                 const std::vector<double>& z, int steps) {
  if (steps < 2) throw RangeError("sweep needs at least 2 steps, got " + std::to_string(steps));
  std::vector<GlobalScalePoint> points;
  for (int k = 0; k < steps; ++k) {
    const double m = static_cast<double>(k) / (steps - 1);
    const Image out = restore_image(model, degraded, z, ForwardOptions{m});
    points.push_back({m, mean_abs_difference(out, degraded)});
  }
  return points;
}

}  // namespace cresmd
