#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cresmd/degradation.hpp"
#include "cresmd/image.hpp"
#include "cresmd/model.hpp"

namespace cresmd {

struct EvalRow {
  DegradationSpec spec;
  double psnr = 0.0;           // mean over images, restored vs clean
  double degraded_psnr = 0.0;  // mean over images, degraded input vs clean
  std::optional<double> baseline_psnr;
  // baseline_psnr - psnr; lower is better.
  std::optional<double> distance;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  // Header: blur_r,noise_sigma,jpeg_q,psnr,baseline_psnr,distance
  std::string to_csv() const;
  void save_csv(const std::filesystem::path& path) const;
};

// An upper-bound model trained on exactly `spec`.
struct Baseline {
  DegradationSpec spec;
  CResMDModel<float> model;
};

// Seed used to degrade image `index` at `spec`; independent of the model.
std::uint64_t eval_seed(const DegradationSpec& spec, std::size_t index);

// For each spec: degrade every image, restore at z = encode(spec) and
// average the PSNR. A baseline whose spec matches a row is run on the same
// degraded inputs.
EvalReport evaluate(const CResMDModel<float>& model, std::span<const Image> dataset,
                    std::span<const DegradationSpec> specs, std::span<const Baseline> baselines = {});

struct SweepPoint {
  std::vector<double> z;
  Image restored;
  std::optional<double> psnr;  // vs clean, when given
};

// Varies z[dim] over k/(steps-1), k = 0..steps-1, holding the other entries
// of `fixed_z` constant.
std::vector<SweepPoint> modulation_sweep(const CResMDModel<float>& model, const Image& degraded,
                                         std::size_t dim, int steps, const std::vector<double>& fixed_z,
                                         const std::optional<Image>& clean = std::nullopt);

struct GlobalScalePoint {
  double scale = 0.0;
  double l1_to_input = 0.0;
};

// Scales the global connection weights by m = k/(steps-1) at fixed z and
// reports the mean absolute change of the output from the input.
std::vector<GlobalScalePoint> global_alpha_sweep(const CResMDModel<float>& model, const Image& degraded,
                                                 const std::vector<double>& z, int steps);

}  // namespace cresmd
