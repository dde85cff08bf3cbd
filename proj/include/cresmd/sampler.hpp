#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cresmd/beta.hpp"
#include "cresmd/degradation.hpp"
#include "cresmd/image.hpp"
#include "cresmd/rng.hpp"

namespace cresmd {

struct SamplePlan {
  // One entry per space dimension; a single entry is broadcast.
  std::vector<BetaParams> beta{BetaParams{}};
  // Probability of the "single degradation" group; the rest combine all axes.
  double single_ratio = 0.5;
  // Bypasses sampling entirely when set.
  std::optional<DegradationSpec> pinned;

  const BetaParams& beta_for(std::size_t dim) const;
  void validate(const DegradationSpace& space) const;

  nlohmann::json to_json() const;
  static SamplePlan from_json(const nlohmann::json& j);
};

// Maps a condition-space draw onto the nearest level of the axis grid.
// Blur/noise: level = round(z * steps) * max / steps. JPEG: nearest of
// {none} u {(110-q)/100 : q = 10, 10+stride, ..., 100}.
double snap_level(const DegradationDimension& dim, double z);
std::optional<int> snap_jpeg(const DegradationDimension& dim, double z);

// Builds a spec from per-axis draws; nullopt marks an inactive axis.
DegradationSpec spec_from_draws(const DegradationSpace& space,
                                std::span<const std::optional<double>> draws);

DegradationSpec sample_spec(const SamplePlan& plan, const DegradationSpace& space, Rng& rng);

// 0..7: bit 2 = horizontal flip (applied first), bits 0-1 = quarter turns
// counter-clockwise. Requires a square image when rotating.
Image dihedral_transform(const Image& image, int code);

struct TrainSample {
  Image degraded;
  Image clean;
  std::vector<double> condition;
  DegradationSpec spec;
  std::uint64_t seed = 0;
};

struct TrainBatch {
  std::vector<Image> degraded;
  std::vector<Image> clean;
  std::vector<std::vector<double>> conditions;
  std::vector<DegradationSpec> specs;
  // Per-element seeds; make_sample(..., seeds[i]) replays element i.
  std::vector<std::uint64_t> seeds;

  std::size_t size() const { return degraded.size(); }
};

// Crop, flip, rotate, sample a spec, degrade and encode, all driven by one
// seed.
TrainSample make_sample(std::span<const Image> dataset, const SamplePlan& plan,
                        const DegradationSpace& space, int crop, std::uint64_t seed);

TrainBatch make_batch(std::span<const Image> dataset, const SamplePlan& plan,
                      const DegradationSpace& space, int crop, int batch, Rng& rng);

}  // namespace cresmd
