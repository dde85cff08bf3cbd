#include "cresmd/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "cresmd/error.hpp"
#include "cresmd/synthesis.hpp"

namespace cresmd {

const BetaParams& SamplePlan::beta_for(std::size_t dim) const {
  if (beta.size() == 1) return beta.front();
  return beta.at(dim);
}

void SamplePlan::validate(const DegradationSpace& space) const {
  if (beta.empty()) throw RangeError("sample plan needs at least one beta parameter pair");
  if (beta.size() != 1 && beta.size() != space.size()) {
    throw RangeError("sample plan has " + std::to_string(beta.size()) + " beta entries for a " +
                     std::to_string(space.size()) + "-D space");
  }
  for (const auto& p : beta) cresmd::validate(p);
  if (!(single_ratio >= 0.0 && single_ratio <= 1.0)) throw RangeError("single_ratio must lie in [0,1]");
  if (pinned) space.validate(*pinned);
}

nlohmann::json SamplePlan::to_json() const {
  nlohmann::json j{{"beta", beta}, {"single_ratio", single_ratio}};
  if (pinned) {
    j["pinned"] = {{"blur", pinned->blur_r},
                   {"noise", pinned->noise_sigma},
                   {"jpeg", pinned->jpeg_quality ? nlohmann::json(*pinned->jpeg_quality) : nlohmann::json("none")}};
  }
  return j;
}

SamplePlan SamplePlan::from_json(const nlohmann::json& j) {
  SamplePlan plan;
  try {
    if (j.contains("beta")) {
      const auto& b = j.at("beta");
      plan.beta = b.is_array() ? b.get<std::vector<BetaParams>>() : std::vector<BetaParams>{b.get<BetaParams>()};
    }
    if (j.contains("single_ratio")) j.at("single_ratio").get_to(plan.single_ratio);
    if (j.contains("pinned")) {
      const auto& p = j.at("pinned");
      DegradationSpec spec;
      spec.blur_r = p.value("blur", 0.0);
      spec.noise_sigma = p.value("noise", 0.0);
      if (p.contains("jpeg") && p.at("jpeg").is_number()) spec.jpeg_quality = p.at("jpeg").get<int>();
      plan.pinned = spec;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad sampling section: ") + e.what());
  }
  return plan;
}

double snap_level(const DegradationDimension& dim, double z) {
  const int steps = dim.steps();
  const long index = std::clamp<long>(std::lround(z * steps), 0, steps);
  return static_cast<double>(index) * dim.max_level / steps;
}

std::optional<int> snap_jpeg(const DegradationDimension& dim, double z) {
  const int stride = static_cast<int>(dim.stride);
  const double lowest = jpeg_condition(kJpegMaxQuality);
  // Below the midpoint between "none" and q=100 the draw snaps to none.
  if (z < lowest / 2.0) return std::nullopt;
  const double quality = 110.0 - 100.0 * z;
  const long index = std::lround((quality - kJpegMinQuality) / stride);
  const int q = kJpegMinQuality + static_cast<int>(index) * stride;
  return std::clamp(q, kJpegMinQuality, kJpegMaxQuality);
}

DegradationSpec spec_from_draws(const DegradationSpace& space,
                                std::span<const std::optional<double>> draws) {
  if (draws.size() != space.size()) throw RangeError("one draw per dimension required");
  DegradationSpec spec;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    if (!draws[i]) continue;
    const auto& d = space.dim(i);
    switch (d.kind) {
      case DegradationKind::kBlur: spec.blur_r = snap_level(d, *draws[i]); break;
      case DegradationKind::kNoise: spec.noise_sigma = snap_level(d, *draws[i]); break;
      case DegradationKind::kJpeg: spec.jpeg_quality = snap_jpeg(d, *draws[i]); break;
    }
  }
  return spec;
}

DegradationSpec sample_spec(const SamplePlan& plan, const DegradationSpace& space, Rng& rng) {
  if (plan.pinned) return *plan.pinned;
  std::vector<std::optional<double>> draws(space.size());
  const bool single = rng.uniform() < plan.single_ratio;
  if (single) {
    const std::size_t active = rng.uniform_int(space.size());
    draws[active] = beta_sample(rng, plan.beta_for(active));
  } else {
    for (std::size_t i = 0; i < space.size(); ++i) draws[i] = beta_sample(rng, plan.beta_for(i));
  }
  return spec_from_draws(space, draws);
}

Image dihedral_transform(const Image& image, int code) {
  const bool flip = (code & 4) != 0;
  const int turns = code & 3;
  if (turns % 2 == 1 && image.height != image.width) {
    throw ShapeError("quarter-turn rotation needs a square image");
  }
  Image out = image;
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        // Source pixel of the flipped image.
        int oy = y;
        int ox = flip ? image.width - 1 - x : x;
        // Rotate counter-clockwise `turns` times: (y, x) in h x w goes to
        // (w-1-x, y) in w x h.
        int h = image.height;
        int w = image.width;
        for (int t = 0; t < turns; ++t) {
          const int ny = w - 1 - ox;
          ox = oy;
          oy = ny;
          std::swap(h, w);
        }
        out.at(c, oy, ox) = image.at(c, y, x);
      }
    }
  }
  return out;
}

TrainSample make_sample(std::span<const Image> dataset, const SamplePlan& plan,
                        const DegradationSpace& space, int crop, std::uint64_t seed) {
  if (dataset.empty()) throw RangeError("dataset is empty");
  Rng rng(seed);
  const Image& source = dataset[rng.uniform_int(dataset.size())];
  if (source.height < crop || source.width < crop) {
    throw ShapeError("source image " + std::to_string(source.width) + "x" + std::to_string(source.height) +
                     " is smaller than the crop " + std::to_string(crop));
  }
  const int top = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(source.height - crop + 1)));
  const int left = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(source.width - crop + 1)));
  Image patch = Image::zeros(source.channels, crop, crop);
  for (int c = 0; c < source.channels; ++c) {
    for (int y = 0; y < crop; ++y) {
      for (int x = 0; x < crop; ++x) patch.at(c, y, x) = source.at(c, top + y, left + x);
    }
  }
  const int flip = static_cast<int>(rng.uniform_int(2));
  const int turns = static_cast<int>(rng.uniform_int(4));

  TrainSample sample;
  sample.seed = seed;
  sample.clean = dihedral_transform(patch, flip * 4 + turns);
  sample.spec = sample_spec(plan, space, rng);
  sample.degraded = degrade(sample.clean, sample.spec, rng);
  sample.condition = space.encode(sample.spec);
  return sample;
}

TrainBatch make_batch(std::span<const Image> dataset, const SamplePlan& plan,
                      const DegradationSpace& space, int crop, int batch, Rng& rng) {
  if (batch <= 0) throw RangeError("batch size must be positive");
  TrainBatch out;
  for (int i = 0; i < batch; ++i) {
    TrainSample s = make_sample(dataset, plan, space, crop, rng.fork_seed());
    out.degraded.push_back(std::move(s.degraded));
    out.clean.push_back(std::move(s.clean));
    out.conditions.push_back(std::move(s.condition));
    out.specs.push_back(s.spec);
    out.seeds.push_back(s.seed);
  }
  return out;
}

}  // namespace cresmd
