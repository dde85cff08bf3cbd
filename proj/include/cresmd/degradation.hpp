#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cresmd {

enum class DegradationKind { kBlur, kNoise, kJpeg };

std::string kind_name(DegradationKind kind);
DegradationKind kind_from_name(const std::string& name);

// One concrete degradation setting. jpeg_quality == nullopt means no
// compression, the zero starting point of the JPEG axis.
struct DegradationSpec {
  double blur_r = 0.0;       // Gaussian std-dev in pixels
  double noise_sigma = 0.0;  // AWGN std-dev on the 0-255 scale
  std::optional<int> jpeg_quality;

  bool is_zero() const { return blur_r == 0.0 && noise_sigma == 0.0 && !jpeg_quality; }
  std::string describe() const;
  bool operator==(const DegradationSpec&) const = default;
};

inline constexpr int kJpegMinQuality = 10;
inline constexpr int kJpegMaxQuality = 100;

// One modulation axis. Blur and noise levels span [0, max_level]; the JPEG
// axis spans "none" plus qualities [10, 100] and ignores max_level.
struct DegradationDimension {
  DegradationKind kind = DegradationKind::kBlur;
  double max_level = 0.0;
  double stride = 0.0;

  std::string name() const { return kind_name(kind); }
  // Number of stride steps from the zero level to the far end of the axis.
  int steps() const;
};

// Ordered set of modulation axes; the order fixes the layout of the
// condition vector.
class DegradationSpace {
 public:
  DegradationSpace() = default;
  explicit DegradationSpace(std::vector<DegradationDimension> dims);

  // Blur [0,4] stride 0.1, noise [0,50] stride 1 (+ JPEG [100,10] stride 2).
  static DegradationSpace paper_2d();
  static DegradationSpace paper_3d();
  // Blur [0,2], noise [0,25]; the scaled-down default for CPU training.
  static DegradationSpace desk_2d();
  // "paper-2d", "paper-3d" or "desk-2d".
  static DegradationSpace named(const std::string& name);

  std::size_t size() const { return dims_.size(); }
  const std::vector<DegradationDimension>& dims() const { return dims_; }
  const DegradationDimension& dim(std::size_t i) const { return dims_.at(i); }
  std::optional<std::size_t> index_of(DegradationKind kind) const;

  // Throws RangeError naming the offending axis and its range.
  void validate(const DegradationSpec& spec) const;

  // Level of `kind` in `spec` mapped into [0,1].
  double condition_of(const DegradationSpec& spec, std::size_t dim_index) const;
  std::vector<double> encode(const DegradationSpec& spec) const;

  // Inverse map for grid-aligned conditions; JPEG condition 0 is "none".
  DegradationSpec decode(const std::vector<double>& condition) const;

  nlohmann::json to_json() const;
  // Accepts the array form written by to_json or a preset name.
  static DegradationSpace from_json(const nlohmann::json& j);

  bool operator==(const DegradationSpace&) const;

 private:
  std::vector<DegradationDimension> dims_;
};

// Maps a JPEG quality (or none) to its condition value: none -> 0,
// q -> (110 - q) / 100.
double jpeg_condition(std::optional<int> quality);

}  // namespace cresmd

namespace cresmd {

inline std::vector<double> encode_condition(const DegradationSpec& spec,
                                            const DegradationSpace& space) {
  return space.encode(spec);
}

}  // namespace cresmd
