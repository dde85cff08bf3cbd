#include "cresmd/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "cresmd/error.hpp"
#include "cresmd/rng.hpp"

namespace cresmd {

std::vector<Image> load_dataset_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Image> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(load_ppm(f));
  if (images.empty()) throw IoError("no PPM/PGM images in " + dir.string());
  return images;
}

namespace {

using Color = std::array<double, 3>;

Color random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

// Smoothly interpolated lattice noise in [0,1].
class ValueNoise {
 public:
  ValueNoise(int cells, Rng& rng) : cells_(cells), lattice_((cells + 1) * (cells + 1)) {
    for (double& v : lattice_) v = rng.uniform();
  }

  double at(double u, double v) const {
    const double x = u * cells_;
    const double y = v * cells_;
    const int x0 = std::min(static_cast<int>(x), cells_ - 1);
    const int y0 = std::min(static_cast<int>(y), cells_ - 1);
    const double fx = smooth(x - x0);
    const double fy = smooth(y - y0);
    const auto l = [&](int yy, int xx) { return lattice_[yy * (cells_ + 1) + xx]; };
    const double top = l(y0, x0) * (1 - fx) + l(y0, x0 + 1) * fx;
    const double bottom = l(y0 + 1, x0) * (1 - fx) + l(y0 + 1, x0 + 1) * fx;
    return top * (1 - fy) + bottom * fy;
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

  int cells_;
  std::vector<double> lattice_;
};

}  // namespace

Image procedural_texture(int size, std::uint64_t seed) {
  if (size < 8) throw RangeError("texture size must be at least 8");
  Rng rng(seed);
  Image image = Image::zeros(3, size, size);

  std::vector<ValueNoise> octaves;
  for (int cells : {3, 6, 12, 24}) octaves.emplace_back(cells, rng);
  const Color low = random_color(rng);
  const Color high = random_color(rng);
  ValueNoise grain(std::max(8, size / 3), rng);
  const double grain_amp = 0.03 + 0.05 * rng.uniform();

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size;
      const double v = (y + 0.5) / size;
      double t = 0.0;
      double amp = 0.5;
      for (const auto& o : octaves) {
        t += amp * o.at(u, v);
        amp *= 0.5;
      }
      t /= 0.9375;
      const double g = grain_amp * (grain.at(u, v) - 0.5);
      for (int c = 0; c < 3; ++c) image.at(c, y, x) = static_cast<float>(low[c] + (high[c] - low[c]) * t + g);
    }
  }

  const int shapes = 8 + static_cast<int>(rng.uniform_int(12));
  for (int s = 0; s < shapes; ++s) {
    const int kind = static_cast<int>(rng.uniform_int(3));
    const Color color = random_color(rng);
    const double opacity = 0.6 + 0.4 * rng.uniform();
    const double cx = rng.uniform() * size;
    const double cy = rng.uniform() * size;
    const double extent = size * (0.05 + 0.2 * rng.uniform());
    const double angle = rng.uniform() * std::numbers::pi;
    const double aspect = 0.3 + 0.7 * rng.uniform();
    const double period = 2.0 + 6.0 * rng.uniform();
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        const double ru = dx * ca + dy * sa;
        const double rv = -dx * sa + dy * ca;
        bool inside = false;
        double shade = 1.0;
        switch (kind) {
          case 0:  // ellipse
            inside = (ru * ru) / (extent * extent) + (rv * rv) / (extent * extent * aspect * aspect) <= 1.0;
            break;
          case 1:  // rotated rectangle
            inside = std::abs(ru) <= extent && std::abs(rv) <= extent * aspect;
            break;
          default:  // striped rectangle
            inside = std::abs(ru) <= extent && std::abs(rv) <= extent * aspect;
            shade = std::fmod(std::abs(ru), 2.0 * period) < period ? 1.0 : 0.35;
            break;
        }
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) {
          float& p = image.at(c, y, x);
          p = static_cast<float>(p * (1.0 - opacity) + opacity * color[c] * shade);
        }
      }
    }
  }
  return quantize_image(clamp_image(image));
}

void write_procedural_dataset(const std::filesystem::path& dir, int count, int size, std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "tex_%03d.ppm", i);
    save_ppm(procedural_texture(size, mix64(seed + static_cast<std::uint64_t>(i))), dir / name);
  }
}

}  // namespace cresmd
