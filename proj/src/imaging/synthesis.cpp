#include "cresmd/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cresmd/error.hpp"

namespace cresmd {
namespace {

constexpr int kRadius = kBlurKernelSize / 2;

// Mirror without repeating the edge sample (dcb|abcd|cba).
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_1d(double width) {
  std::vector<double> g(kBlurKernelSize);
  double total = 0.0;
  for (int i = -kRadius; i <= kRadius; ++i) {
    g[i + kRadius] = std::exp(-(i * i) / (2.0 * width * width));
    total += g[i + kRadius];
  }
  for (double& v : g) v /= total;
  return g;
}

}  // namespace

std::vector<double> gaussian_kernel(double width) {
  if (!(width >= 0.0)) throw RangeError("blur width must be non-negative");
  std::vector<double> kernel(kBlurKernelSize * kBlurKernelSize, 0.0);
  if (width < kMinBlurWidth) {
    kernel[kRadius * kBlurKernelSize + kRadius] = 1.0;
    return kernel;
  }
  double total = 0.0;
  for (int y = -kRadius; y <= kRadius; ++y) {
    for (int x = -kRadius; x <= kRadius; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * width * width));
      kernel[(y + kRadius) * kBlurKernelSize + (x + kRadius)] = v;
      total += v;
    }
  }
  for (double& v : kernel) v /= total;
  return kernel;
}

Image apply_blur(const Image& image, double width) {
  if (!(width >= 0.0)) throw RangeError("blur width must be non-negative");
  if (width < kMinBlurWidth) return image;
  // The normalized 2-D Gaussian is the outer product of normalized 1-D
  // Gaussians, so the blur runs as two 1-D passes.
  const auto g = gaussian_1d(width);
  const int h = image.height;
  const int w = image.width;
  Image out = image;
  std::vector<double> rows(static_cast<std::size_t>(h) * w);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -kRadius; k <= kRadius; ++k) {
          acc += g[k + kRadius] * image.at(c, y, reflect_index(x + k, w));
        }
        rows[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -kRadius; k <= kRadius; ++k) {
          acc += g[k + kRadius] * rows[static_cast<std::size_t>(reflect_index(y + k, h)) * w + x];
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Image add_noise(const Image& image, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw RangeError("noise sigma must be non-negative");
  if (sigma == 0.0) return image;
  const double scale = sigma / 255.0;
  Image out = image;
  for (float& v : out.data) {
    const double noisy = static_cast<double>(v) + scale * rng.normal();
    v = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
  }
  return out;
}

namespace {

constexpr std::array<int, 64> kLumaBase = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChromaBase = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

// Orthonormal 8-point DCT-II basis, basis[u][x].
struct DctBasis {
  std::array<std::array<double, 8>, 8> m{};
  DctBasis() {
    for (int u = 0; u < 8; ++u) {
      const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) {
        m[u][x] = a * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
    }
  }
};

const DctBasis& dct_basis() {
  static const DctBasis basis;
  return basis;
}

// Quantizes one plane on the 0-255 scale in place.
void quantize_plane(std::vector<double>& plane, int height, int width, const std::array<int, 64>& table) {
  const auto& m = dct_basis().m;
  std::array<double, 64> block{};
  std::array<double, 64> tmp{};
  for (int by = 0; by < height; by += 8) {
    for (int bx = 0; bx < width; bx += 8) {
      // Edge blocks are filled by replicating the last row/column.
      for (int y = 0; y < 8; ++y) {
        const int sy = std::min(by + y, height - 1);
        for (int x = 0; x < 8; ++x) {
          const int sx = std::min(bx + x, width - 1);
          block[y * 8 + x] = plane[static_cast<std::size_t>(sy) * width + sx] - 128.0;
        }
      }
      // Forward: F = M f M^T.
      for (int u = 0; u < 8; ++u) {
        for (int x = 0; x < 8; ++x) {
          double acc = 0.0;
          for (int y = 0; y < 8; ++y) acc += m[u][y] * block[y * 8 + x];
          tmp[u * 8 + x] = acc;
        }
      }
      for (int u = 0; u < 8; ++u) {
        for (int v = 0; v < 8; ++v) {
          double acc = 0.0;
          for (int x = 0; x < 8; ++x) acc += tmp[u * 8 + x] * m[v][x];
          const double q = table[u * 8 + v];
          block[u * 8 + v] = std::round(acc / q) * q;
        }
      }
      // Inverse: f = M^T F M.
      for (int y = 0; y < 8; ++y) {
        for (int v = 0; v < 8; ++v) {
          double acc = 0.0;
          for (int u = 0; u < 8; ++u) acc += m[u][y] * block[u * 8 + v];
          tmp[y * 8 + v] = acc;
        }
      }
      for (int y = 0; y < 8 && by + y < height; ++y) {
        for (int x = 0; x < 8 && bx + x < width; ++x) {
          double acc = 0.0;
          for (int v = 0; v < 8; ++v) acc += tmp[y * 8 + v] * m[v][x];
          plane[static_cast<std::size_t>(by + y) * width + bx + x] = std::clamp(acc + 128.0, 0.0, 255.0);
        }
      }
    }
  }
}

}  // namespace

std::array<int, 64> jpeg_quant_table(int quality, bool luma) {
  if (quality < kJpegMinQuality || quality > kJpegMaxQuality) {
    throw RangeError("jpeg quality " + std::to_string(quality) + " outside range [10, 100]");
  }
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  const auto& base = luma ? kLumaBase : kChromaBase;
  std::array<int, 64> table{};
  for (int i = 0; i < 64; ++i) table[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return table;
}

Image jpeg_roundtrip(const Image& image, std::optional<int> quality) {
  if (!quality) return image;
  const auto luma = jpeg_quant_table(*quality, true);
  const auto chroma = jpeg_quant_table(*quality, false);
  const int h = image.height;
  const int w = image.width;
  const std::size_t n = image.plane();
  Image out = image;

  if (image.channels == 1) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 255.0 * image.data[i];
    quantize_plane(y, h, w, luma);
    for (std::size_t i = 0; i < n; ++i) out.data[i] = static_cast<float>(y[i] / 255.0);
    return out;
  }
  if (image.channels != 3) throw ShapeError("jpeg_roundtrip needs 1 or 3 channels");

  std::vector<double> y(n), cb(n), cr(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = 255.0 * image.data[i];
    const double g = 255.0 * image.data[n + i];
    const double b = 255.0 * image.data[2 * n + i];
    y[i] = 0.299 * r + 0.587 * g + 0.114 * b;
    cb[i] = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
    cr[i] = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
  }
  quantize_plane(y, h, w, luma);
  quantize_plane(cb, h, w, chroma);
  quantize_plane(cr, h, w, chroma);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] + 1.402 * (cr[i] - 128.0);
    const double g = y[i] - 0.344136 * (cb[i] - 128.0) - 0.714136 * (cr[i] - 128.0);
    const double b = y[i] + 1.772 * (cb[i] - 128.0);
    out.data[i] = static_cast<float>(std::clamp(r, 0.0, 255.0) / 255.0);
    out.data[n + i] = static_cast<float>(std::clamp(g, 0.0, 255.0) / 255.0);
    out.data[2 * n + i] = static_cast<float>(std::clamp(b, 0.0, 255.0) / 255.0);
  }
  return out;
}

Image degrade(const Image& image, const DegradationSpec& spec, Rng& rng) {
  Image out = apply_blur(image, spec.blur_r);
  out = add_noise(out, spec.noise_sigma, rng);
  return jpeg_roundtrip(out, spec.jpeg_quality);
}

double mse(const Image& a, const Image& b) {
  if (!a.same_dims(b)) throw ShapeError("image dimensions differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
  const double err = mse(a, b);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / err);
}

}  // namespace cresmd
