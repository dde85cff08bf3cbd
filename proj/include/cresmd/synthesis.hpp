#pragma once

#include <array>
#include <optional>
#include <vector>

#include "cresmd/degradation.hpp"
#include "cresmd/image.hpp"
#include "cresmd/rng.hpp"

namespace cresmd {

inline constexpr int kBlurKernelSize = 21;

// Below this width the blur kernel is the discrete delta.
inline constexpr double kMinBlurWidth = 1e-6;

// Isotropic Gaussian with std-dev `width` sampled at integer offsets on a
// 21x21 grid, normalized to unit sum. Row-major.
std::vector<double> gaussian_kernel(double width);

// Per-channel convolution with gaussian_kernel(width), reflect padding.
Image apply_blur(const Image& image, double width);

// Adds i.i.d. N(0, (sigma/255)^2) per sample in planar order, then clamps.
Image add_noise(const Image& image, double sigma, Rng& rng);

// IJG quality scaling of the Annex-K base tables (natural order).
std::array<int, 64> jpeg_quant_table(int quality, bool luma);

// Quantize-dequantize JPEG simulation: BT.601 full-range YCbCr, 4:4:4,
// 8x8 DCT-II, no entropy coding. nullopt is the identity.
Image jpeg_roundtrip(const Image& image, std::optional<int> quality);

// Blur, then noise, then JPEG.
Image degrade(const Image& image, const DegradationSpec& spec, Rng& rng);

// 10*log10(1/MSE) on the [0,1] scale; +infinity for identical images.
double psnr(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);

}  // namespace cresmd
