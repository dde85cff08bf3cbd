#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "cresmd/error.hpp"
#include "cresmd/ops.hpp"

namespace cresmd::ops {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

// Upper bound on the im2col scratch buffer, in elements. Large inputs are
// processed in horizontal bands of output rows.
constexpr std::size_t kMaxColumnElements = std::size_t{1} << 18;

struct ConvGeometry {
  std::size_t in_channels, in_h, in_w;
  std::size_t out_channels, out_h, out_w;
  std::size_t kernel;
  std::size_t stride;
  std::size_t pad;

  std::size_t patch() const { return in_channels * kernel * kernel; }
  std::size_t band_rows() const {
    const std::size_t per_row = patch() * out_w;
    return std::clamp<std::size_t>(kMaxColumnElements / std::max<std::size_t>(per_row, 1), 1,
                                   out_h);
  }
};

// Output columns [lo, hi) read inside the input row for kernel column kj.
struct ValidRange {
  std::size_t lo, hi;
};

ValidRange valid_columns(const ConvGeometry& g, std::size_t kj) {
  const long pad = static_cast<long>(g.pad);
  const long stride = static_cast<long>(g.stride);
  const long shift = static_cast<long>(kj) - pad;
  // iw = ow * stride + shift must satisfy 0 <= iw < in_w.
  long lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  long hi = (static_cast<long>(g.in_w) - shift + stride - 1) / stride;
  hi = std::clamp(hi, 0L, static_cast<long>(g.out_w));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Stride 1 with "same" padding: every kernel tap reads the input plane
// shifted by a constant linear offset, so a tap is one contiguous copy plus
// a fix-up of the column that wraps around the row edge.
bool same_size(const ConvGeometry& g) {
  return g.stride == 1 && g.out_h == g.in_h && g.out_w == g.in_w;
}

// Linear range [begin, end) of tap (ki, kj) over output rows [row0, row0+rows)
// whose shifted source index stays inside the plane.
struct ShiftedSpan {
  long shift;
  std::size_t begin, end;
};

ShiftedSpan shifted_span(const ConvGeometry& g, std::size_t ki, std::size_t kj, std::size_t row0,
                         std::size_t rows) {
  const long w = static_cast<long>(g.in_w);
  const long pad = static_cast<long>(g.pad);
  const long shift = (static_cast<long>(ki) - pad) * w + (static_cast<long>(kj) - pad);
  const long first = static_cast<long>(row0) * w;
  const long count = static_cast<long>(rows) * w;
  const long plane = static_cast<long>(g.in_h) * w;
  const long begin = std::clamp(-(first + shift), 0L, count);
  const long end = std::clamp(plane - (first + shift), begin, count);
  return {shift, static_cast<std::size_t>(begin), static_cast<std::size_t>(end)};
}

// Fills cols[patch, rows*out_w] for output rows [row0, row0+rows).
template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::size_t row0, std::size_t rows, T* cols) {
  const std::size_t width = rows * g.out_w;
  const long pad = static_cast<long>(g.pad);
  if (same_size(g)) {
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const T* plane = x + c * g.in_h * g.in_w + row0 * g.in_w;
      for (std::size_t ki = 0; ki < g.kernel; ++ki) {
        for (std::size_t kj = 0; kj < g.kernel; ++kj) {
          T* dst = cols + ((c * g.kernel + ki) * g.kernel + kj) * width;
          const auto span = shifted_span(g, ki, kj, row0, rows);
          std::fill(dst, dst + span.begin, T(0));
          std::copy(plane + span.begin + span.shift, plane + span.end + span.shift, dst + span.begin);
          std::fill(dst + span.end, dst + width, T(0));
          const auto [lo, hi] = valid_columns(g, kj);
          for (std::size_t r = 0; r < rows; ++r) {
            T* drow = dst + r * g.out_w;
            std::fill(drow, drow + lo, T(0));
            std::fill(drow + hi, drow + g.out_w, T(0));
          }
        }
      }
    }
    return;
  }
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const T* plane = x + c * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        T* dst = cols + ((c * g.kernel + ki) * g.kernel + kj) * width;
        const auto [lo, hi] = valid_columns(g, kj);
        const long shift = static_cast<long>(kj) - pad;
        for (std::size_t r = 0; r < rows; ++r) {
          const long ih = static_cast<long>((row0 + r) * g.stride + ki) - pad;
          T* drow = dst + r * g.out_w;
          if (ih < 0 || ih >= static_cast<long>(g.in_h)) {
            std::fill(drow, drow + g.out_w, T(0));
            continue;
          }
          const T* srow = plane + static_cast<std::size_t>(ih) * g.in_w;
          std::fill(drow, drow + lo, T(0));
          std::fill(drow + hi, drow + g.out_w, T(0));
          if (lo == hi) continue;
          const T* src = srow + (static_cast<long>(lo * g.stride) + shift);
          if (g.stride == 1) {
            std::copy(src, src + (hi - lo), drow + lo);
          } else {
            for (std::size_t ow = lo; ow < hi; ++ow, src += 2) drow[ow] = *src;
          }
        }
      }
    }
  }
}

// Scatter-adds cols back into the input gradient. The same-size path
// clears the wrapped columns of `cols` before its contiguous add.
template <typename T>
void col2im(T* cols, const ConvGeometry& g, std::size_t row0, std::size_t rows, T* dx) {
  const std::size_t width = rows * g.out_w;
  const long pad = static_cast<long>(g.pad);
  if (same_size(g)) {
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      T* plane = dx + c * g.in_h * g.in_w + row0 * g.in_w;
      for (std::size_t ki = 0; ki < g.kernel; ++ki) {
        for (std::size_t kj = 0; kj < g.kernel; ++kj) {
          T* src = cols + ((c * g.kernel + ki) * g.kernel + kj) * width;
          const auto [lo, hi] = valid_columns(g, kj);
          for (std::size_t r = 0; r < rows; ++r) {
            T* srow = src + r * g.out_w;
            std::fill(srow, srow + lo, T(0));
            std::fill(srow + hi, srow + g.out_w, T(0));
          }
          const auto span = shifted_span(g, ki, kj, row0, rows);
          for (std::size_t i = span.begin; i < span.end; ++i) {
            plane[static_cast<long>(i) + span.shift] += src[i];
          }
        }
      }
    }
    return;
  }
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    T* plane = dx + c * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const T* src = cols + ((c * g.kernel + ki) * g.kernel + kj) * width;
        const auto [lo, hi] = valid_columns(g, kj);
        if (lo == hi) continue;
        const long shift = static_cast<long>(kj) - pad;
        for (std::size_t r = 0; r < rows; ++r) {
          const long ih = static_cast<long>((row0 + r) * g.stride + ki) - pad;
          if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
          const T* srow = src + r * g.out_w;
          T* drow = plane + static_cast<std::size_t>(ih) * g.in_w + (static_cast<long>(lo * g.stride) + shift);
          if (g.stride == 1) {
            for (std::size_t ow = lo; ow < hi; ++ow) drow[ow - lo] += srow[ow];
          } else {
            for (std::size_t ow = lo; ow < hi; ++ow, drow += 2) *drow += srow[ow];
          }
        }
      }
    }
  }
}

template <typename T>
std::vector<T>& scratch() {
  thread_local std::vector<T> buffer;
  return buffer;
}

template <typename T>
std::vector<T>& scratch_grad() {
  thread_local std::vector<T> buffer;
  return buffer;
}

template <typename T>
ConvGeometry check_conv(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                        Conv2dOptions options) {
  if (x.rank() != 3) throw ShapeError("conv2d: input must be [C,H,W], got " + shape_to_string(x.shape()));
  if (weight.rank() != 4) {
    throw ShapeError("conv2d: weight must be [C_out,C_in,k,k], got " +
                     shape_to_string(weight.shape()));
  }
  const std::size_t k = weight.dim(2);
  if (weight.dim(3) != k) throw ShapeError("conv2d: kernel must be square (dim 3 != dim 2)");
  if (k % 2 == 0) throw ShapeError("conv2d: kernel size (dim 2) must be odd, got " + std::to_string(k));
  if (weight.dim(1) != x.dim(0)) {
    throw ShapeError("conv2d: input channels (dim 0 of x = " + std::to_string(x.dim(0)) +
                     ") do not match weight dim 1 = " + std::to_string(weight.dim(1)));
  }
  if (options.stride != 1 && options.stride != 2) {
    throw ShapeError("conv2d: stride must be 1 or 2, got " + std::to_string(options.stride));
  }
  if (options.pad < 0) throw ShapeError("conv2d: pad must be non-negative");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(weight.dim(0)) + "], got " +
                     shape_to_string(bias.shape()));
  }
  const std::size_t pad = static_cast<std::size_t>(options.pad);
  for (std::size_t axis : {std::size_t{1}, std::size_t{2}}) {
    if (x.dim(axis) + 2 * pad < k) {
      throw ShapeError("conv2d: padded input dim " + std::to_string(axis) +
                       " is smaller than the kernel");
    }
  }
  ConvGeometry g{};
  g.in_channels = x.dim(0);
  g.in_h = x.dim(1);
  g.in_w = x.dim(2);
  g.out_channels = weight.dim(0);
  g.kernel = k;
  g.stride = static_cast<std::size_t>(options.stride);
  g.pad = pad;
  g.out_h = (g.in_h + 2 * pad - k) / g.stride + 1;
  g.out_w = (g.in_w + 2 * pad - k) / g.stride + 1;
  return g;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, Conv2dOptions options) {
  const ConvGeometry g = check_conv(x, weight, bias, options);
  const std::size_t out_plane = g.out_h * g.out_w;
  auto out = Tensor<T>::zeros({g.out_channels, g.out_h, g.out_w});

  ConstMatrixMap<T> w(weight.data().data(), g.out_channels, g.patch(), Eigen::OuterStride<>(g.patch()));
  auto& cols = scratch<T>();
  const std::size_t band = g.band_rows();
  for (std::size_t row0 = 0; row0 < g.out_h; row0 += band) {
    const std::size_t rows = std::min(band, g.out_h - row0);
    const std::size_t width = rows * g.out_w;
    cols.resize(g.patch() * width);
    im2col(x.data().data(), g, row0, rows, cols.data());
    ConstMatrixMap<T> col(cols.data(), g.patch(), width, Eigen::OuterStride<>(width));
    MatrixMap<T> dst(out.data().data() + row0 * g.out_w, g.out_channels, width,
                     Eigen::OuterStride<>(out_plane));
    dst.noalias() = w * col;
  }

  auto os = out.data();
  if (bias.defined()) {
    auto bs = bias.data();
    for (std::size_t c = 0; c < g.out_channels; ++c) {
      T* p = os.data() + c * out_plane;
      for (std::size_t i = 0; i < out_plane; ++i) p[i] += bs[c];
    }
  }
  for (T v : os) {
    if (!std::isfinite(v)) throw NumericError("conv2d produced a non-finite value");
  }

  if (tape.wants({&x, &weight, &bias})) {
    tape.record({x, weight, bias}, out, [x = x, weight = weight, bias = bias, g](std::span<const T> grad) mutable {
      const std::size_t out_plane = g.out_h * g.out_w;
      if (bias.defined() && bias.requires_grad()) {
        auto gb = bias.ensure_grad();
        for (std::size_t c = 0; c < g.out_channels; ++c) {
          T acc = 0;
          const T* p = grad.data() + c * out_plane;
          for (std::size_t i = 0; i < out_plane; ++i) acc += p[i];
          gb[c] += acc;
        }
      }
      const bool need_w = weight.requires_grad();
      const bool need_x = x.requires_grad();
      if (!need_w && !need_x) return;

      ConstMatrixMap<T> w(weight.data().data(), g.out_channels, g.patch(),
                          Eigen::OuterStride<>(g.patch()));
      T* gw_ptr = need_w ? weight.ensure_grad().data() : nullptr;
      T* gx_ptr = need_x ? x.ensure_grad().data() : nullptr;
      auto& cols = scratch<T>();
      auto& dcols = scratch_grad<T>();
      const std::size_t band = g.band_rows();
      for (std::size_t row0 = 0; row0 < g.out_h; row0 += band) {
        const std::size_t rows = std::min(band, g.out_h - row0);
        const std::size_t width = rows * g.out_w;
        ConstMatrixMap<T> dout(grad.data() + row0 * g.out_w, g.out_channels, width,
                               Eigen::OuterStride<>(out_plane));
        if (need_w) {
          cols.resize(g.patch() * width);
          im2col(x.data().data(), g, row0, rows, cols.data());
          ConstMatrixMap<T> col(cols.data(), g.patch(), width, Eigen::OuterStride<>(width));
          MatrixMap<T> gw(gw_ptr, g.out_channels, g.patch(), Eigen::OuterStride<>(g.patch()));
          gw.noalias() += dout * col.transpose();
        }
        if (need_x) {
          dcols.resize(g.patch() * width);
          MatrixMap<T> dcol(dcols.data(), g.patch(), width, Eigen::OuterStride<>(width));
          dcol.noalias() = w.transpose() * dout;
          col2im(dcols.data(), g, row0, rows, gx_ptr);
        }
      }
    });
  }
  return out;
}

template Tensor<float> conv2d(Tape<float>&, const Tensor<float>&, const Tensor<float>&,
                              const Tensor<float>&, Conv2dOptions);
template Tensor<double> conv2d(Tape<double>&, const Tensor<double>&, const Tensor<double>&,
                               const Tensor<double>&, Conv2dOptions);

}  // namespace cresmd::ops
