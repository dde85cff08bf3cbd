#include "cresmd/ops.hpp"

#include <cmath>

#include "cresmd/error.hpp"

namespace cresmd::ops {
namespace {

template <typename T>
void require_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + " produced a non-finite value");
    }
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& x, const Tensor<T>& y, const char* op) {
  if (x.shape() != y.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(x.shape()) + " vs " +
                     shape_to_string(y.shape()));
  }
}

template <typename T>
void require_rank(const Tensor<T>& x, std::size_t rank, const char* op, const char* arg) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + arg + " must have rank " + std::to_string(rank) +
                     ", got " + shape_to_string(x.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  auto out = Tensor<T>::zeros(x.shape());
  auto xs = x.data();
  auto os = out.data();
  for (std::size_t i = 0; i < xs.size(); ++i) os[i] = xs[i] <= T(0) ? T(0) : xs[i];  // NaN passes through
  require_finite(out, "relu");
  if (tape.wants({&x})) {
    tape.record({x}, out, [x = x, out](std::span<const T> g) mutable {
      if (!x.requires_grad()) return;
      auto gx = x.ensure_grad();
      auto os = out.data();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (os[i] > T(0)) gx[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale_channels(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& alpha) {
  require_rank(x, 3, "scale_channels", "x");
  require_rank(alpha, 1, "scale_channels", "alpha");
  const std::size_t channels = x.dim(0);
  if (alpha.dim(0) != channels) {
    throw ShapeError("scale_channels: alpha length " + std::to_string(alpha.dim(0)) +
                     " does not match channel count " + std::to_string(channels));
  }
  const std::size_t plane = x.dim(1) * x.dim(2);
  auto out = Tensor<T>::zeros(x.shape());
  {
    auto xs = x.data();
    auto as = alpha.data();
    auto os = out.data();
    for (std::size_t c = 0; c < channels; ++c) {
      const T a = as[c];
      for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) os[i] = xs[i] * a;
    }
  }
  require_finite(out, "scale_channels");
  if (tape.wants({&x, &alpha})) {
    tape.record({x, alpha}, out, [x = x, alpha = alpha, channels, plane](std::span<const T> g) mutable {
      if (x.requires_grad()) {
        auto gx = x.ensure_grad();
        auto as = alpha.data();
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) gx[i] += g[i] * as[c];
        }
      }
      if (alpha.requires_grad()) {
        auto ga = alpha.ensure_grad();
        auto xs = x.data();
        for (std::size_t c = 0; c < channels; ++c) {
          T acc = 0;
          for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) acc += g[i] * xs[i];
          ga[c] += acc;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y) {
  require_same_shape(x, y, "add");
  auto out = Tensor<T>::zeros(x.shape());
  {
    auto xs = x.data();
    auto ys = y.data();
    auto os = out.data();
    for (std::size_t i = 0; i < os.size(); ++i) os[i] = xs[i] + ys[i];
  }
  require_finite(out, "add");
  if (tape.wants({&x, &y})) {
    tape.record({x, y}, out, [x = x, y = y](std::span<const T> g) mutable {
      for (Tensor<T>* t : {&x, &y}) {
        if (!t->requires_grad()) continue;
        auto gt = t->ensure_grad();
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y) {
  require_same_shape(x, y, "mul");
  auto out = Tensor<T>::zeros(x.shape());
  {
    auto xs = x.data();
    auto ys = y.data();
    auto os = out.data();
    for (std::size_t i = 0; i < os.size(); ++i) os[i] = xs[i] * ys[i];
  }
  require_finite(out, "mul");
  if (tape.wants({&x, &y})) {
    tape.record({x, y}, out, [x = x, y = y](std::span<const T> g) mutable {
      if (x.requires_grad()) {
        auto gx = x.ensure_grad();
        auto ys = y.data();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * ys[i];
      }
      if (y.requires_grad()) {
        auto gy = y.ensure_grad();
        auto xs = x.data();
        for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += g[i] * xs[i];
      }
    });
  }
  return out;
}

namespace {

// Index map shared by shuffle and unshuffle: calls fn(shuffled, unshuffled)
// for every element, where `unshuffled` indexes the [C*s*s,H,W] layout.
template <typename Fn>
void for_each_shuffle_pair(std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t s, Fn&& fn) {
  const std::size_t out_h = height * s;
  const std::size_t out_w = width * s;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t j = 0; j < s; ++j) {
        const std::size_t in_c = c * s * s + i * s + j;
        for (std::size_t h = 0; h < height; ++h) {
          const std::size_t in_row = (in_c * height + h) * width;
          const std::size_t out_row = (c * out_h + s * h + i) * out_w;
          for (std::size_t w = 0; w < width; ++w) fn(out_row + s * w + j, in_row + w);
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> pixel_shuffle(Tape<T>& tape, const Tensor<T>& x, int factor) {
  require_rank(x, 3, "pixel_shuffle", "x");
  if (factor < 1) throw ShapeError("pixel_shuffle: factor must be positive");
  const std::size_t s = static_cast<std::size_t>(factor);
  if (x.dim(0) % (s * s) != 0) {
    throw ShapeError("pixel_shuffle: channel count " + std::to_string(x.dim(0)) +
                     " is not divisible by " + std::to_string(s * s));
  }
  const std::size_t channels = x.dim(0) / (s * s);
  const std::size_t height = x.dim(1);
  const std::size_t width = x.dim(2);
  auto out = Tensor<T>::zeros({channels, height * s, width * s});
  {
    auto xs = x.data();
    auto os = out.data();
    for_each_shuffle_pair(channels, height, width, s,
                          [&](std::size_t o, std::size_t i) { os[o] = xs[i]; });
  }
  if (tape.wants({&x})) {
    tape.record({x}, out, [x = x, channels, height, width, s](std::span<const T> g) mutable {
      auto gx = x.ensure_grad();
      for_each_shuffle_pair(channels, height, width, s,
                            [&](std::size_t o, std::size_t i) { gx[i] += g[o]; });
    });
  }
  return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(Tape<T>& tape, const Tensor<T>& x, int factor) {
  require_rank(x, 3, "pixel_unshuffle", "x");
  if (factor < 1) throw ShapeError("pixel_unshuffle: factor must be positive");
  const std::size_t s = static_cast<std::size_t>(factor);
  if (x.dim(1) % s != 0 || x.dim(2) % s != 0) {
    throw ShapeError("pixel_unshuffle: spatial size " + shape_to_string(x.shape()) +
                     " is not divisible by " + std::to_string(s));
  }
  const std::size_t channels = x.dim(0);
  const std::size_t height = x.dim(1) / s;
  const std::size_t width = x.dim(2) / s;
  auto out = Tensor<T>::zeros({channels * s * s, height, width});
  {
    auto xs = x.data();
    auto os = out.data();
    for_each_shuffle_pair(channels, height, width, s,
                          [&](std::size_t o, std::size_t i) { os[i] = xs[o]; });
  }
  if (tape.wants({&x})) {
    tape.record({x}, out, [x = x, channels, height, width, s](std::span<const T> g) mutable {
      auto gx = x.ensure_grad();
      for_each_shuffle_pair(channels, height, width, s,
                            [&](std::size_t o, std::size_t i) { gx[o] += g[i]; });
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear_nobias(Tape<T>& tape, const Tensor<T>& z, const Tensor<T>& weight) {
  require_rank(z, 1, "linear_nobias", "z");
  require_rank(weight, 2, "linear_nobias", "weight");
  const std::size_t rows = weight.dim(0);
  const std::size_t cols = weight.dim(1);
  if (z.dim(0) != cols) {
    throw ShapeError("linear_nobias: input length " + std::to_string(z.dim(0)) +
                     " does not match weight columns " + std::to_string(cols));
  }
  auto out = Tensor<T>::zeros({rows});
  {
    auto zs = z.data();
    auto ws = weight.data();
    auto os = out.data();
    for (std::size_t m = 0; m < rows; ++m) {
      T acc = 0;
      for (std::size_t n = 0; n < cols; ++n) acc += ws[m * cols + n] * zs[n];
      os[m] = acc;
    }
  }
  require_finite(out, "linear_nobias");
  if (tape.wants({&z, &weight})) {
    tape.record({z, weight}, out, [z = z, weight = weight, rows, cols](std::span<const T> g) mutable {
      if (weight.requires_grad()) {
        auto gw = weight.ensure_grad();
        auto zs = z.data();
        for (std::size_t m = 0; m < rows; ++m) {
          for (std::size_t n = 0; n < cols; ++n) gw[m * cols + n] += g[m] * zs[n];
        }
      }
      if (z.requires_grad()) {
        auto gz = z.ensure_grad();
        auto ws = weight.data();
        for (std::size_t m = 0; m < rows; ++m) {
          for (std::size_t n = 0; n < cols; ++n) gz[n] += g[m] * ws[m * cols + n];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> l1_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "l1_loss");
  const std::size_t n = pred.numel();
  T acc = 0;
  {
    auto ps = pred.data();
    auto ts = target.data();
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(ps[i] - ts[i]);
  }
  auto out = Tensor<T>::full({1}, acc / static_cast<T>(n));
  require_finite(out, "l1_loss");
  if (tape.wants({&pred, &target})) {
    tape.record({pred, target}, out, [pred = pred, target = target, n](std::span<const T> g) mutable {
      const T scale = g[0] / static_cast<T>(n);
      auto ps = pred.data();
      auto ts = target.data();
      auto sign = [&](std::size_t i) -> T {
        if (ps[i] > ts[i]) return T(1);
        if (ps[i] < ts[i]) return T(-1);
        return T(0);
      };
      if (pred.requires_grad()) {
        auto gp = pred.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) gp[i] += scale * sign(i);
      }
      if (target.requires_grad()) {
        auto gt = target.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) gt[i] -= scale * sign(i);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  auto out = Tensor<T>::full({1}, acc);
  require_finite(out, "sum");
  if (tape.wants({&x})) {
    tape.record({x}, out, [x = x](std::span<const T> g) mutable {
      auto gx = x.ensure_grad();
      for (T& v : gx) v += g[0];
    });
  }
  return out;
}

#define CRESMD_INSTANTIATE_OPS(T)                                                        \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                   \
  template Tensor<T> scale_channels(Tape<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> pixel_shuffle(Tape<T>&, const Tensor<T>&, int);                    \
  template Tensor<T> pixel_unshuffle(Tape<T>&, const Tensor<T>&, int);                  \
  template Tensor<T> linear_nobias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> l1_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);

CRESMD_INSTANTIATE_OPS(float)
CRESMD_INSTANTIATE_OPS(double)

#undef CRESMD_INSTANTIATE_OPS

}  // namespace cresmd::ops
