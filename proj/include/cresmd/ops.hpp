#pragma once

#include "cresmd/tensor.hpp"

namespace cresmd::ops {

struct Conv2dOptions {
  int stride = 1;
  int pad = 0;
};

// x: [C_in,H,W], weight: [C_out,C_in,k,k], bias: [C_out] or undefined.
// Zero padding; output [C_out, (H+2p-k)/s+1, (W+2p-k)/s+1].
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, Conv2dOptions options);

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x);

// out[c,h,w] = x[c,h,w] * alpha[c]
template <typename T>
Tensor<T> scale_channels(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& alpha);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y);

// Elementwise product of identically shaped tensors.
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y);

// [C*s*s,H,W] -> [C,s*H,s*W] with out[c, s*h+i, s*w+j] = x[c*s*s + i*s + j, h, w].
template <typename T>
Tensor<T> pixel_shuffle(Tape<T>& tape, const Tensor<T>& x, int factor);

// Exact inverse of pixel_shuffle.
template <typename T>
Tensor<T> pixel_unshuffle(Tape<T>& tape, const Tensor<T>& x, int factor);

// z: [N], weight: [M,N] -> weight * z
template <typename T>
Tensor<T> linear_nobias(Tape<T>& tape, const Tensor<T>& z, const Tensor<T>& weight);

// Mean absolute difference; the subgradient at exact ties is 0.
template <typename T>
Tensor<T> l1_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

}  // namespace cresmd::ops
