#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cresmd/tensor.hpp"

namespace cresmd {

template <typename T>
struct AdamState {
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
  std::int64_t step = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
};

// One bias-corrected Adam update of every tensor in `params`, in place.
// The moment buffers are sized lazily on the first step; later calls must
// pass the same parameters in the same order.
template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state, T lr);

extern template void adam_step(std::span<Tensor<float>>, AdamState<float>&, float);
extern template void adam_step(std::span<Tensor<double>>, AdamState<double>&, double);

}  // namespace cresmd
