#include "cresmd/adam.hpp"

#include <cmath>

#include "cresmd/error.hpp"

namespace cresmd {

template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state, T lr) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw GraphError("adam_step: parameter " + std::to_string(i) + " " +
                       shape_to_string(params[i].shape()) + " has no gradient");
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), T(0));
      state.second_moment.emplace_back(p.numel(), T(0));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw GraphError("adam_step: parameter list changed between steps");
  }

  ++state.step;
  const T correction1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step));
  const T correction2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].data();
    auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != data.size()) throw GraphError("adam_step: moment size does not match parameter");
    for (std::size_t j = 0; j < data.size(); ++j) {
      const T g = grad[j];
      m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * g * g;
      const T m_hat = m[j] / correction1;
      const T v_hat = v[j] / correction2;
      data[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

template void adam_step(std::span<Tensor<float>>, AdamState<float>&, float);
template void adam_step(std::span<Tensor<double>>, AdamState<double>&, double);

}  // namespace cresmd
