#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cresmd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major N-d array with an optional gradient buffer.
//
// Tensor is a handle: copies share the same storage, which is how
// parameters, tape entries and callers all refer to one buffer. Use clone()
// for an independent copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  bool same(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<T> grad() { return impl_->grad; }
  std::span<const T> grad() const { return impl_->grad; }
  // Allocates a zeroed gradient buffer on first use.
  std::span<T> ensure_grad();
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); impl_->grad.shrink_to_fit(); }

  Tensor clone() const;
  Tensor detach() const;

 private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  std::shared_ptr<Impl> impl_;
};

// Define-by-run record of differentiable operations.
//
// Entries are appended in execution order, so inputs always precede their
// consumers; backward() walks them in exact reverse order. A tape in
// inference mode records nothing and intermediate tensors are released as
// soon as the caller drops them.
template <typename T>
class Tape {
 public:
  enum class Mode { kRecord, kInference };

  // Receives the gradient of the entry's output and accumulates into the
  // gradients of whichever inputs require them.
  using BackwardFn = std::function<void(std::span<const T> out_grad)>;

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == Mode::kRecord; }
  std::size_t size() const noexcept { return entries_.size(); }

  // Whether an op over `inputs` must be recorded.
  bool wants(std::initializer_list<const Tensor<T>*> inputs) const;

  void record(std::vector<Tensor<T>> inputs, Tensor<T> output, BackwardFn fn);

  // Seeds d(loss)/d(loss) = seed and propagates to every reachable tensor
  // that requires grad. Gradients accumulate, so several losses may be
  // back-propagated into the same parameters before an optimizer step.
  void backward(const Tensor<T>& loss, T seed = T(1));

  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    BackwardFn fn;
  };

  Mode mode_;
  std::vector<Entry> entries_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace cresmd
