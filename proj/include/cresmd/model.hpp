#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cresmd/degradation.hpp"
#include "cresmd/image.hpp"
#include "cresmd/tensor.hpp"

namespace cresmd {

struct ArchConfig {
  int channels = 32;        // feature maps per conv layer
  int blocks = 8;           // residual building blocks
  int groups = 8;           // local controllable connections; divides blocks
  int image_channels = 3;
  int condition_dim = 2;    // length of z

  // 64 filters, 32 blocks each with its own connection, 2-D condition.
  static ArchConfig paper();
  static ArchConfig desk();

  int blocks_per_group() const { return blocks / groups; }
  void validate() const;

  nlohmann::json to_json() const;
  static ArchConfig from_json(const nlohmann::json& j);
  bool operator==(const ArchConfig&) const = default;
};

// Conditional models get their connection weights from the condition
// network; baselines hard-wire every alpha to 1 and have no condition net.
enum class ModelKind { kConditional, kBaseline };

std::string model_kind_name(ModelKind kind);

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
struct ConvLayer {
  Tensor<T> weight;  // [out, in, 3, 3]
  Tensor<T> bias;    // [out]
};

template <typename T>
struct ResidualBlock {
  ConvLayer<T> first;
  ConvLayer<T> second;
};

template <typename T>
class CResMDModel {
 public:
  // Kaiming-uniform (fan-in) convolutions with zero biases; Xavier-uniform
  // condition layers.
  CResMDModel(ArchConfig arch, DegradationSpace space, ModelKind kind, std::uint64_t seed);

  const ArchConfig& arch() const { return arch_; }
  const DegradationSpace& space() const { return space_; }
  ModelKind kind() const { return kind_; }

  const ConvLayer<T>& conv_in() const { return conv_in_; }
  const ConvLayer<T>& conv_down() const { return conv_down_; }
  const std::vector<ResidualBlock<T>>& blocks() const { return blocks_; }
  const ConvLayer<T>& conv_up() const { return conv_up_; }
  const ConvLayer<T>& conv_post() const { return conv_post_; }
  const ConvLayer<T>& conv_out() const { return conv_out_; }
  // [C, N] per group, then the global [C_img, N].
  const std::vector<Tensor<T>>& local_condition() const { return cond_local_; }
  const Tensor<T>& global_condition() const { return cond_global_; }

  // Fixed order shared by optimizers and checkpoints.
  std::vector<NamedTensor<T>> named_parameters() const;
  std::vector<Tensor<T>> parameters() const;

  void set_requires_grad(bool flag);
  void zero_grad();

  // Deep copy converted to another precision.
  template <typename U>
  CResMDModel<U> cast() const;

 private:
  template <typename U>
  friend class CResMDModel;

  CResMDModel(ArchConfig arch, DegradationSpace space, ModelKind kind);

  ArchConfig arch_;
  DegradationSpace space_;
  ModelKind kind_;
  ConvLayer<T> conv_in_;
  ConvLayer<T> conv_down_;
  std::vector<ResidualBlock<T>> blocks_;
  ConvLayer<T> conv_up_;
  ConvLayer<T> conv_post_;
  ConvLayer<T> conv_out_;
  std::vector<Tensor<T>> cond_local_;
  Tensor<T> cond_global_;
};

template <typename T>
struct ConditionAlphas {
  Tensor<T> global;              // [C_img]
  std::vector<Tensor<T>> local;  // G x [C]
};

// alpha = W z for every controllable connection; no bias, no activation.
template <typename T>
ConditionAlphas<T> condition_forward(Tape<T>& tape, const CResMDModel<T>& model, const Tensor<T>& z);

// y = residual * alpha + x, per channel.
template <typename T>
Tensor<T> controllable_residual(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& residual,
                                const Tensor<T>& alpha);

struct ForwardOptions {
  // Multiplies the global connection weights; used for the diagnostic sweep.
  double global_alpha_scale = 1.0;
};

// x: [C_img, H, W] with even H, W >= 8; z: [N] (ignored by baselines).
template <typename T>
Tensor<T> model_forward(Tape<T>& tape, const CResMDModel<T>& model, const Tensor<T>& x,
                        const Tensor<T>& z, ForwardOptions options = {});

struct ParamCount {
  std::size_t base = 0;
  std::size_t condition = 0;
  std::size_t total() const { return base + condition; }
};

template <typename T>
ParamCount param_count(const CResMDModel<T>& model);

// G*C*N + C_img*N.
std::size_t condition_param_count(const ArchConfig& arch);

// Inference on an image of any size: pads odd dimensions by edge
// replication, runs the network and crops back. Output clamped to [0,1].
Image restore_image(const CResMDModel<float>& model, const Image& input, const std::vector<double>& z,
                    ForwardOptions options = {});

// True when every entry lies in [0,1].
bool condition_in_unit_box(const std::vector<double>& z);

extern template class CResMDModel<float>;
extern template class CResMDModel<double>;

}  // namespace cresmd
