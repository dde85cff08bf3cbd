#include "cresmd/model.hpp"

#include <algorithm>
#include <cmath>

#include "cresmd/error.hpp"
#include "cresmd/ops.hpp"
#include "cresmd/rng.hpp"

namespace cresmd {

ArchConfig ArchConfig::paper() { return ArchConfig{64, 32, 32, 3, 2}; }

ArchConfig ArchConfig::desk() { return ArchConfig{32, 8, 8, 3, 2}; }

void ArchConfig::validate() const {
  if (channels <= 0 || channels % 4 != 0) {
    throw RangeError("channels must be a positive multiple of 4, got " + std::to_string(channels));
  }
  if (blocks <= 0) throw RangeError("blocks must be positive");
  if (groups <= 0 || blocks % groups != 0) {
    throw RangeError("groups (" + std::to_string(groups) + ") must divide blocks (" + std::to_string(blocks) + ")");
  }
  if (image_channels != 1 && image_channels != 3) throw RangeError("image_channels must be 1 or 3");
  if (condition_dim <= 0) throw RangeError("condition_dim must be positive");
}

nlohmann::json ArchConfig::to_json() const {
  return {{"channels", channels},
          {"blocks", blocks},
          {"groups", groups},
          {"image_channels", image_channels},
          {"condition_dim", condition_dim}};
}

ArchConfig ArchConfig::from_json(const nlohmann::json& j) {
  ArchConfig a;
  try {
    a.channels = j.value("channels", a.channels);
    a.blocks = j.value("blocks", a.blocks);
    a.groups = j.value("groups", a.blocks);
    a.image_channels = j.value("image_channels", a.image_channels);
    a.condition_dim = j.value("condition_dim", a.condition_dim);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad arch section: ") + e.what());
  }
  return a;
}

std::string model_kind_name(ModelKind kind) {
  return kind == ModelKind::kConditional ? "conditional" : "baseline";
}

namespace {

// Shrinks the last layer of every residual branch so a fresh network starts
// close to the identity.
constexpr double kResidualInitGain = 0.1;

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<T> values(shape_numel(shape));
  for (T& v : values) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  return Tensor<T>::from(std::move(shape), std::move(values), true);
}

template <typename T>
ConvLayer<T> make_conv(int in, int out, Rng& rng, double gain = 1.0) {
  const double fan_in = static_cast<double>(in) * 9.0;
  ConvLayer<T> layer;
  layer.weight = uniform_tensor<T>({static_cast<std::size_t>(out), static_cast<std::size_t>(in), 3, 3},
                                   gain * std::sqrt(6.0 / fan_in), rng);
  layer.bias = Tensor<T>::zeros({static_cast<std::size_t>(out)}, true);
  return layer;
}

template <typename T>
Tensor<T> conv(Tape<T>& tape, const Tensor<T>& x, const ConvLayer<T>& layer, int stride = 1) {
  return ops::conv2d(tape, x, layer.weight, layer.bias, ops::Conv2dOptions{stride, 1});
}

template <typename T, typename U>
Tensor<U> cast_tensor(const Tensor<T>& t) {
  std::vector<U> values(t.data().begin(), t.data().end());
  return Tensor<U>::from(t.shape(), std::move(values), t.requires_grad());
}

template <typename T, typename U>
ConvLayer<U> cast_conv(const ConvLayer<T>& c) {
  return ConvLayer<U>{cast_tensor<T, U>(c.weight), cast_tensor<T, U>(c.bias)};
}

}  // namespace

template <typename T>
CResMDModel<T>::CResMDModel(ArchConfig arch, DegradationSpace space, ModelKind kind)
    : arch_(arch), space_(std::move(space)), kind_(kind) {
  arch_.validate();
  if (space_.size() != static_cast<std::size_t>(arch_.condition_dim)) {
    throw RangeError("condition_dim " + std::to_string(arch_.condition_dim) + " does not match the " +
                     std::to_string(space_.size()) + "-D degradation space");
  }
}

template <typename T>
CResMDModel<T>::CResMDModel(ArchConfig arch, DegradationSpace space, ModelKind kind, std::uint64_t seed)
    : CResMDModel(arch, std::move(space), kind) {
  Rng rng(seed);
  const int c = arch_.channels;
  conv_in_ = make_conv<T>(arch_.image_channels, c, rng);
  conv_down_ = make_conv<T>(c, c, rng);
  blocks_.reserve(arch_.blocks);
  for (int b = 0; b < arch_.blocks; ++b) {
    ResidualBlock<T> block;
    block.first = make_conv<T>(c, c, rng);
    block.second = make_conv<T>(c, c, rng, kResidualInitGain);
    blocks_.push_back(std::move(block));
  }
  conv_up_ = make_conv<T>(c, 4 * c, rng);
  conv_post_ = make_conv<T>(c, c, rng);
  conv_out_ = make_conv<T>(c, arch_.image_channels, rng, kResidualInitGain);
  if (kind_ == ModelKind::kConditional) {
    const auto n = static_cast<std::size_t>(arch_.condition_dim);
    const double local_bound = std::sqrt(6.0 / static_cast<double>(n + c));
    for (int g = 0; g < arch_.groups; ++g) {
      cond_local_.push_back(uniform_tensor<T>({static_cast<std::size_t>(c), n}, local_bound, rng));
    }
    const double global_bound = std::sqrt(6.0 / static_cast<double>(n + arch_.image_channels));
    cond_global_ = uniform_tensor<T>({static_cast<std::size_t>(arch_.image_channels), n}, global_bound, rng);
  }
}

template <typename T>
std::vector<NamedTensor<T>> CResMDModel<T>::named_parameters() const {
  std::vector<NamedTensor<T>> out;
  const auto push_conv = [&](const std::string& name, const ConvLayer<T>& layer) {
    out.push_back({name + ".weight", layer.weight});
    out.push_back({name + ".bias", layer.bias});
  };
  push_conv("conv_in", conv_in_);
  push_conv("conv_down", conv_down_);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    push_conv("blocks." + std::to_string(b) + ".conv1", blocks_[b].first);
    push_conv("blocks." + std::to_string(b) + ".conv2", blocks_[b].second);
  }
  push_conv("conv_up", conv_up_);
  push_conv("conv_post", conv_post_);
  push_conv("conv_out", conv_out_);
  for (std::size_t g = 0; g < cond_local_.size(); ++g) {
    out.push_back({"condition.local." + std::to_string(g) + ".weight", cond_local_[g]});
  }
  if (cond_global_.defined()) out.push_back({"condition.global.weight", cond_global_});
  return out;
}

template <typename T>
std::vector<Tensor<T>> CResMDModel<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (auto& p : named_parameters()) out.push_back(p.tensor);
  return out;
}

template <typename T>
void CResMDModel<T>::set_requires_grad(bool flag) {
  for (auto& p : parameters()) p.set_requires_grad(flag);
}

template <typename T>
void CResMDModel<T>::zero_grad() {
  for (auto& p : parameters()) p.zero_grad();
}

template <typename T>
template <typename U>
CResMDModel<U> CResMDModel<T>::cast() const {
  CResMDModel<U> out(arch_, space_, kind_);
  out.conv_in_ = cast_conv<T, U>(conv_in_);
  out.conv_down_ = cast_conv<T, U>(conv_down_);
  for (const auto& b : blocks_) {
    out.blocks_.push_back(ResidualBlock<U>{cast_conv<T, U>(b.first), cast_conv<T, U>(b.second)});
  }
  out.conv_up_ = cast_conv<T, U>(conv_up_);
  out.conv_post_ = cast_conv<T, U>(conv_post_);
  out.conv_out_ = cast_conv<T, U>(conv_out_);
  for (const auto& w : cond_local_) out.cond_local_.push_back(cast_tensor<T, U>(w));
  if (cond_global_.defined()) out.cond_global_ = cast_tensor<T, U>(cond_global_);
  return out;
}

template <typename T>
ConditionAlphas<T> condition_forward(Tape<T>& tape, const CResMDModel<T>& model, const Tensor<T>& z) {
  if (model.kind() != ModelKind::kConditional) throw GraphError("baseline models have no condition network");
  const auto n = static_cast<std::size_t>(model.arch().condition_dim);
  if (z.rank() != 1 || z.dim(0) != n) {
    throw ShapeError("condition vector must have " + std::to_string(n) + " entries, got " +
                     shape_to_string(z.shape()));
  }
  ConditionAlphas<T> alphas;
  alphas.global = ops::linear_nobias(tape, z, model.global_condition());
  for (const auto& w : model.local_condition()) alphas.local.push_back(ops::linear_nobias(tape, z, w));
  return alphas;
}

template <typename T>
Tensor<T> controllable_residual(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& residual,
                                const Tensor<T>& alpha) {
  return ops::add(tape, ops::scale_channels(tape, residual, alpha), x);
}

template <typename T>
Tensor<T> model_forward(Tape<T>& tape, const CResMDModel<T>& model, const Tensor<T>& x, const Tensor<T>& z,
                        ForwardOptions options) {
  const ArchConfig& arch = model.arch();
  if (x.rank() != 3 || x.dim(0) != static_cast<std::size_t>(arch.image_channels)) {
    throw ShapeError("model input must be [" + std::to_string(arch.image_channels) + ",H,W], got " +
                     shape_to_string(x.shape()));
  }
  if (x.dim(1) < 8 || x.dim(2) < 8) throw ShapeError("model input must be at least 8x8");
  if (x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) throw ShapeError("model input needs even height and width");

  const bool conditional = model.kind() == ModelKind::kConditional;
  ConditionAlphas<T> alphas;
  if (conditional) alphas = condition_forward(tape, model, z);

  Tensor<T> h = conv(tape, x, model.conv_in());
  h = ops::relu(tape, conv(tape, h, model.conv_down(), 2));

  const int per_group = arch.blocks_per_group();
  const auto& blocks = model.blocks();
  for (int g = 0; g < arch.groups; ++g) {
    const Tensor<T> group_input = h;
    Tensor<T> cursor = h;
    Tensor<T> residual;
    for (int i = 0; i < per_group; ++i) {
      const auto& block = blocks[static_cast<std::size_t>(g * per_group + i)];
      Tensor<T> body = conv(tape, ops::relu(tape, conv(tape, cursor, block.first)), block.second);
      // Inner blocks of a multi-block group keep plain residual links; the
      // group's branch is the sum of their bodies.
      residual = residual.defined() ? ops::add(tape, residual, body) : body;
      if (i + 1 < per_group) cursor = ops::add(tape, cursor, body);
    }
    h = conditional ? controllable_residual(tape, group_input, residual, alphas.local[static_cast<std::size_t>(g)])
                    : ops::add(tape, group_input, residual);
  }

  Tensor<T> u = ops::relu(tape, conv(tape, h, model.conv_up()));
  u = ops::pixel_shuffle(tape, u, 2);
  u = ops::relu(tape, conv(tape, u, model.conv_post()));
  Tensor<T> out = conv(tape, u, model.conv_out());

  if (!conditional) return ops::add(tape, x, out);
  Tensor<T> global_alpha = alphas.global;
  if (options.global_alpha_scale != 1.0) {
    auto scale = Tensor<T>::full(global_alpha.shape(), static_cast<T>(options.global_alpha_scale));
    global_alpha = ops::mul(tape, global_alpha, scale);
  }
  return controllable_residual(tape, x, out, global_alpha);
}

template <typename T>
ParamCount param_count(const CResMDModel<T>& model) {
  ParamCount count;
  for (const auto& p : model.named_parameters()) {
    if (p.name.rfind("condition.", 0) == 0) {
      count.condition += p.tensor.numel();
    } else {
      count.base += p.tensor.numel();
    }
  }
  return count;
}

std::size_t condition_param_count(const ArchConfig& arch) {
  const auto g = static_cast<std::size_t>(arch.groups);
  const auto c = static_cast<std::size_t>(arch.channels);
  const auto n = static_cast<std::size_t>(arch.condition_dim);
  const auto c_img = static_cast<std::size_t>(arch.image_channels);
  return g * c * n + c_img * n;
}

bool condition_in_unit_box(const std::vector<double>& z) {
  return std::all_of(z.begin(), z.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

Image restore_image(const CResMDModel<float>& model, const Image& input, const std::vector<double>& z,
                    ForwardOptions options) {
  if (input.channels != model.arch().image_channels) {
    throw ShapeError("image has " + std::to_string(input.channels) + " channels, model expects " +
                     std::to_string(model.arch().image_channels));
  }
  if (z.size() != static_cast<std::size_t>(model.arch().condition_dim)) {
    throw ShapeError("condition vector must have " + std::to_string(model.arch().condition_dim) +
                     " entries, got " + std::to_string(z.size()));
  }
  const int h = std::max(8, input.height + input.height % 2);
  const int w = std::max(8, input.width + input.width % 2);
  Image padded = Image::zeros(input.channels, h, w);
  for (int c = 0; c < input.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        padded.at(c, y, x) = input.at(c, std::min(y, input.height - 1), std::min(x, input.width - 1));
      }
    }
  }
  Tape<float> tape(Tape<float>::Mode::kInference);
  const auto z_tensor = Tensor<float>::from({z.size()}, std::vector<float>(z.begin(), z.end()));
  const auto out = model_forward(tape, model, image_to_tensor<float>(padded), z_tensor, options);
  const Image full = tensor_to_image(out);
  Image result = Image::zeros(input.channels, input.height, input.width);
  for (int c = 0; c < input.channels; ++c) {
    for (int y = 0; y < input.height; ++y) {
      for (int x = 0; x < input.width; ++x) result.at(c, y, x) = std::clamp(full.at(c, y, x), 0.0f, 1.0f);
    }
  }
  return result;
}

template class CResMDModel<float>;
template class CResMDModel<double>;
template CResMDModel<double> CResMDModel<float>::cast<double>() const;
template CResMDModel<float> CResMDModel<double>::cast<float>() const;
template CResMDModel<float> CResMDModel<float>::cast<float>() const;

#define CRESMD_INSTANTIATE_MODEL(T)                                                                      \
  template ConditionAlphas<T> condition_forward(Tape<T>&, const CResMDModel<T>&, const Tensor<T>&);      \
  template Tensor<T> controllable_residual(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> model_forward(Tape<T>&, const CResMDModel<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                   ForwardOptions);                                                      \
  template ParamCount param_count(const CResMDModel<T>&);

CRESMD_INSTANTIATE_MODEL(float)
CRESMD_INSTANTIATE_MODEL(double)

#undef CRESMD_INSTANTIATE_MODEL

}  // namespace cresmd
