#include "cresmd/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cresmd/adam.hpp"
#include "cresmd/checkpoint.hpp"
#include "cresmd/error.hpp"
#include "cresmd/ops.hpp"

namespace cresmd {

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.arch = ArchConfig::paper();
  c.space = DegradationSpace::paper_2d();
  c.crop = 64;
  c.batch = 16;
  c.lr_halving_interval = 200000;
  c.iterations = 1000000;
  return c;
}

void TrainConfig::validate() const {
  arch.validate();
  if (static_cast<std::size_t>(arch.condition_dim) != space.size()) {
    throw RangeError("arch.condition_dim (" + std::to_string(arch.condition_dim) +
                     ") must equal the number of space dimensions (" + std::to_string(space.size()) + ")");
  }
  plan.validate(space);
  if (crop < 8 || crop % 2 != 0) throw RangeError("crop must be even and at least 8, got " + std::to_string(crop));
  if (batch <= 0) throw RangeError("batch must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw RangeError("lr must be positive");
  if (lr_halving_interval <= 0) throw RangeError("lr_halving_interval must be positive");
  if (iterations < 0) throw RangeError("iterations must be non-negative");
  if (checkpoint_interval < 0) throw RangeError("checkpoint_interval must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"arch", arch.to_json()},
          {"space", space.to_json()},
          {"sampling", plan.to_json()},
          {"crop", crop},
          {"batch", batch},
          {"lr", lr},
          {"lr_halving_interval", lr_halving_interval},
          {"iterations", iterations},
          {"seed", seed},
          {"checkpoint_interval", checkpoint_interval},
          {"checkpoint", checkpoint_path.string()},
          {"log", log_path.string()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("training config must be a JSON object");
  TrainConfig c;
  try {
    if (j.contains("space")) c.space = DegradationSpace::from_json(j.at("space"));
    if (j.contains("arch")) {
      c.arch = ArchConfig::from_json(j.at("arch"));
      if (!j.at("arch").contains("condition_dim")) c.arch.condition_dim = static_cast<int>(c.space.size());
    } else {
      c.arch.condition_dim = static_cast<int>(c.space.size());
    }
    if (j.contains("sampling")) c.plan = SamplePlan::from_json(j.at("sampling"));
    c.crop = j.value("crop", c.crop);
    c.batch = j.value("batch", c.batch);
    c.lr = j.value("lr", c.lr);
    c.lr_halving_interval = j.value("lr_halving_interval", c.lr_halving_interval);
    c.iterations = j.value("iterations", c.iterations);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    c.checkpoint_path = j.value("checkpoint", std::string());
    c.log_path = j.value("log", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return TrainConfig::from_json(j);
}

double learning_rate(const TrainConfig& config, int iteration) {
  return std::ldexp(config.lr, -(iteration / config.lr_halving_interval));
}

namespace {

std::string format_lr(double lr) {
  std::ostringstream s;
  s.precision(6);
  s << lr;
  return s.str();
}

TrainResult run_training(const TrainConfig& config, std::span<const Image> dataset, ModelKind kind,
                         const SamplePlan& plan, const TrainCallback& on_iteration) {
  config.validate();
  plan.validate(config.space);
  if (dataset.empty()) throw RangeError("training dataset is empty");
  for (const auto& img : dataset) {
    if (img.channels != config.arch.image_channels) {
      throw RangeError("dataset image has " + std::to_string(img.channels) + " channels, model expects " +
                       std::to_string(config.arch.image_channels));
    }
  }

  Rng master(config.seed);
  const std::uint64_t init_seed = master.fork_seed();
  Rng data_rng(master.fork_seed());

  CResMDModel<float> model(config.arch, config.space, kind, init_seed);
  model.set_requires_grad(true);
  auto params = model.parameters();
  AdamState<float> adam;

  std::ofstream log_file;
  if (!config.log_path.empty()) {
    log_file.open(config.log_path);
    if (!log_file) throw IoError("cannot write log " + config.log_path.string());
    log_file << "iter,loss,lr\n";
  }

  std::vector<TrainLogEntry> log;
  log.reserve(static_cast<std::size_t>(config.iterations));
  const float batch_weight = 1.0f / static_cast<float>(config.batch);

  for (int t = 0; t < config.iterations; ++t) {
    const double lr = learning_rate(config, t);
    const TrainBatch batch = make_batch(dataset, plan, config.space, config.crop, config.batch, data_rng);
    model.zero_grad();
    double loss_sum = 0.0;
    try {
      for (std::size_t b = 0; b < batch.size(); ++b) {
        Tape<float> tape;
        const auto x = image_to_tensor<float>(batch.degraded[b]);
        const auto target = image_to_tensor<float>(batch.clean[b]);
        const auto& cond = batch.conditions[b];
        const auto z = Tensor<float>::from({cond.size()}, std::vector<float>(cond.begin(), cond.end()));
        const auto loss = ops::l1_loss(tape, model_forward(tape, model, x, z), target);
        loss_sum += loss.item();
        tape.backward(loss, batch_weight);
      }
    } catch (const NumericError& e) {
      throw NumericError("training diverged at iteration " + std::to_string(t) + " (lr " + format_lr(lr) +
                         "): " + e.what());
    }
    const double loss = loss_sum / static_cast<double>(batch.size());
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite loss at iteration " + std::to_string(t) + " (lr " + format_lr(lr) + ")");
    }
    adam_step(std::span<Tensor<float>>(params), adam, static_cast<float>(lr));

    const TrainLogEntry entry{t, loss, lr};
    log.push_back(entry);
    if (log_file) log_file << t << ',' << loss << ',' << lr << '\n';
    if (on_iteration) on_iteration(entry);
    if (config.checkpoint_interval > 0 && !config.checkpoint_path.empty() &&
        (t + 1) % config.checkpoint_interval == 0) {
      save_checkpoint(model, config.checkpoint_path);
    }
  }

  for (auto& p : params) {
    p.clear_grad();
    p.set_requires_grad(false);
  }
  if (!config.checkpoint_path.empty()) save_checkpoint(model, config.checkpoint_path);
  return TrainResult{std::move(model), std::move(log)};
}

}  // namespace

TrainResult train(const TrainConfig& config, std::span<const Image> dataset, const TrainCallback& on_iteration) {
  return run_training(config, dataset, ModelKind::kConditional, config.plan, on_iteration);
}

TrainResult train_baseline(const TrainConfig& config, std::span<const Image> dataset,
                           const DegradationSpec& fixed, const TrainCallback& on_iteration) {
  config.space.validate(fixed);
  SamplePlan plan = config.plan;
  plan.pinned = fixed;
  return run_training(config, dataset, ModelKind::kBaseline, plan, on_iteration);
}

}  // namespace cresmd
