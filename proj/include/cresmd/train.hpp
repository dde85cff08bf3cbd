#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cresmd/degradation.hpp"
#include "cresmd/image.hpp"
#include "cresmd/model.hpp"
#include "cresmd/sampler.hpp"

namespace cresmd {

// Defaults are the desk-scale setup; paper() restores the full-size one.
struct TrainConfig {
  ArchConfig arch = ArchConfig::desk();
  DegradationSpace space = DegradationSpace::desk_2d();
  SamplePlan plan;
  int crop = 48;
  int batch = 8;
  double lr = 5e-4;
  int lr_halving_interval = 2000;
  int iterations = 10000;
  std::uint64_t seed = 1;
  // 0 writes the checkpoint only at the end.
  int checkpoint_interval = 0;
  std::filesystem::path checkpoint_path;
  // Optional CSV copy of the iteration log.
  std::filesystem::path log_path;

  static TrainConfig paper();

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults. arch.condition_dim defaults to the
  // number of space dimensions.
  static TrainConfig from_json(const nlohmann::json& j);
};

TrainConfig load_train_config(const std::filesystem::path& path);

// lr0 * 2^-floor(t / interval)
double learning_rate(const TrainConfig& config, int iteration);

struct TrainLogEntry {
  int iteration = 0;
  double loss = 0.0;  // batch-mean L1
  double lr = 0.0;
};

using TrainCallback = std::function<void(const TrainLogEntry&)>;

struct TrainResult {
  CResMDModel<float> model;
  std::vector<TrainLogEntry> log;
};

// Joint training of the base and condition networks on beta-sampled
// degradations. Fully determined by the config (including its seed) and the
// dataset. Throws NumericError carrying the iteration and lr when the loss
// stops being finite.
TrainResult train(const TrainConfig& config, std::span<const Image> dataset,
                  const TrainCallback& on_iteration = {});

// Base network alone, every connection weight fixed to 1, trained on one
// degradation.
TrainResult train_baseline(const TrainConfig& config, std::span<const Image> dataset,
                           const DegradationSpec& fixed, const TrainCallback& on_iteration = {});

}  // namespace cresmd
