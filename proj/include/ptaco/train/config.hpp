#pragma once
// Plain-text key = value run configuration.
//
// Lines are "key = value"; '#' starts a comment; blank lines are ignored.
// Every key is listed by config_keys() with its default.

#include <map>
#include <string>
#include <vector>

#include "ptaco/model/model.hpp"
#include "ptaco/train/optim.hpp"

namespace ptaco::train {

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t batch_size = 16;
  std::size_t total_steps = 1200;
  double base_lr = 0.1;
  double momentum = 0.99;
  double clip_norm = 0.2;
  double lambda_dur = 1.0;
  LrSchedule lr;
  KlSchedule kl;
  Precision precision = Precision::kStandard;
  std::size_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::size_t log_every = 1;
};

struct RunConfig {
  model::ModelConfig model;
  TrainConfig train;
};

struct ConfigKey {
  std::string name;
  std::string help;
};
const std::vector<ConfigKey>& config_keys();

// Parses and validates. Throws ValueError listing every problem at once:
// unknown keys, malformed values, inconsistent schedules, and, for the fine
// variant, missing beta schedule keys. `overrides` are applied after the
// file and may repeat file keys.
using Overrides = std::vector<std::pair<std::string, std::string>>;
RunConfig parse_config(const std::string& text, const Overrides& overrides = {});
RunConfig load_config(const std::string& path, const Overrides& overrides = {});

// Every key with its current value, in config_keys() order.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);
std::string format_config(const RunConfig& config);

// Problems that do not depend on the file syntax.
std::vector<std::string> validate(const RunConfig& config);

}  // namespace ptaco::train
