#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mixcam/classnet.hpp"
#include "mixcam/evalkit.hpp"
#include "mixcam/mixaug.hpp"
#include "mixcam/objective.hpp"
#include "mixcam/synthdata.hpp"

namespace mixcam {

// Resolved run settings. Every field has a default; a fully-default config
// trains end to end. Precedence: built-in defaults, then the config file,
// then command-line flags.
struct RunConfig {
  DatasetConfig data;
  ClassNetConfig model;
  AugmentConfig augment;
  LossWeights loss;
  PseudoLabelConfig pseudo;

  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 5e-4;
  bool mixup = true;
  std::uint64_t seed = 42;

  void validate() const;
};

// Known flat keys, in serialization order.
const std::vector<std::string>& config_keys();

// Applies "key = value"; throws a config error for unknown keys or
// unparseable values.
void config_set(RunConfig& cfg, const std::string& key, const std::string& value);

// Flat UTF-8 "key = value" lines with '#' comments.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace mixcam
