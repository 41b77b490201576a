#pragma once

#include <string>

#include "maint/model.hpp"
#include "maint/training.hpp"

namespace maint {

// Flat key=value run configuration with dotted keys (e.g. model.J=3).
// Vocabulary sizes are filled from the dataset, not from the file.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t max_len = 20;
  std::size_t negatives = 100;
  std::uint64_t seed = 1;

  // Throws ConfigError on unknown keys or unparseable values.
  void apply(const std::string& key, const std::string& value);

  // key=value lines; '#' comments and blank lines allowed. Also accepts a
  // "key=value" override string directly via apply_override.
  void load_file(const std::string& path);
  void apply_override(const std::string& assignment);

  // The full effective configuration, one key=value per line.
  std::string echo() const;
};

}  // namespace maint
