#pragma once

#include <string>

#include "dgr/synthdata.hpp"
#include "dgr/training.hpp"

namespace dgr {

// Flat key=value configuration covering data generation, networks, loss
// weights and training. Every key has a default; unknown keys are an error.
// The schema is documented in docs/config.md.
struct RunConfig {
  DatasetConfig data;
  TrainConfig train;

  RunConfig();

  // Throws ConfigError naming the key on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);

  // The fully resolved configuration as sorted key=value lines.
  std::string echo() const;
  void write_echo(const std::string& path) const;
};

}  // namespace dgr
