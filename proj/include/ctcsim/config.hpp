// Run configuration: plain-text "key = value" file with [section] headers
// mirroring module names, environment overrides (CTCSIM_SECTION_KEY), and
// command-line overrides. Unknown keys are rejected; every run can emit a
// resolved snapshot.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctcsim/core.hpp"
#include "ctcsim/cps.hpp"
#include "ctcsim/ctc_ops.hpp"
#include "ctcsim/simulator.hpp"
#include "ctcsim/teacher.hpp"

namespace ctcsim {

class RunConfig {
 public:
  /// Built-in defaults for every known key.
  static RunConfig defaults();

  /// Parses an INI-style file over the current values.
  void load_file(const std::string& path);
  /// Applies CTCSIM_<SECTION>_<KEY> environment variables.
  void apply_env();
  /// Applies one "section.key=value" override.
  void apply_override(const std::string& assignment);

  const std::string& get(const std::string& key) const;  // "section.key"
  void set(const std::string& key, const std::string& value);
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;

  // Assembled module configs.
  Vocab vocab() const;
  SeedSpec seed_spec() const;
  WerBinScheme scheme() const;
  LsdConfig lsd() const;
  CpsConfig cps() const;
  TeacherConfig teacher() const;
  SimArch arch() const;
  TrainConfig train_config() const;
  int t_train() const;
  int workers() const;

  /// Resolved configuration in canonical key order, parseable by load_file.
  std::string snapshot() const;

 private:
  std::map<std::string, std::string> values_;  // canonical map, known keys only
};

/// Writes `cfg.snapshot()` next to an output file as <path>.config.ini.
void write_config_snapshot(const RunConfig& cfg, const std::string& out_path);

}  // namespace ctcsim
