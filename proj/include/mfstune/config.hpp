#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "mfstune/geometry.hpp"
#include "mfstune/mfs.hpp"
#include "mfstune/sampling.hpp"
#include "mfstune/tuner.hpp"

namespace mfstune {

enum class ObjectiveKind { mfs, synthetic };

/// Smooth single-peak test objective on unit-cube theta coordinates, plus
/// Gaussian noise driven by the sampled dipole.
struct SyntheticSpec {
  std::array<double, kThetaDim> peak_center{0.3, 0.6, 0.4, 0.7, 0.5};
  double peak_width = 0.4;
  double peak_height = 3.0;
  double baseline = 0.0;
  double noise_sd = 1.3;
};

struct ExperimentConfig {
  std::string preset = "desk";
  HeadModel head{};
  std::size_t n_colloc = 150;
  CenterCounts counts{};
  bool balance_rows = true;
  double svd_tol = 1e-12;
  double rank_tol = 0.0;
  double geom_margin = kDefaultGeomMargin;
  std::size_t k_test = 200;
  ThetaBounds bounds{};

  int j_max = 200;
  int n_avg = 10;
  int n_min = 3;
  int j_init = 50;
  Strategy strategy = Strategy::sko;
  bool preemptive = true;
  int initial_design = 0;
  bool pooled_includes_current = false;
  int max_consecutive_failures = 1000;
  int gp_restarts = 8;
  std::size_t suggest_pool = 2048;

  // Catalog index 1..6, or 0 with an inline region.
  int region_index = 1;
  std::optional<DipoleRegion> region_inline;
  double depth_margin = 0.005;
  double dipole_magnitude = 1.0;

  double oracle_tol = kDefaultOracleTol;
  int oracle_max_degree = kDefaultMaxDegree;
  MetricOptions metric{};

  ObjectiveKind objective = ObjectiveKind::mfs;
  SyntheticSpec synthetic{};

  int repetitions = 10;
  std::uint64_t seed = 1;
  std::string output = "out";

  static ExperimentConfig desk();
  static ExperimentConfig paper();
  static ExperimentConfig from_preset(const std::string& name);

  DipoleRegion region() const;
  MfsOptions mfs_options() const;
  /// Tuner settings for this config; a standard (non-preemptive) run uses
  /// n_min = n_avg.
  TunerConfig tuner_config() const;

  /// Throws ConfigError if any module invariant is violated.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);

/// Missing keys take the values of the named "preset" (desk if absent).
/// Unknown keys and type mismatches throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::string& path);

nlohmann::json region_to_json(const DipoleRegion& region);
DipoleRegion region_from_json(const nlohmann::json& j);

}  // namespace mfstune
