#pragma once

// Run configuration: INI-style sections of key = value pairs, validated
// before any computation. Unknown sections or keys are rejected.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "kepreg/averaging.hpp"

namespace kepreg {

struct SeedConfig {
  std::string preset = "circular";  // general | circular | rectilinear | random
  double alpha = 0.7853981633974483;
  double phase_z = 0.0;
  double phase_w = 1.5707963267948966;
  bool prograde = false;
  double t0 = 0.0;
  int count = 1;  // random seeds per k
};

struct RunConfig {
  Dim dim = Dim::Planar;
  double T = 6.283185307179586;
  std::uint64_t random_seed = 1;
  std::string output = ".";
  int jobs = 1;

  PerturbationSpec perturbation{"none", {}};

  std::vector<int> k_list{1};
  int l = 0;  // theorem-demo count; 0 selects max(k_list)

  double eps = 0.0;
  std::vector<double> eps_schedule;  // continuation targets; empty means {eps}

  IntegratorConfig integrator;
  ShootingOptions shooting;
  int scan_size = 6;

  SeedConfig seed;

  int flow_periods = 1;

  int certify_count = 100;
  double certify_min_angle = 1e-3;

  int samples = 400;
  double window = 1e-6;
  std::vector<double> mu_list{0.1, 0.05, 0.025, 0.0125, 0.00625};

  std::vector<double> average_eps{1e-2, 1e-3, 1e-4};

  /// Throws ConfigError on any inconsistent value.
  void validate() const;
  /// Fully resolved configuration as (section.key, value) pairs.
  std::vector<std::pair<std::string, std::string>> echo() const;
  /// echo() formatted as "section.key = value" lines.
  std::vector<std::string> header_lines() const;

  ManifoldSpec manifold(int k) const;
  PerturbationPtr make_U() const;
  std::vector<double> eps_targets() const;
  SeedParams seed_params() const;
  /// Forcing of a forced_kepler perturbation (ConfigError otherwise).
  FourierForcing forcing() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Comma-separated list parsing used by the config and the perturbation
/// catalog; throws ConfigError on malformed entries.
std::vector<double> parse_real_list(const std::string& key, const std::string& text);
std::vector<int> parse_int_list(const std::string& key, const std::string& text);

}  // namespace kepreg
