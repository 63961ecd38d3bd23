#include "kepreg/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace kepreg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a finite number");
  }
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw ConfigError("key '" + key + "': cannot parse '" + text + "' as an integer");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a boolean");
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"run", {"dim", "T", "seed", "output", "jobs"}},
      {"manifold", {"k", "l"}},
      {"epsilon", {"eps", "schedule"}},
      {"integrator", {"rel_tol", "abs_tol", "max_step", "max_steps"}},
      {"shooting", {"segments", "max_iterations", "residual_tol", "step_tol", "rank_threshold", "eta", "scan"}},
      {"seed", {"preset", "alpha", "phase_z", "phase_w", "prograde", "t0", "count"}},
      {"flow", {"periods"}},
      {"certify", {"count", "min_angle"}},
      {"reconstruct", {"samples", "window", "mu"}},
      {"averaging", {"eps"}},
  };
  return s;
}

}  // namespace

std::vector<double> parse_real_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_real(key, item));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const long long v = to_integer(key, item);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw ConfigError("key '" + key + "': value out of range");
    }
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    if (section == "perturbation") {
      for (const auto& [key, node] : body) {
        if (key == "name") {
          c.perturbation.name = trim(node.data());
        } else {
          c.perturbation.params[key] = trim(node.data());
        }
      }
      continue;
    }
    const auto it = schema().find(section);
    if (it == schema().end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, node] : body) {
      if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
      const std::string name = section + "." + key;
      const std::string v = node.data();
      if (section == "run") {
        if (key == "dim") {
          const auto d = to_integer(name, v);
          if (d != 2 && d != 3) throw ConfigError("run.dim must be 2 or 3");
          c.dim = d == 2 ? Dim::Planar : Dim::Spatial;
        } else if (key == "T") {
          c.T = to_real(name, v);
        } else if (key == "seed") {
          const auto s = to_integer(name, v);
          if (s < 0) throw ConfigError("run.seed must be non-negative");
          c.random_seed = static_cast<std::uint64_t>(s);
        } else if (key == "output") {
          c.output = trim(v);
        } else if (key == "jobs") {
          c.jobs = static_cast<int>(to_integer(name, v));
        }
      } else if (section == "manifold") {
        if (key == "k") c.k_list = parse_int_list(name, v);
        if (key == "l") c.l = static_cast<int>(to_integer(name, v));
      } else if (section == "epsilon") {
        if (key == "eps") c.eps = to_real(name, v);
        if (key == "schedule") c.eps_schedule = parse_real_list(name, v);
      } else if (section == "integrator") {
        if (key == "rel_tol") c.integrator.rel_tol = to_real(name, v);
        if (key == "abs_tol") c.integrator.abs_tol = to_real(name, v);
        if (key == "max_step") {
          c.integrator.max_step = trim(v) == "inf" ? std::numeric_limits<double>::infinity() : to_real(name, v);
        }
        if (key == "max_steps") c.integrator.max_steps = to_integer(name, v);
      } else if (section == "shooting") {
        if (key == "segments") c.shooting.segments = static_cast<int>(to_integer(name, v));
        if (key == "max_iterations") c.shooting.max_iterations = static_cast<int>(to_integer(name, v));
        if (key == "residual_tol") c.shooting.residual_tol = to_real(name, v);
        if (key == "step_tol") c.shooting.step_tol = to_real(name, v);
        if (key == "rank_threshold") c.shooting.rank_threshold = to_real(name, v);
        if (key == "eta") c.shooting.eta = static_cast<int>(to_integer(name, v));
        if (key == "scan") c.scan_size = static_cast<int>(to_integer(name, v));
      } else if (section == "seed") {
        if (key == "preset") c.seed.preset = trim(v);
        if (key == "alpha") c.seed.alpha = to_real(name, v);
        if (key == "phase_z") c.seed.phase_z = to_real(name, v);
        if (key == "phase_w") c.seed.phase_w = to_real(name, v);
        if (key == "prograde") c.seed.prograde = to_bool(name, v);
        if (key == "t0") c.seed.t0 = to_real(name, v);
        if (key == "count") c.seed.count = static_cast<int>(to_integer(name, v));
      } else if (section == "flow") {
        c.flow_periods = static_cast<int>(to_integer(name, v));
      } else if (section == "certify") {
        if (key == "count") c.certify_count = static_cast<int>(to_integer(name, v));
        if (key == "min_angle") c.certify_min_angle = to_real(name, v);
      } else if (section == "reconstruct") {
        if (key == "samples") c.samples = static_cast<int>(to_integer(name, v));
        if (key == "window") c.window = to_real(name, v);
        if (key == "mu") c.mu_list = parse_real_list(name, v);
      } else if (section == "averaging") {
        c.average_eps = parse_real_list(name, v);
      }
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

void RunConfig::validate() const {
  if (!(T > 0)) throw ConfigError("run.T must be positive");
  if (jobs < 1) throw ConfigError("run.jobs must be >= 1");
  if (output.empty()) throw ConfigError("run.output must not be empty");
  if (k_list.empty()) throw ConfigError("manifold.k must not be empty");
  for (int k : k_list) {
    if (k < 1) throw ConfigError("manifold.k entries must be >= 1");
  }
  const int kmax = *std::max_element(k_list.begin(), k_list.end());
  if (l < 0 || l > kmax) throw ConfigError("manifold.l must be between 0 and max(manifold.k)");
  if (!(eps >= 0)) throw ConfigError("epsilon.eps must be non-negative");
  for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
    if (!(eps_schedule[i] > 0)) throw ConfigError("epsilon.schedule entries must be positive");
    if (i && !(eps_schedule[i] > eps_schedule[i - 1])) throw ConfigError("epsilon.schedule must be increasing");
  }
  integrator.validate();
  if (shooting.segments < 0) throw ConfigError("shooting.segments must be >= 0");
  if (shooting.max_iterations < 1) throw ConfigError("shooting.max_iterations must be >= 1");
  if (!(shooting.residual_tol > 0) || !(shooting.step_tol > 0)) throw ConfigError("shooting tolerances must be positive");
  if (!(shooting.rank_threshold > 0 && shooting.rank_threshold < 1)) {
    throw ConfigError("shooting.rank_threshold must lie in (0, 1)");
  }
  if (shooting.eta < 1) throw ConfigError("shooting.eta must be >= 1");
  if (scan_size < 1) throw ConfigError("shooting.scan must be >= 1");
  static const std::set<std::string> presets{"general", "circular", "rectilinear", "random"};
  if (!presets.count(seed.preset)) throw ConfigError("seed.preset must be general, circular, rectilinear or random");
  if (seed.count < 1) throw ConfigError("seed.count must be >= 1");
  if (flow_periods < 1) throw ConfigError("flow.periods must be >= 1");
  if (certify_count < 1) throw ConfigError("certify.count must be >= 1");
  if (!(certify_min_angle > 0)) throw ConfigError("certify.min_angle must be positive");
  if (samples < 8) throw ConfigError("reconstruct.samples must be >= 8");
  if (!(window >= 0 && window < 0.5)) throw ConfigError("reconstruct.window must lie in [0, 0.5)");
  for (double m : mu_list) {
    if (!(m > 0)) throw ConfigError("reconstruct.mu entries must be positive");
  }
  for (std::size_t i = 0; i < average_eps.size(); ++i) {
    if (!(average_eps[i] > 0)) throw ConfigError("averaging.eps entries must be positive");
    if (i && !(average_eps[i] < average_eps[i - 1])) throw ConfigError("averaging.eps must be decreasing");
  }
  // Builds and self-checks the perturbation.
  make_U();
}

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> e{
      {"run.dim", std::to_string(physical_dim(dim))},
      {"run.T", fmt(T)},
      {"run.seed", std::to_string(random_seed)},
      {"run.output", output},
      {"run.jobs", std::to_string(jobs)},
      {"perturbation.name", perturbation.name},
  };
  for (const auto& [k, v] : perturbation.params) e.emplace_back("perturbation." + k, v);
  e.insert(e.end(), {
                        {"manifold.k", join(k_list)},
                        {"manifold.l", std::to_string(l)},
                        {"epsilon.eps", fmt(eps)},
                        {"epsilon.schedule", join(eps_schedule)},
                        {"integrator.rel_tol", fmt(integrator.rel_tol)},
                        {"integrator.abs_tol", fmt(integrator.abs_tol)},
                        {"integrator.max_step", fmt(integrator.max_step)},
                        {"integrator.max_steps", std::to_string(integrator.max_steps)},
                        {"shooting.segments", std::to_string(shooting.segments)},
                        {"shooting.max_iterations", std::to_string(shooting.max_iterations)},
                        {"shooting.residual_tol", fmt(shooting.residual_tol)},
                        {"shooting.step_tol", fmt(shooting.step_tol)},
                        {"shooting.rank_threshold", fmt(shooting.rank_threshold)},
                        {"shooting.eta", std::to_string(shooting.eta)},
                        {"shooting.scan", std::to_string(scan_size)},
                        {"seed.preset", seed.preset},
                        {"seed.alpha", fmt(seed.alpha)},
                        {"seed.phase_z", fmt(seed.phase_z)},
                        {"seed.phase_w", fmt(seed.phase_w)},
                        {"seed.prograde", seed.prograde ? "true" : "false"},
                        {"seed.t0", fmt(seed.t0)},
                        {"seed.count", std::to_string(seed.count)},
                        {"flow.periods", std::to_string(flow_periods)},
                        {"certify.count", std::to_string(certify_count)},
                        {"certify.min_angle", fmt(certify_min_angle)},
                        {"reconstruct.samples", std::to_string(samples)},
                        {"reconstruct.window", fmt(window)},
                        {"reconstruct.mu", join(mu_list)},
                        {"averaging.eps", join(average_eps)},
                    });
  return e;
}

std::vector<std::string> RunConfig::header_lines() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : echo()) out.push_back(k + " = " + v);
  return out;
}

ManifoldSpec RunConfig::manifold(int k) const {
  ManifoldSpec s;
  s.k = k;
  s.T = T;
  s.dim = dim;
  s.validate();
  return s;
}

PerturbationPtr RunConfig::make_U() const { return make_perturbation(perturbation, dim, T); }

std::vector<double> RunConfig::eps_targets() const {
  if (!eps_schedule.empty()) return eps_schedule;
  return {eps};
}

SeedParams RunConfig::seed_params() const {
  SeedParams p;
  if (seed.preset == "circular") p.preset = SeedPreset::Circular;
  if (seed.preset == "rectilinear") p.preset = SeedPreset::Rectilinear;
  p.alpha = seed.alpha;
  p.phase_z = seed.phase_z;
  p.phase_w = seed.phase_w;
  p.prograde = seed.prograde;
  p.t0 = seed.t0;
  return p;
}

FourierForcing RunConfig::forcing() const {
  const auto U = make_U();
  const auto* fk = dynamic_cast<const ForcedKepler*>(U.get());
  if (!fk) throw ConfigError("this command needs perturbation.name = forced_kepler");
  return fk->forcing();
}

}  // namespace kepreg
