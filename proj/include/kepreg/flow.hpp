#pragma once

// Adaptive Dormand-Prince 5(4) integration with dense output, fundamental
// matrix propagation and event location on the dense interpolant.

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kepreg/model.hpp"

namespace kepreg {

struct IntegratorConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;  // 0 selects automatically
  bool dense = true;
  long max_steps = 2'000'000;

  void validate() const;
};

/// Autonomous system x' = f(x) with its Jacobian.
struct OdeSystem {
  int n = 0;
  std::function<void(const Vec&, Vec&)> f;
  std::function<Mat(const Vec&)> jacobian;
};

OdeSystem make_system(const RegularizedKepler& model);
OdeSystem make_system(const PhysicalKepler& model);

struct IntegratorStats {
  long steps = 0;
  long rejections = 0;
  long evaluations = 0;
};

/// Accepted steps of one integration plus their dense interpolants.
/// The stored vectors may be longer than the state (tangent columns are
/// appended for variational runs); `state_size()` is the state prefix.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(int state_size, int full_size) : n_(state_size), full_(full_size) {}

  int state_size() const { return n_; }
  int full_size() const { return full_; }
  std::size_t size() const { return s_.size(); }
  bool empty() const { return s_.empty(); }
  bool has_dense() const { return !dense_.empty(); }

  double s(std::size_t i) const { return s_[i]; }
  Vec state(std::size_t i) const { return x_[i].head(n_); }
  const Vec& full(std::size_t i) const { return x_[i]; }
  double s_begin() const { return s_.front(); }
  double s_end() const { return s_.back(); }
  const std::vector<double>& nodes() const { return s_; }

  /// State at s from the dense interpolant (full vector with tangent columns
  /// for `eval_full`). Throws DomainError outside [s_begin, s_end].
  Vec eval(double s) const { return eval_full(s).head(n_); }
  Vec eval_full(double s) const;

  const IntegratorStats& stats() const { return stats_; }

 private:
  friend class Dopri5;
  struct Dense {
    Vec r1, r2, r3, r4, r5;
  };
  std::size_t locate(double s) const;

  int n_ = 0;
  int full_ = 0;
  std::vector<double> s_;
  std::vector<Vec> x_;
  std::vector<Dense> dense_;  // dense_[i] covers [s_i, s_{i+1}]
  IntegratorStats stats_;
};

/// Step-size underflow, step-count exhaustion or a non-finite state.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double s, Vec last_state)
      : Error(what), s_(s), last_(std::move(last_state)) {}
  double s() const { return s_; }
  const Vec& last_state() const { return last_; }

 private:
  double s_;
  Vec last_;
};

/// Integrates x' = f(x) from (s0, x0) to s_end > s0.
Trajectory integrate(const OdeSystem& sys, const Vec& x0, double s_end, const IntegratorConfig& cfg = {},
                     double s0 = 0.0);

struct VariationalResult {
  Trajectory trajectory;
  Mat M;  // fundamental matrix (or propagated tangents) at s_end
};

/// Integrates the state together with tangent columns Y' = DF(x) Y, Y(0) = Y0
/// (identity when omitted). Error control uses the state only.
VariationalResult integrate_with_variational(const OdeSystem& sys, const Vec& x0, double s_end,
                                             const IntegratorConfig& cfg = {},
                                             const std::optional<Mat>& Y0 = std::nullopt, double s0 = 0.0);

/// Scalar event function g(s, x); zeros are located on the dense output.
struct EventSpec {
  std::string name;
  std::function<double(double, const Vec&)> g;
  int direction = 0;  // +1: g rising, -1: falling, 0: both
  /// Optional acceptance test at the located point.
  std::function<bool(double, const Vec&)> accept;
};

struct Event {
  std::string name;
  double s = 0.0;
  Vec x;
};

/// Brackets sign changes of every spec on each step (sampled at 4 interior
/// points) and localizes them to a bracket width below 1e-12 in s.
std::vector<Event> detect_events(const Trajectory& traj, const std::vector<EventSpec>& specs);

/// Collision: d|z|^2/ds changes sign from - to + with |z|^2 below `threshold`.
EventSpec collision_event(Dim dim, double threshold = 1e-16);
/// Crossing t(s) = t_target.
EventSpec time_crossing_event(Dim dim, double t_target);

struct InvariantReport {
  double K0 = 0.0;
  double max_K_drift = 0.0;
  double max_tau_drift = 0.0;
  std::optional<double> BL0;
  std::optional<double> max_BL_drift;
};

/// Drift of K_eps (and BL in 3D) over the sample nodes.
InvariantReport invariant_report(const Trajectory& traj, const RegularizedKepler& model);

/// CSV with columns s, state components, K, (3D) BL; one row per accepted
/// step. `header` lines are written first, each prefixed with "# ".
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const RegularizedKepler& model,
                          const std::vector<std::string>& header = {});

}  // namespace kepreg
