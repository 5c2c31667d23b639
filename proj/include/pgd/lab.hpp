#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pgd::lab {

enum class Objective { convex_norm, nonconvex_sine };
enum class StepRule { automatic, fixed, inverse_sqrt_t };

Objective objective_from_name(const std::string& name);
std::string objective_name(Objective objective);
StepRule step_rule_from_name(const std::string& name);
std::string step_rule_name(StepRule rule);

/// Stochastic-update simulation settings. The update direction g satisfies
///   E[<g, grad F>] = alignment * ||grad F||^2
///   E[||g||^2]     = second_moment * ||grad F||^2 + noise_floor
/// by construction.
struct LabConfig {
  Objective objective = Objective::convex_norm;
  int dimension = 10;
  long horizon = 1000;
  double alignment = 1.0;      // mu in (0, 1]
  double second_moment = 1.0;  // rho >= mu^2
  double noise_floor = 0.0;    // sigma^2 >= 0
  double lipschitz = 1.0;      // G, gradient norm bound of the convex objective
  double diameter = 2.0;       // D, domain ball diameter for the convex objective
  double sine_amplitude = 2.0;  // a; the nonconvex objective is L-smooth, L = 1 + a
  StepRule step_rule = StepRule::automatic;
  double fixed_step = 0.01;
  double step_scale = 1.0;
  double start_radius = 3.0;  // convex runs clamp this to the domain boundary
  std::uint64_t seed = 0;

  void validate() const;
  double smoothness() const { return 1.0 + sine_amplitude; }
  /// Step size eta for this objective and horizon: automatic gives
  /// D/(G*sqrt(T)) on the convex objective and step_scale/(L*sqrt(T)) on the
  /// nonconvex one.
  double step_size() const;
};

struct Trace {
  std::vector<double> objective;     // F(p_t) for t = 1..T
  std::vector<double> grad_norm_sq;  // ||grad F(p_t)||^2
  double final_objective = 0.0;
  /// Convex: average suboptimality, regret_sum / T. Nonconvex: average
  /// squared gradient norm. Both decay like T^(-1/2) under automatic steps.
  double averaged_value = 0.0;
  double avg_grad_norm_sq = 0.0;
  double regret_sum = 0.0;   // convex only
  double bound_value = 0.0;  // convex: D^2/(2 eta) + eta G^2 T / 2;
                             // nonconvex: 2(F(p1)-F_inf)/(mu T eta) + L sigma^2 eta / mu
  long lemma_violations = 0;
  double initial_objective = 0.0;
};

/// g = mu * grad + xi with xi ~ N(0, c I), c chosen so the two moment
/// identities above hold. Throws std::invalid_argument when rho < mu^2,
/// mu <= 0, or noise_floor < 0.
std::vector<double> make_noisy_gradient(const std::vector<double>& grad, double mu,
                                        double rho, double noise_floor,
                                        std::uint64_t seed, long step);

/// Euclidean projection onto the origin-centered ball. Idempotent and
/// non-expansive; radius must be positive.
std::vector<double> project_to_ball(const std::vector<double>& p, double radius);

double nonconvex_objective(const std::vector<double>& p, double amplitude);
std::vector<double> nonconvex_gradient(const std::vector<double>& p, double amplitude);
/// dimension * min_x (x^2/2 + amplitude * sin x), found numerically.
double nonconvex_infimum(int dimension, double amplitude);

/// Projected stochastic subgradient descent on F(p) = ||p|| over the ball of
/// diameter D. Checks the projection inequality
/// ||proj(q) - p*|| <= ||q - p*|| every step and counts violations.
Trace simulate_convex(const LabConfig& config);

/// Unconstrained descent on F(p) = sum_i (p_i^2/2 + a sin p_i). Checks the
/// smoothness descent inequality
/// F(p+) <= F(p) + <grad F(p), p+ - p> + (L/2)||p+ - p||^2 every step.
Trace simulate_nonconvex(const LabConfig& config);

Trace simulate(const LabConfig& config);

/// Least-squares slope of log(value) against log(horizon). Needs >= 3
/// horizons and strictly positive values.
double fit_rate(const std::vector<long>& horizons, const std::vector<double>& values);

struct RateStudy {
  std::vector<long> horizons;
  std::vector<double> mean_values;  // mean of averaged_value over seeds
  double exponent = 0.0;
  long total_lemma_violations = 0;
};

RateStudy run_rate_study(const LabConfig& base, const std::vector<long>& horizons,
                         int seeds);

void write_trace_csv(const Trace& trace, const std::string& path);

}  // namespace pgd::lab
