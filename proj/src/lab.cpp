#include "pgd/lab.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "pgd/errors.hpp"
#include "pgd/util.hpp"

namespace pgd::lab {

Objective objective_from_name(const std::string& name) {
  if (name == "convex_norm") return Objective::convex_norm;
  if (name == "nonconvex_sine") return Objective::nonconvex_sine;
  throw std::invalid_argument("unknown objective: " + name);
}

std::string objective_name(Objective objective) {
  switch (objective) {
    case Objective::convex_norm: return "convex_norm";
    case Objective::nonconvex_sine: return "nonconvex_sine";
  }
  throw std::invalid_argument("unknown objective");
}

StepRule step_rule_from_name(const std::string& name) {
  if (name == "automatic") return StepRule::automatic;
  if (name == "fixed") return StepRule::fixed;
  if (name == "inverse_sqrt_t") return StepRule::inverse_sqrt_t;
  throw std::invalid_argument("unknown step rule: " + name);
}

std::string step_rule_name(StepRule rule) {
  switch (rule) {
    case StepRule::automatic: return "automatic";
    case StepRule::fixed: return "fixed";
    case StepRule::inverse_sqrt_t: return "inverse_sqrt_t";
  }
  throw std::invalid_argument("unknown step rule");
}

void LabConfig::validate() const {
  if (dimension < 1) throw std::invalid_argument("dimension must be >= 1");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(alignment > 0.0 && alignment <= 1.0)) {
    throw std::invalid_argument("alignment must be in (0, 1]");
  }
  if (second_moment < alignment * alignment) {
    throw std::invalid_argument("second_moment must be >= alignment^2");
  }
  if (noise_floor < 0.0) throw std::invalid_argument("noise_floor must be >= 0");
  if (!(lipschitz > 0.0)) throw std::invalid_argument("lipschitz must be > 0");
  if (!(diameter > 0.0)) throw std::invalid_argument("diameter must be > 0");
  if (!(sine_amplitude > 0.0)) throw std::invalid_argument("sine_amplitude must be > 0");
  if (step_rule == StepRule::fixed && !(fixed_step > 0.0)) {
    throw std::invalid_argument("fixed_step must be > 0");
  }
  if (!(step_scale > 0.0)) throw std::invalid_argument("step_scale must be > 0");
  if (!(start_radius > 0.0)) throw std::invalid_argument("start_radius must be > 0");
}

double LabConfig::step_size() const {
  const double sqrt_t = std::sqrt(static_cast<double>(horizon));
  switch (step_rule) {
    case StepRule::fixed:
      return fixed_step;
    case StepRule::inverse_sqrt_t:
      return step_scale / sqrt_t;
    case StepRule::automatic:
      return objective == Objective::convex_norm
                 ? diameter / (lipschitz * sqrt_t)
                 : step_scale / (smoothness() * sqrt_t);
  }
  throw std::invalid_argument("unknown step rule");
}

std::vector<double> make_noisy_gradient(const std::vector<double>& grad, double mu,
                                        double rho, double noise_floor,
                                        std::uint64_t seed, long step) {
  if (!(mu > 0.0)) throw std::invalid_argument("alignment must be > 0");
  if (rho < mu * mu) throw std::invalid_argument("second_moment must be >= alignment^2");
  if (noise_floor < 0.0) throw std::invalid_argument("noise_floor must be >= 0");
  if (grad.empty()) throw std::invalid_argument("empty gradient");

  double norm_sq = 0.0;
  for (double x : grad) norm_sq += x * x;
  const double d = static_cast<double>(grad.size());
  const double variance = ((rho - mu * mu) * norm_sq + noise_floor) / d;

  std::vector<double> g(grad.size());
  std::mt19937_64 rng(derive_seed(seed, "noise", static_cast<std::uint64_t>(step)));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = std::sqrt(variance);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    g[i] = mu * grad[i] + scale * normal(rng);
  }
  return g;
}

std::vector<double> project_to_ball(const std::vector<double>& p, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be > 0");
  double norm_sq = 0.0;
  for (double x : p) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  if (norm <= radius) return p;
  std::vector<double> out(p.size());
  const double scale = radius / norm;
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * scale;
  return out;
}

namespace {

std::vector<double> random_direction(int dimension, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "start"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(dimension));
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (auto& x : p) {
      x = normal(rng);
      norm_sq += x * x;
    }
  } while (norm_sq == 0.0);
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (auto& x : p) x *= inv;
  return p;
}

double norm_sq_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void check_finite(double value, long step, const char* what) {
  if (!std::isfinite(value)) {
    throw pgd::SimulationError(std::string(what) + " became non-finite at step " +
                               std::to_string(step));
  }
}

}  // namespace

double nonconvex_objective(const std::vector<double>& p, double amplitude) {
  double f = 0.0;
  for (double x : p) f += x * x / 2.0 + amplitude * std::sin(x);
  return f;
}

std::vector<double> nonconvex_gradient(const std::vector<double>& p, double amplitude) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] + amplitude * std::cos(p[i]);
  return g;
}

double nonconvex_infimum(int dimension, double amplitude) {
  if (dimension < 1) throw std::invalid_argument("dimension must be >= 1");
  if (!(amplitude > 0.0)) throw std::invalid_argument("amplitude must be > 0");
  // Critical points of x^2/2 + a sin x satisfy x = -a cos x, so |x| <= a.
  auto f = [&](double x) { return x * x / 2.0 + amplitude * std::sin(x); };
  const double lo = -amplitude - 1.0, hi = amplitude + 1.0;
  const int steps = 20000;
  double best_x = lo, best_f = f(lo);
  for (int i = 1; i <= steps; ++i) {
    const double x = lo + (hi - lo) * i / steps;
    if (f(x) < best_f) {
      best_f = f(x);
      best_x = x;
    }
  }
  double a = best_x - (hi - lo) / steps;
  double b = best_x + (hi - lo) / steps;
  for (int i = 0; i < 200; ++i) {
    const double m1 = a + (b - a) / 3.0;
    const double m2 = b - (b - a) / 3.0;
    if (f(m1) < f(m2)) b = m2;
    else a = m1;
  }
  return dimension * f((a + b) / 2.0);
}

Trace simulate_convex(const LabConfig& config) {
  config.validate();
  const double radius = config.diameter / 2.0;
  const double eta = config.step_size();
  const long T = config.horizon;

  std::vector<double> p = random_direction(config.dimension, config.seed);
  const double start = std::min(config.start_radius, radius);
  for (auto& x : p) x *= start;

  Trace trace;
  trace.objective.reserve(static_cast<std::size_t>(T));
  trace.grad_norm_sq.reserve(static_cast<std::size_t>(T));
  trace.initial_objective = std::sqrt(norm_sq_of(p));

  for (long t = 1; t <= T; ++t) {
    const double norm = std::sqrt(norm_sq_of(p));
    check_finite(norm, t, "iterate norm");
    trace.objective.push_back(norm);
    trace.regret_sum += norm;  // F(p*) = 0

    std::vector<double> grad(p.size(), 0.0);
    if (norm > 1e-12) {
      for (std::size_t i = 0; i < p.size(); ++i) grad[i] = p[i] / norm;
    }
    trace.grad_norm_sq.push_back(norm_sq_of(grad));

    const std::vector<double> g = make_noisy_gradient(
        grad.empty() ? grad : grad, config.alignment, config.second_moment,
        config.noise_floor, config.seed, t);

    std::vector<double> q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) q[i] = p[i] - eta * g[i];
    const std::vector<double> projected = project_to_ball(q, radius);

    // Projection inequality against the minimizer p* = 0: the projected
    // point is never farther from p* than the raw step.
    const double lhs = norm_sq_of(projected);
    const double rhs = norm_sq_of(q);
    if (lhs > rhs + 1e-9 * (1.0 + std::fabs(rhs))) ++trace.lemma_violations;

    p = projected;
    check_finite(norm_sq_of(p), t, "iterate");
  }

  trace.final_objective = std::sqrt(norm_sq_of(p));
  trace.avg_grad_norm_sq = 0.0;
  for (double v : trace.grad_norm_sq) trace.avg_grad_norm_sq += v;
  trace.avg_grad_norm_sq /= static_cast<double>(T);
  trace.averaged_value = trace.regret_sum / static_cast<double>(T);
  trace.bound_value = config.diameter * config.diameter / (2.0 * eta) +
                      eta * config.lipschitz * config.lipschitz * T / 2.0;
  return trace;
}

Trace simulate_nonconvex(const LabConfig& config) {
  config.validate();
  const double a = config.sine_amplitude;
  const double L = config.smoothness();
  const double eta = config.step_size();
  const long T = config.horizon;

  std::vector<double> p = random_direction(config.dimension, config.seed);
  for (auto& x : p) x *= config.start_radius;

  Trace trace;
  trace.objective.reserve(static_cast<std::size_t>(T));
  trace.grad_norm_sq.reserve(static_cast<std::size_t>(T));
  trace.initial_objective = nonconvex_objective(p, a);

  for (long t = 1; t <= T; ++t) {
    const double f = nonconvex_objective(p, a);
    check_finite(f, t, "objective");
    trace.objective.push_back(f);

    const std::vector<double> grad = nonconvex_gradient(p, a);
    trace.grad_norm_sq.push_back(norm_sq_of(grad));

    const std::vector<double> g =
        make_noisy_gradient(grad, config.alignment, config.second_moment,
                            config.noise_floor, config.seed, t);

    std::vector<double> next(p.size());
    double inner = 0.0, step_norm_sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      next[i] = p[i] - eta * g[i];
      const double delta = next[i] - p[i];
      inner += grad[i] * delta;
      step_norm_sq += delta * delta;
    }

    // Descent inequality from L-smoothness.
    const double f_next = nonconvex_objective(next, a);
    const double rhs = f + inner + L / 2.0 * step_norm_sq;
    if (f_next > rhs + 1e-9 * (1.0 + std::fabs(rhs))) ++trace.lemma_violations;

    p = std::move(next);
    check_finite(norm_sq_of(p), t, "iterate");
  }

  trace.final_objective = nonconvex_objective(p, a);
  for (double v : trace.grad_norm_sq) trace.avg_grad_norm_sq += v;
  trace.avg_grad_norm_sq /= static_cast<double>(T);
  trace.averaged_value = trace.avg_grad_norm_sq;
  trace.regret_sum = 0.0;

  const double f_inf = nonconvex_infimum(config.dimension, a);
  trace.bound_value =
      2.0 * (trace.initial_objective - f_inf) /
          (config.alignment * static_cast<double>(T) * eta) +
      L * config.noise_floor * eta / config.alignment;
  return trace;
}

Trace simulate(const LabConfig& config) {
  return config.objective == Objective::convex_norm ? simulate_convex(config)
                                                    : simulate_nonconvex(config);
}

double fit_rate(const std::vector<long>& horizons, const std::vector<double>& values) {
  if (horizons.size() != values.size()) {
    throw std::invalid_argument("fit_rate: size mismatch");
  }
  if (horizons.size() < 3) throw std::invalid_argument("fit_rate: need >= 3 horizons");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(horizons.size());
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (horizons[i] < 1) throw std::invalid_argument("fit_rate: horizon must be >= 1");
    if (!(values[i] > 0.0)) {
      throw std::invalid_argument("fit_rate: values must be positive");
    }
    const double x = std::log(static_cast<double>(horizons[i]));
    const double y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_rate: degenerate horizons");
  return (n * sxy - sx * sy) / denom;
}

RateStudy run_rate_study(const LabConfig& base, const std::vector<long>& horizons,
                         int seeds) {
  if (seeds < 1) throw std::invalid_argument("need >= 1 seed");
  RateStudy study;
  study.horizons = horizons;
  for (long horizon : horizons) {
    double sum = 0.0;
    for (int s = 0; s < seeds; ++s) {
      LabConfig config = base;
      config.horizon = horizon;
      config.seed = derive_seed(base.seed, "lab_seed", static_cast<std::uint64_t>(s));
      const Trace trace = simulate(config);
      sum += trace.averaged_value;
      study.total_lemma_violations += trace.lemma_violations;
    }
    study.mean_values.push_back(sum / seeds);
  }
  study.exponent = fit_rate(study.horizons, study.mean_values);
  return study;
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw pgd::IngestionError("cannot write " + path);
  out << "step,objective,grad_norm_sq\n";
  for (std::size_t t = 0; t < trace.objective.size(); ++t) {
    out << (t + 1) << "," << trace.objective[t] << "," << trace.grad_norm_sq[t] << "\n";
  }
}

}  // namespace pgd::lab
