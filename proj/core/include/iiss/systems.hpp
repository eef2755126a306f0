#pragma once

// Switched time-varying systems xdot = f(t, x, u, i), y = h(t, x, u, i), the
// two example systems, and sampled estimates of their growth bounds.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iiss/comparison.hpp"
#include "iiss/signals.hpp"

namespace iiss {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using DynamicsFn = std::function<Vec(double t, const Vec& x, const Vec& u, Mode i)>;

/// Nondecreasing function of a radius known on a finite grid. Evaluation
/// returns the value at the smallest grid radius >= r and +inf past the
/// grid, so it never undercuts the tabulated data.
struct RadialTable {
  std::vector<double> radii;
  std::vector<double> values;

  double operator()(double r) const;
};

struct DeclaredBounds {
  /// N in |f(t, x, u, i)| <= N(|x|) (1 + gamma(|u|)).
  std::function<double(double)> N;
  std::optional<MonotoneFn> gamma;
};

class SwitchedSystem {
 public:
  SwitchedSystem(std::string name, Eigen::Index state_dim, Eigen::Index input_dim, std::vector<Mode> modes,
                 DynamicsFn f, DynamicsFn h = {}, Eigen::Index output_dim = -1);

  Vec f(double t, const Vec& x, const Vec& u, Mode i) const;
  /// Output; the full state when no output map was given.
  Vec h(double t, const Vec& x, const Vec& u, Mode i) const;

  const std::string& name() const { return name_; }
  Eigen::Index state_dim() const { return n_; }
  Eigen::Index input_dim() const { return m_; }
  Eigen::Index output_dim() const { return p_; }
  const std::vector<Mode>& modes() const { return modes_; }
  bool has_mode(Mode i) const;

  SwitchedSystem with_output(DynamicsFn h, Eigen::Index output_dim) const;
  SwitchedSystem with_name(std::string name) const;

  const DeclaredBounds& declared() const { return declared_; }
  SwitchedSystem with_declared(DeclaredBounds bounds) const;

  /// Per-mode (A_i, B_i) when the system is linear, in mode order.
  const std::vector<Mat>& linear_A() const { return A_; }
  const std::vector<Mat>& linear_B() const { return B_; }
  bool is_linear() const { return !A_.empty(); }

 private:
  friend SwitchedSystem make_switched_linear(std::vector<Mat> A, std::vector<Mat> B);

  std::string name_;
  Eigen::Index n_;
  Eigen::Index m_;
  Eigen::Index p_;
  std::vector<Mode> modes_;
  DynamicsFn f_;
  DynamicsFn h_;
  DeclaredBounds declared_;
  std::vector<Mat> A_;
  std::vector<Mat> B_;
};

/// f(t, x, u, i) = A_i x + B_i u with modes 1..k. Declares gamma(s) = s and
/// N(r) = max_i |A_i| r + max{1, |B_i|}.
SwitchedSystem make_switched_linear(std::vector<Mat> A, std::vector<Mat> B);

/// Solves A' P + P A = -Q. Throws std::domain_error when the equation is
/// singular.
Mat lyapunov_matrix(const Mat& A, const Mat& Q);

/// The Hurwitz pair A1 = [[-1, -100], [10, -1]], A2 = A1', b1 = b2 = (1, 0)'.
SwitchedSystem make_prop4_pair();

enum class LoadProfile { Sinusoidal, Constant };

struct InverterParams {
  double L1 = 1.0;
  double L2 = 1.0;
  double C1 = 1.0;
  double C2 = 1.0;
  double a_min = 0.5;
  double a_max = 2.0;
  double r_min = 0.5;
  double r_max = 1.5;
  LoadProfile profile = LoadProfile::Sinusoidal;
  double a_const = 0.5;  ///< used by LoadProfile::Constant
  double r_const = 1.0;  ///< used by LoadProfile::Constant

  void validate() const;
  double a(double t, Mode i) const;
  double r(double t, Mode i) const;
  /// P = diag(L1, L2, C1, C2)
  Mat P() const;
  /// Smallest eigenvalue of P / 2.
  double lambda_min() const;
  /// kappa = 1 / sqrt(lambda_min)
  double kappa() const;
  Mat A_tilde(Mode i) const;
  Vec b(Mode i) const;
};

inline double sat(double v) { return v > 1.0 ? 1.0 : (v < -1.0 ? -1.0 : v); }

/// xdot = A~_i x - e4 a_i(t) sat(x4 / r_i(t)) + b_i u, modes {1, 2}.
SwitchedSystem make_inverter(const InverterParams& params = {});

/// eta_i(t, x) = C2 x4 a_i(t) sat(x4 / r_i(t)), the dissipated power.
double inverter_load_power(const InverterParams& params, double t, const Vec& x, Mode i);

struct SampleSpec {
  std::size_t budget = 20000;
  std::uint64_t seed = 1;
  double t_horizon = 20.0;  ///< time samples are log-uniform on [0, t_horizon]
};

/// Sampled sup-bounds of the growth condition. All values are lower
/// estimates of the true suprema on the tested samples.
struct C1Bounds {
  RadialTable gamma_tilde;  ///< sup |f| over |x| <= r, |u| <= r
  RadialTable N;            ///< max{1, gamma(r)}
  MonotoneFn gamma;         ///< class-K majorant of gamma_tilde
  bool bounded = true;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

C1Bounds estimate_c1_bounds(const SwitchedSystem& sys, std::span<const double> radii, const SampleSpec& spec = {});

inline constexpr double kLipschitzSafety = 1.1;

/// Sampled Lipschitz constant of f(t, ., 0, i) on the closed r-ball, times 1.1.
double estimate_lipschitz(const SwitchedSystem& sys, double r, const SampleSpec& spec = {});

struct KappaEstimate {
  double kappa = 0.0;          ///< smallest kappa satisfying the claim on all samples
  double delta = 0.0;          ///< |u| <= delta keeps |f(x, u) - f(x, 0)| below eta
  double N_rstar = 0.0;        ///< N(r*) used in the closed-form bound
  double kappa_formula = 0.0;  ///< N(r*) (2 / gamma(delta) + 1)
  std::size_t samples = 0;
};

/// |f(t, x, u, i) - f(t, x, 0, i)| <= eta + kappa gamma(|u|) on |x| <= r*.
/// gamma is the system's declared gain, or a sampled one. Throws
/// std::domain_error if chi does not dominate gamma.
KappaEstimate estimate_kappa(const SwitchedSystem& sys, double r_star, double eta, const MonotoneFn& chi,
                             const SampleSpec& spec = {});

}  // namespace iiss
