#include "iiss/systems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "iiss/random.hpp"

namespace iiss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sample_time(Rng& rng, double horizon) {
  if (horizon <= 0.0 || uniform(rng, 0.0, 1.0) < 0.1) return 0.0;
  return horizon * std::pow(10.0, uniform(rng, -4.0, 0.0));
}

// Half the samples on the sphere, where suprema of radial bounds sit.
Vec sample_ball(Rng& rng, Eigen::Index n, double r) {
  if (n == 0) return Vec(0);
  if (uniform(rng, 0.0, 1.0) < 0.5) return random_direction(rng, n) * r;
  return random_in_ball(rng, n, r);
}

Mode sample_mode(Rng& rng, const std::vector<Mode>& modes) {
  return modes[std::uniform_int_distribution<std::size_t>(0, modes.size() - 1)(rng)];
}

}  // namespace

double RadialTable::operator()(double r) const {
  const auto it = std::lower_bound(radii.begin(), radii.end(), r);
  if (it == radii.end()) return kInf;
  return values[static_cast<std::size_t>(it - radii.begin())];
}

// ---------------------------------------------------------------------------

SwitchedSystem::SwitchedSystem(std::string name, Eigen::Index state_dim, Eigen::Index input_dim,
                               std::vector<Mode> modes, DynamicsFn f, DynamicsFn h, Eigen::Index output_dim)
    : name_(std::move(name)),
      n_(state_dim),
      m_(input_dim),
      p_(h ? output_dim : state_dim),
      modes_(std::move(modes)),
      f_(std::move(f)),
      h_(std::move(h)) {
  if (n_ <= 0) throw std::invalid_argument("state dimension must be positive");
  if (m_ < 0) throw std::invalid_argument("input dimension must be >= 0");
  if (modes_.empty()) throw std::invalid_argument("system needs at least one mode");
  if (!f_) throw std::invalid_argument("system needs a dynamics function");
  if (h_ && p_ < 0) throw std::invalid_argument("output map needs an output dimension");
}

bool SwitchedSystem::has_mode(Mode i) const { return std::find(modes_.begin(), modes_.end(), i) != modes_.end(); }

Vec SwitchedSystem::f(double t, const Vec& x, const Vec& u, Mode i) const { return f_(t, x, u, i); }

Vec SwitchedSystem::h(double t, const Vec& x, const Vec& u, Mode i) const { return h_ ? h_(t, x, u, i) : x; }

SwitchedSystem SwitchedSystem::with_output(DynamicsFn h, Eigen::Index output_dim) const {
  SwitchedSystem out = *this;
  out.h_ = std::move(h);
  out.p_ = out.h_ ? output_dim : n_;
  if (out.h_ && output_dim < 0) throw std::invalid_argument("output map needs an output dimension");
  return out;
}

SwitchedSystem SwitchedSystem::with_name(std::string name) const {
  SwitchedSystem out = *this;
  out.name_ = std::move(name);
  return out;
}

SwitchedSystem SwitchedSystem::with_declared(DeclaredBounds bounds) const {
  SwitchedSystem out = *this;
  out.declared_ = std::move(bounds);
  return out;
}

SwitchedSystem make_switched_linear(std::vector<Mat> A, std::vector<Mat> B) {
  if (A.empty() || A.size() != B.size()) throw std::invalid_argument("need matching nonempty A and B lists");
  const Eigen::Index n = A[0].rows();
  const Eigen::Index m = B[0].cols();
  double a_norm = 0.0;
  double b_norm = 0.0;
  for (std::size_t k = 0; k < A.size(); ++k) {
    if (A[k].rows() != n || A[k].cols() != n) throw std::invalid_argument("A matrices must be square of one size");
    if (B[k].rows() != n || B[k].cols() != m) throw std::invalid_argument("B matrices must be n x m of one size");
    if (!A[k].allFinite() || !B[k].allFinite()) throw std::invalid_argument("system matrices must be finite");
    a_norm = std::max(a_norm, Eigen::JacobiSVD<Mat>(A[k]).singularValues()(0));
    if (m > 0) b_norm = std::max(b_norm, Eigen::JacobiSVD<Mat>(B[k]).singularValues()(0));
  }
  std::vector<Mode> modes;
  for (std::size_t k = 0; k < A.size(); ++k) modes.push_back(static_cast<Mode>(k + 1));

  auto f = [A, B](double, const Vec& x, const Vec& u, Mode i) -> Vec {
    if (i < 1 || static_cast<std::size_t>(i) > A.size()) throw std::out_of_range("unknown mode " + std::to_string(i));
    const auto k = static_cast<std::size_t>(i - 1);
    if (B[k].cols() == 0) return A[k] * x;
    return A[k] * x + B[k] * u;
  };
  SwitchedSystem sys("custom_linear", n, m, std::move(modes), std::move(f));
  sys.A_ = std::move(A);
  sys.B_ = std::move(B);
  const double offset = std::max(1.0, b_norm);
  sys.declared_.N = [a_norm, offset](double r) { return a_norm * r + offset; };
  sys.declared_.gamma = MonotoneFn::identity();
  return sys;
}

Mat lyapunov_matrix(const Mat& A, const Mat& Q) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n) throw std::invalid_argument("lyapunov_matrix: need square A and Q");
  const Mat I = Mat::Identity(n, n);
  // vec(A'P + PA) = (I kron A' + A' kron I) vec(P)
  Mat K(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) K.block(i * n, j * n, n, n) = I(i, j) * A.transpose() + A(j, i) * I;
  const Eigen::FullPivLU<Mat> lu(K);
  if (!lu.isInvertible()) throw std::domain_error("lyapunov_matrix: singular equation");
  const Vec p = lu.solve(-Eigen::Map<const Vec>(Q.data(), n * n));
  const Mat P = Eigen::Map<const Mat>(p.data(), n, n);
  return 0.5 * (P + P.transpose());
}

SwitchedSystem make_prop4_pair() {
  Mat A1(2, 2);
  A1 << -1.0, -100.0, 10.0, -1.0;
  Mat b(2, 1);
  b << 1.0, 0.0;
  Mat A2 = A1.transpose();
  return make_switched_linear({A1, A2}, {b, b}).with_name("prop4_pair");
}

// ---------------------------------------------------------------------------
// Inverter

void InverterParams::validate() const {
  for (double v : {L1, L2, C1, C2, a_min, a_max, r_min, r_max})
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("inverter parameters must be positive and finite");
  if (a_max < a_min) throw std::invalid_argument("inverter: a_max < a_min");
  if (r_max < r_min) throw std::invalid_argument("inverter: r_max < r_min");
  if (profile == LoadProfile::Constant) {
    if (a_const < a_min || a_const > a_max) throw std::invalid_argument("inverter: constant load a outside [a_min, a_max]");
    if (r_const < r_min || r_const > r_max) throw std::invalid_argument("inverter: constant load r outside [r_min, r_max]");
  }
}

double InverterParams::a(double t, Mode i) const {
  if (profile == LoadProfile::Constant) return a_const;
  return a_min + (a_max - a_min) * 0.5 * (1.0 + std::sin(t + i));
}

double InverterParams::r(double t, Mode i) const {
  if (profile == LoadProfile::Constant) return r_const;
  return r_min + (r_max - r_min) * 0.5 * (1.0 + std::sin(t + i));
}

Mat InverterParams::P() const { return Vec((Vec(4) << L1, L2, C1, C2).finished()).asDiagonal(); }

double InverterParams::lambda_min() const { return 0.5 * std::min({L1, L2, C1, C2}); }

double InverterParams::kappa() const { return 1.0 / std::sqrt(lambda_min()); }

Mat InverterParams::A_tilde(Mode i) const {
  Mat M = Mat::Zero(4, 4);
  if (i == 1) {
    M(1, 2) = 1.0;
    M(1, 3) = 1.0;
    M(2, 1) = -1.0;
    M(3, 1) = -1.0;
  } else if (i == 2) {
    M(0, 2) = -1.0;
    M(1, 3) = 1.0;
    M(2, 0) = 1.0;
    M(3, 1) = -1.0;
  } else {
    throw std::out_of_range("inverter has modes 1 and 2, got " + std::to_string(i));
  }
  return P().inverse() * M;
}

Vec InverterParams::b(Mode i) const {
  Vec e = Vec::Zero(4);
  if (i == 1) {
    e(0) = 1.0 / L1;
  } else if (i == 2) {
    e(1) = 1.0 / L2;
  } else {
    throw std::out_of_range("inverter has modes 1 and 2, got " + std::to_string(i));
  }
  return e;
}

SwitchedSystem make_inverter(const InverterParams& params) {
  params.validate();
  const Mat A1 = params.A_tilde(1);
  const Mat A2 = params.A_tilde(2);
  const Vec b1 = params.b(1);
  const Vec b2 = params.b(2);
  auto f = [params, A1, A2, b1, b2](double t, const Vec& x, const Vec& u, Mode i) -> Vec {
    if (i != 1 && i != 2) throw std::out_of_range("inverter has modes 1 and 2, got " + std::to_string(i));
    Vec dx = (i == 1 ? A1 : A2) * x;
    dx(3) -= params.a(t, i) * sat(x(3) / params.r(t, i));
    if (u.size() > 0) dx += (i == 1 ? b1 : b2) * u(0);
    return dx;
  };
  SwitchedSystem sys("inverter", 4, 1, {1, 2}, std::move(f));

  const double a_norm = std::max(Eigen::JacobiSVD<Mat>(A1).singularValues()(0),
                                 Eigen::JacobiSVD<Mat>(A2).singularValues()(0));
  const double offset = params.a_max + std::max({1.0, b1.norm(), b2.norm()});
  DeclaredBounds bounds;
  bounds.N = [a_norm, offset](double r) { return a_norm * r + offset; };
  bounds.gamma = MonotoneFn::identity();
  return sys.with_declared(std::move(bounds));
}

double inverter_load_power(const InverterParams& params, double t, const Vec& x, Mode i) {
  return params.C2 * x(3) * params.a(t, i) * sat(x(3) / params.r(t, i));
}

// ---------------------------------------------------------------------------
// Estimators

C1Bounds estimate_c1_bounds(const SwitchedSystem& sys, std::span<const double> radii, const SampleSpec& spec) {
  if (spec.budget == 0) throw std::invalid_argument("sample budget must be positive");
  if (radii.empty()) throw std::invalid_argument("need at least one radius");
  std::vector<double> rs(radii.begin(), radii.end());
  for (std::size_t k = 0; k < rs.size(); ++k) {
    if (!(rs[k] > 0.0) || (k > 0 && rs[k] <= rs[k - 1]))
      throw std::invalid_argument("radii must be positive and strictly increasing");
  }

  Rng rng(spec.seed);
  const std::size_t per = std::max<std::size_t>(1, spec.budget / rs.size());
  std::vector<double> sup(rs.size(), 0.0);
  bool bounded = true;
  for (std::size_t k = 0; k < rs.size(); ++k) {
    for (std::size_t s = 0; s < per; ++s) {
      const double t = sample_time(rng, spec.t_horizon);
      const Mode i = sample_mode(rng, sys.modes());
      const Vec x = sample_ball(rng, sys.state_dim(), rs[k]);
      const Vec u = sample_ball(rng, sys.input_dim(), rs[k]);
      const double v = sys.f(t, x, u, i).norm();
      if (!std::isfinite(v)) {
        sup[k] = kInf;
        bounded = false;
        break;
      }
      sup[k] = std::max(sup[k], v);
    }
  }
  for (std::size_t k = 1; k < sup.size(); ++k) sup[k] = std::max(sup[k], sup[k - 1]);

  C1Bounds out{RadialTable{rs, sup}, RadialTable{}, MonotoneFn::identity(), bounded, per * rs.size(), spec.seed};
  if (bounded) {
    // gamma(r_{k-1}) >= gamma_tilde(r_k) keeps gamma above the monotone
    // gamma_tilde between grid radii.
    std::vector<GainSample> pts;
    for (std::size_t k = 0; k < rs.size(); ++k) {
      const double next = k + 1 < rs.size() ? sup[k + 1] : sup[k];
      pts.push_back({rs[k], std::max(next, 1e-300)});
    }
    out.gamma = fit_k_envelope(pts, EnvelopeMode::UpperMajorant);
  }
  std::vector<double> nv(rs.size());
  for (std::size_t k = 0; k < rs.size(); ++k) nv[k] = bounded ? std::max(1.0, out.gamma(rs[k])) : kInf;
  out.N = RadialTable{rs, nv};
  return out;
}

double estimate_lipschitz(const SwitchedSystem& sys, double r, const SampleSpec& spec) {
  if (!(r > 0.0)) throw std::invalid_argument("Lipschitz radius must be positive");
  if (spec.budget == 0) throw std::invalid_argument("sample budget must be positive");
  Rng rng(spec.seed);
  const Eigen::Index n = sys.state_dim();
  const Vec u0 = Vec::Zero(sys.input_dim());
  double best = 0.0;
  const std::size_t jac_samples = std::max<std::size_t>(1, spec.budget / static_cast<std::size_t>(2 * n + 2));
  // Finite-difference Jacobians at interior points.
  for (std::size_t s = 0; s < jac_samples; ++s) {
    const double t = sample_time(rng, spec.t_horizon);
    const Mode i = sample_mode(rng, sys.modes());
    const double h = 1e-6 * r;
    Vec x = random_in_ball(rng, n, r);
    if (x.norm() > r - h) x *= (r - h) / x.norm();
    Mat J(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      Vec xp = x;
      Vec xm = x;
      xp(c) += h;
      xm(c) -= h;
      J.col(c) = (sys.f(t, xp, u0, i) - sys.f(t, xm, u0, i)) / (2.0 * h);
    }
    best = std::max(best, Eigen::JacobiSVD<Mat>(J).singularValues()(0));
  }
  // Secant quotients over random pairs catch kinks the Jacobian misses.
  const std::size_t pair_samples = spec.budget / 2;
  for (std::size_t s = 0; s < pair_samples; ++s) {
    const double t = sample_time(rng, spec.t_horizon);
    const Mode i = sample_mode(rng, sys.modes());
    const Vec a = sample_ball(rng, n, r);
    const Vec b = random_in_ball(rng, n, r);
    const double d = (a - b).norm();
    if (d < 1e-9 * r) continue;
    best = std::max(best, (sys.f(t, a, u0, i) - sys.f(t, b, u0, i)).norm() / d);
  }
  return kLipschitzSafety * best;
}

KappaEstimate estimate_kappa(const SwitchedSystem& sys, double r_star, double eta, const MonotoneFn& chi,
                             const SampleSpec& spec) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(r_star > 0.0)) throw std::invalid_argument("r_star must be positive");
  if (spec.budget == 0) throw std::invalid_argument("sample budget must be positive");

  std::vector<double> radii;
  for (double r = 1e-3; r < 1e3 * 1.0001; r *= 2.0) radii.push_back(r);
  radii.push_back(std::max(r_star, radii.back() * 2.0));
  const C1Bounds c1 = estimate_c1_bounds(sys, radii, {spec.budget, derive_seed(spec.seed, 7), spec.t_horizon});
  const MonotoneFn gamma = sys.declared().gamma ? *sys.declared().gamma : c1.gamma;
  for (double s : MonotoneFn::default_grid()) {
    if (chi(s) < gamma(s) * (1.0 - 1e-9))
      throw std::domain_error("chi does not dominate gamma at s=" + std::to_string(s));
  }
  const double N_r = sys.declared().N ? sys.declared().N(r_star) : c1.N(r_star);

  Rng rng(spec.seed);
  const Eigen::Index n = sys.state_dim();
  const Eigen::Index m = sys.input_dim();
  const Vec u0 = Vec::Zero(m);

  // delta: the largest 2^-k with every sampled |u| <= delta perturbation below eta.
  const std::size_t per_delta = std::max<std::size_t>(1, spec.budget / 64);
  double delta = 0.0;
  for (int k = 1; k <= 40 && delta == 0.0; ++k) {
    const double d = std::ldexp(1.0, -k);
    double worst = 0.0;
    for (std::size_t s = 0; s < per_delta; ++s) {
      const double t = sample_time(rng, spec.t_horizon);
      const Mode i = sample_mode(rng, sys.modes());
      const Vec x = sample_ball(rng, n, r_star);
      const Vec u = m > 0 ? Vec(random_direction(rng, m) * d) : Vec(0);
      worst = std::max(worst, (sys.f(t, x, u, i) - sys.f(t, x, u0, i)).norm());
    }
    if (worst < eta) delta = d;
  }
  if (delta == 0.0) throw std::domain_error("no delta found: f is not continuous in u at 0 on the samples");

  double kappa = 0.0;
  std::size_t count = 0;
  if (m > 0) {
    for (std::size_t s = 0; s < spec.budget; ++s, ++count) {
      const double t = sample_time(rng, spec.t_horizon);
      const Mode i = sample_mode(rng, sys.modes());
      const Vec x = sample_ball(rng, n, r_star);
      const double mag = std::pow(10.0, uniform(rng, -4.0, 2.0));
      const Vec u = random_direction(rng, m) * mag;
      const double diff = (sys.f(t, x, u, i) - sys.f(t, x, u0, i)).norm();
      const double g = gamma(mag);
      if (diff > eta && g > 0.0) kappa = std::max(kappa, (diff - eta) / g);
    }
  }
  KappaEstimate out;
  out.kappa = kappa;
  out.delta = delta;
  out.N_rstar = N_r;
  out.kappa_formula = N_r * (2.0 / gamma(delta) + 1.0);
  out.samples = count + per_delta;
  return out;
}

}  // namespace iiss
