#pragma once

// Comparison functions: piecewise-linear class-K / K-infinity gains and
// gridded class-KL envelopes, plus monotone envelope fitting from samples.

#include <functional>
#include <span>
#include <vector>

namespace iiss {

enum class GainClass { K, KInf };

/// Slack added per knot when a flat run has to be made strictly increasing.
inline double strict_slack(double value) { return 1e-12 * (1.0 + (value < 0 ? -value : value)); }

/// Piecewise-linear comparison function through (0, 0).
///
/// Knots are strictly increasing and start at 0; values are strictly
/// increasing and start at 0. Beyond the last knot the function continues
/// linearly with `tail_slope` > 0, so every instance is unbounded.
class MonotoneFn {
 public:
  MonotoneFn(std::vector<double> knots, std::vector<double> values, double tail_slope,
             GainClass gain_class = GainClass::KInf);

  static MonotoneFn identity();
  static MonotoneFn linear(double slope);

  /// Samples `fn` on {0} ∪ `grid` (grid strictly positive, increasing). The
  /// tail continues with the slope of the last segment.
  static MonotoneFn sample(const std::function<double(double)>& fn, std::span<const double> grid,
                           GainClass gain_class = GainClass::KInf);

  /// 32 log-spaced knots over [1e-6, 1e3].
  static std::vector<double> default_grid();

  double operator()(double s) const;

  /// Right derivative at s.
  double slope_at(double s) const;

  MonotoneFn scaled(double factor) const;

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  double tail_slope() const { return tail_slope_; }
  GainClass gain_class() const { return class_; }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  double tail_slope_;
  GainClass class_;
};

double eval(const MonotoneFn& fn, double s);
MonotoneFn inverse(const MonotoneFn& fn);
MonotoneFn compose(const MonotoneFn& outer, const MonotoneFn& inner);
MonotoneFn pointwise_max(const MonotoneFn& f, const MonotoneFn& g);

/// Makes a nondecreasing value sequence strictly increasing by adding
/// cumulative slack on flat runs. values[0] is left untouched.
void repair_strict(std::vector<double>& values);

enum class EnvelopeMode { UpperMajorant, LowerMinorant };

struct GainSample {
  double s;
  double y;
};

/// Minimal nondecreasing majorant (or maximal nondecreasing minorant) of the
/// samples with knots at the distinct sample abscissae, forced through the
/// origin and made strictly increasing.
MonotoneFn fit_k_envelope(std::span<const GainSample> points, EnvelopeMode mode);

/// Largest gap between the envelope and the data (fn(s) - y for an upper
/// envelope, y - fn(s) for a lower one). Zero means the fit touches a sample.
double envelope_tightness(const MonotoneFn& fn, std::span<const GainSample> points, EnvelopeMode mode);

/// Gridded class-KL function beta(r, t).
///
/// Bilinear inside the grid. Past the last r knot the last row is continued
/// with `r_tail_slope`, scaled so that the continuation still decays in t.
/// Past the last t knot values decay as exp(-t_decay_rate * (t - t_last)).
class KLFn {
 public:
  /// values[i][j] = beta(r_knots[i], t_knots[j]).
  KLFn(std::vector<double> r_knots, std::vector<double> t_knots, std::vector<std::vector<double>> values,
       double r_tail_slope, double t_decay_rate);

  /// Samples `fn` on ({0} ∪ r_grid) × ({0} ∪ t_grid). Decay rate and tail
  /// slope are read off the last grid cells.
  static KLFn sample(const std::function<double(double, double)>& fn, std::span<const double> r_grid,
                     std::span<const double> t_grid);

  double operator()(double r, double t) const;

  KLFn scaled(double factor) const;

  const std::vector<double>& r_knots() const { return r_knots_; }
  const std::vector<double>& t_knots() const { return t_knots_; }
  const std::vector<std::vector<double>>& values() const { return values_; }
  double r_tail_slope() const { return r_tail_slope_; }
  double t_decay_rate() const { return t_decay_rate_; }

 private:
  double row_at(double r, std::size_t j) const;

  std::vector<double> r_knots_;
  std::vector<double> t_knots_;
  std::vector<std::vector<double>> values_;
  double r_tail_slope_;
  double t_decay_rate_;
};

double eval_kl(const KLFn& beta, double r, double t);

struct KLSample {
  double r;
  double t;
  double y;
};

struct KLFitOptions {
  std::size_t max_r_knots = 64;
  std::size_t max_t_knots = 96;
  /// Also dominate r * sup(y' / r') over all samples, i.e. share one
  /// relative-decay envelope across radii.
  bool pool_ratios = false;
};

/// Grid envelope that dominates every sample under bilinear evaluation and
/// is nondecreasing in r and nonincreasing in t.
KLFn fit_kl_envelope(std::span<const KLSample> samples, const KLFitOptions& options = {});

}  // namespace iiss
