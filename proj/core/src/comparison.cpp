#include "iiss/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace iiss {

namespace {

std::size_t segment_index(const std::vector<double>& knots, double s) {
  // index k with knots[k] <= s < knots[k+1]; caller guarantees s < knots.back()
  auto it = std::upper_bound(knots.begin(), knots.end(), s);
  return static_cast<std::size_t>(std::distance(knots.begin(), it)) - 1;
}

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, std::size_t k, double s) {
  const double w = (s - xs[k]) / (xs[k + 1] - xs[k]);
  return ys[k] + (ys[k + 1] - ys[k]) * w;
}

std::vector<double> thin_sorted(const std::vector<double>& sorted_unique, std::size_t max_count) {
  if (sorted_unique.size() <= max_count || max_count < 2) return sorted_unique;
  std::vector<double> out;
  out.reserve(max_count);
  const double n = static_cast<double>(sorted_unique.size() - 1);
  for (std::size_t k = 0; k < max_count; ++k) {
    const auto idx = static_cast<std::size_t>(std::llround(n * static_cast<double>(k) / static_cast<double>(max_count - 1)));
    if (out.empty() || sorted_unique[idx] > out.back()) out.push_back(sorted_unique[idx]);
  }
  return out;
}

}  // namespace

MonotoneFn::MonotoneFn(std::vector<double> knots, std::vector<double> values, double tail_slope,
                       GainClass gain_class)
    : knots_(std::move(knots)), values_(std::move(values)), tail_slope_(tail_slope), class_(gain_class) {
  if (knots_.size() != values_.size()) throw std::invalid_argument("MonotoneFn: knots and values differ in length");
  if (knots_.size() < 2) throw std::invalid_argument("MonotoneFn: need at least two knots");
  if (knots_[0] != 0.0 || values_[0] != 0.0) throw std::invalid_argument("MonotoneFn: must pass through the origin");
  for (std::size_t k = 1; k < knots_.size(); ++k) {
    if (!(knots_[k] > knots_[k - 1]) || !std::isfinite(knots_[k]))
      throw std::invalid_argument("MonotoneFn: knots not strictly increasing at index " + std::to_string(k));
    if (!(values_[k] > values_[k - 1]) || !std::isfinite(values_[k]))
      throw std::invalid_argument("MonotoneFn: values not strictly increasing at index " + std::to_string(k));
  }
  if (!(tail_slope_ > 0.0) || !std::isfinite(tail_slope_))
    throw std::invalid_argument("MonotoneFn: tail slope must be positive");
}

MonotoneFn MonotoneFn::identity() { return linear(1.0); }

MonotoneFn MonotoneFn::linear(double slope) {
  return MonotoneFn({0.0, 1.0}, {0.0, slope}, slope, GainClass::KInf);
}

MonotoneFn MonotoneFn::sample(const std::function<double(double)>& fn, std::span<const double> grid,
                              GainClass gain_class) {
  std::vector<double> knots{0.0};
  std::vector<double> values{0.0};
  for (double s : grid) {
    knots.push_back(s);
    values.push_back(fn(s));
  }
  const std::size_t n = knots.size();
  if (n < 2) throw std::invalid_argument("MonotoneFn::sample: empty grid");
  const double tail = (values[n - 1] - values[n - 2]) / (knots[n - 1] - knots[n - 2]);
  return MonotoneFn(std::move(knots), std::move(values), tail, gain_class);
}

std::vector<double> MonotoneFn::default_grid() {
  std::vector<double> grid(32);
  for (std::size_t k = 0; k < grid.size(); ++k)
    grid[k] = std::pow(10.0, -6.0 + 9.0 * static_cast<double>(k) / 31.0);
  return grid;
}

double MonotoneFn::operator()(double s) const {
  if (!(s >= 0.0)) throw std::domain_error("MonotoneFn: negative argument");
  if (s == 0.0) return 0.0;
  if (s >= knots_.back()) return values_.back() + tail_slope_ * (s - knots_.back());
  return interpolate(knots_, values_, segment_index(knots_, s), s);
}

double MonotoneFn::slope_at(double s) const {
  if (s >= knots_.back()) return tail_slope_;
  const std::size_t k = segment_index(knots_, std::max(s, 0.0));
  return (values_[k + 1] - values_[k]) / (knots_[k + 1] - knots_[k]);
}

MonotoneFn MonotoneFn::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("MonotoneFn::scaled: factor must be positive");
  std::vector<double> v(values_);
  for (double& x : v) x *= factor;
  return MonotoneFn(knots_, std::move(v), tail_slope_ * factor, class_);
}

double eval(const MonotoneFn& fn, double s) { return fn(s); }

MonotoneFn inverse(const MonotoneFn& fn) {
  return MonotoneFn(fn.values(), fn.knots(), 1.0 / fn.tail_slope(), fn.gain_class());
}

MonotoneFn compose(const MonotoneFn& outer, const MonotoneFn& inner) {
  std::vector<double> values;
  values.reserve(inner.knots().size());
  for (double v : inner.values()) values.push_back(outer(v));
  repair_strict(values);
  const double tail = inner.tail_slope() * outer.slope_at(inner.values().back());
  const GainClass cls = (outer.gain_class() == GainClass::KInf && inner.gain_class() == GainClass::KInf)
                            ? GainClass::KInf
                            : GainClass::K;
  return MonotoneFn(inner.knots(), std::move(values), tail, cls);
}

MonotoneFn pointwise_max(const MonotoneFn& f, const MonotoneFn& g) {
  std::vector<double> merged;
  merged.reserve(f.knots().size() + g.knots().size() + 4);
  std::merge(f.knots().begin(), f.knots().end(), g.knots().begin(), g.knots().end(), std::back_inserter(merged));
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

  std::vector<double> knots;
  knots.reserve(2 * merged.size());
  knots.push_back(merged[0]);
  for (std::size_t k = 1; k < merged.size(); ++k) {
    const double a = merged[k - 1];
    const double b = merged[k];
    const double da = f(a) - g(a);
    const double db = f(b) - g(b);
    if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
      const double root = a + (b - a) * da / (da - db);
      if (root > a && root < b) knots.push_back(root);
    }
    knots.push_back(b);
  }
  // both operands are affine beyond the last merged knot
  const double last = knots.back();
  const double d_last = f(last) - g(last);
  const double dslope = f.tail_slope() - g.tail_slope();
  bool tail_crossing = false;
  if (dslope != 0.0) {
    const double root = last - d_last / dslope;
    if (root > last && std::isfinite(root)) {
      knots.push_back(root);
      tail_crossing = true;
    }
  }
  double tail_slope = std::max(f.tail_slope(), g.tail_slope());
  if (!tail_crossing && d_last > 0.0) tail_slope = f.tail_slope();
  if (!tail_crossing && d_last < 0.0) tail_slope = g.tail_slope();

  std::vector<double> values;
  values.reserve(knots.size());
  for (double s : knots) values.push_back(std::max(f(s), g(s)));
  values[0] = 0.0;
  repair_strict(values);

  const GainClass cls = (f.gain_class() == GainClass::KInf || g.gain_class() == GainClass::KInf) ? GainClass::KInf
                                                                                                 : GainClass::K;
  return MonotoneFn(std::move(knots), std::move(values), tail_slope, cls);
}

void repair_strict(std::vector<double>& values) {
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (!(values[k] > values[k - 1])) values[k] = values[k - 1] + strict_slack(values[k - 1]);
  }
}

MonotoneFn fit_k_envelope(std::span<const GainSample> points, EnvelopeMode mode) {
  if (points.empty()) throw std::invalid_argument("fit_k_envelope: no samples");
  std::vector<GainSample> sorted(points.begin(), points.end());
  for (const auto& p : sorted) {
    if (!(p.s >= 0.0) || !(p.y >= 0.0) || !std::isfinite(p.s) || !std::isfinite(p.y))
      throw std::invalid_argument("fit_k_envelope: samples must be finite and nonnegative");
  }
  std::sort(sorted.begin(), sorted.end(), [](const GainSample& a, const GainSample& b) { return a.s < b.s; });

  std::vector<double> knots{0.0};
  std::vector<double> values{0.0};
  if (mode == EnvelopeMode::UpperMajorant) {
    double running = 0.0;
    for (const auto& p : sorted) {
      if (p.s == 0.0) {
        if (p.y > 0.0) throw std::invalid_argument("fit_k_envelope: positive value at s = 0 cannot be dominated");
        continue;
      }
      running = std::max(running, p.y);
      if (p.s == knots.back()) {
        values.back() = running;
      } else {
        knots.push_back(p.s);
        values.push_back(running);
      }
    }
    if (knots.size() < 2) {
      // only samples at the origin
      knots.push_back(1.0);
      values.push_back(0.0);
    }
    repair_strict(values);
  } else {
    // running minimum from the right over samples with s' >= s
    std::vector<double> ks;
    std::vector<double> vs;
    double running = std::numeric_limits<double>::infinity();
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
      if (it->s == 0.0) continue;
      running = std::min(running, it->y);
      if (!ks.empty() && ks.back() == it->s) {
        vs.back() = running;
      } else {
        ks.push_back(it->s);
        vs.push_back(running);
      }
    }
    if (ks.empty()) throw std::invalid_argument("fit_k_envelope: lower envelope needs a sample with s > 0");
    std::reverse(ks.begin(), ks.end());
    std::reverse(vs.begin(), vs.end());
    // strictness by lowering earlier knots
    for (std::size_t k = vs.size() - 1; k-- > 0;) {
      if (!(vs[k] < vs[k + 1])) vs[k] = vs[k + 1] - strict_slack(vs[k + 1]);
    }
    if (!(vs[0] > 0.0))
      throw std::invalid_argument("fit_k_envelope: zero sample at s > 0 admits no class-K minorant");
    knots.insert(knots.end(), ks.begin(), ks.end());
    values.insert(values.end(), vs.begin(), vs.end());
  }

  const std::size_t n = knots.size();
  double tail = (values[n - 1] - values[n - 2]) / (knots[n - 1] - knots[n - 2]);
  if (!(tail > 0.0)) tail = strict_slack(values[n - 1]);
  return MonotoneFn(std::move(knots), std::move(values), tail, GainClass::KInf);
}

double envelope_tightness(const MonotoneFn& fn, std::span<const GainSample> points, EnvelopeMode mode) {
  double gap = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    const double d = mode == EnvelopeMode::UpperMajorant ? fn(p.s) - p.y : p.y - fn(p.s);
    gap = std::max(gap, d);
  }
  return gap;
}

KLFn::KLFn(std::vector<double> r_knots, std::vector<double> t_knots, std::vector<std::vector<double>> values,
           double r_tail_slope, double t_decay_rate)
    : r_knots_(std::move(r_knots)),
      t_knots_(std::move(t_knots)),
      values_(std::move(values)),
      r_tail_slope_(r_tail_slope),
      t_decay_rate_(t_decay_rate) {
  if (r_knots_.size() < 2 || t_knots_.empty()) throw std::invalid_argument("KLFn: grid too small");
  if (r_knots_[0] != 0.0 || t_knots_[0] != 0.0) throw std::invalid_argument("KLFn: grids must start at 0");
  for (std::size_t i = 1; i < r_knots_.size(); ++i)
    if (!(r_knots_[i] > r_knots_[i - 1])) throw std::invalid_argument("KLFn: r knots not strictly increasing");
  for (std::size_t j = 1; j < t_knots_.size(); ++j)
    if (!(t_knots_[j] > t_knots_[j - 1])) throw std::invalid_argument("KLFn: t knots not strictly increasing");
  if (values_.size() != r_knots_.size()) throw std::invalid_argument("KLFn: value rows do not match r grid");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].size() != t_knots_.size()) throw std::invalid_argument("KLFn: value columns do not match t grid");
    for (std::size_t j = 0; j < t_knots_.size(); ++j) {
      const double v = values_[i][j];
      if (!std::isfinite(v)) throw std::invalid_argument("KLFn: non-finite value");
      if (i == 0 && v != 0.0) throw std::invalid_argument("KLFn: beta(0, t) must be 0");
      if (i > 0 && !(v > values_[i - 1][j])) throw std::invalid_argument("KLFn: not strictly increasing in r");
      if (j > 0 && v > values_[i][j - 1]) throw std::invalid_argument("KLFn: increasing in t");
    }
  }
  if (!(r_tail_slope_ > 0.0)) throw std::invalid_argument("KLFn: r tail slope must be positive");
  if (!(t_decay_rate_ > 0.0)) throw std::invalid_argument("KLFn: t decay rate must be positive");
}

namespace {

double fitted_decay_rate(const std::vector<double>& t_knots, const std::vector<double>& last_row) {
  const std::size_t m = t_knots.size();
  if (m >= 2 && last_row[m - 1] > 0.0 && last_row[m - 2] > last_row[m - 1]) {
    const double rate = std::log(last_row[m - 2] / last_row[m - 1]) / (t_knots[m - 1] - t_knots[m - 2]);
    return std::clamp(rate, 1e-6, 1e3);
  }
  return 1.0 / std::max(1.0, t_knots.back());
}

double fitted_r_tail(const std::vector<double>& r_knots, const std::vector<std::vector<double>>& values) {
  const std::size_t n = r_knots.size();
  const double slope = (values[n - 1][0] - values[n - 2][0]) / (r_knots[n - 1] - r_knots[n - 2]);
  return slope > 0.0 ? slope : strict_slack(values[n - 1][0]);
}

}  // namespace

KLFn KLFn::sample(const std::function<double(double, double)>& fn, std::span<const double> r_grid,
                  std::span<const double> t_grid) {
  std::vector<double> rk{0.0};
  rk.insert(rk.end(), r_grid.begin(), r_grid.end());
  std::vector<double> tk{0.0};
  tk.insert(tk.end(), t_grid.begin(), t_grid.end());
  std::vector<std::vector<double>> v(rk.size(), std::vector<double>(tk.size(), 0.0));
  for (std::size_t i = 1; i < rk.size(); ++i)
    for (std::size_t j = 0; j < tk.size(); ++j) v[i][j] = fn(rk[i], tk[j]);
  const double rate = fitted_decay_rate(tk, v.back());
  const double tail = fitted_r_tail(rk, v);
  return KLFn(std::move(rk), std::move(tk), std::move(v), tail, rate);
}

double KLFn::row_at(double r, std::size_t j) const {
  const std::size_t n = r_knots_.size();
  if (r >= r_knots_.back()) {
    const double base = values_[n - 1][j];
    const double weight = base / values_[n - 1][0];
    return base + r_tail_slope_ * (r - r_knots_.back()) * weight;
  }
  const std::size_t i = segment_index(r_knots_, r);
  const double w = (r - r_knots_[i]) / (r_knots_[i + 1] - r_knots_[i]);
  return values_[i][j] + (values_[i + 1][j] - values_[i][j]) * w;
}

double KLFn::operator()(double r, double t) const {
  if (!(r >= 0.0) || !(t >= 0.0)) throw std::domain_error("KLFn: negative argument");
  if (r == 0.0) return 0.0;
  if (t >= t_knots_.back()) {
    return row_at(r, t_knots_.size() - 1) * std::exp(-t_decay_rate_ * (t - t_knots_.back()));
  }
  const std::size_t j = segment_index(t_knots_, t);
  const double w = (t - t_knots_[j]) / (t_knots_[j + 1] - t_knots_[j]);
  const double a = row_at(r, j);
  const double b = row_at(r, j + 1);
  return a + (b - a) * w;
}

KLFn KLFn::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("KLFn::scaled: factor must be positive");
  auto v = values_;
  for (auto& row : v)
    for (double& x : row) x *= factor;
  return KLFn(r_knots_, t_knots_, std::move(v), r_tail_slope_ * factor, t_decay_rate_);
}

double eval_kl(const KLFn& beta, double r, double t) { return beta(r, t); }

KLFn fit_kl_envelope(std::span<const KLSample> samples, const KLFitOptions& options) {
  if (samples.empty()) throw std::invalid_argument("fit_kl_envelope: no samples");
  std::vector<double> rs;
  std::vector<double> ts;
  rs.reserve(samples.size());
  ts.reserve(samples.size());
  for (const auto& s : samples) {
    if (!(s.r >= 0.0) || !(s.t >= 0.0) || !(s.y >= 0.0) || !std::isfinite(s.r) || !std::isfinite(s.t) ||
        !std::isfinite(s.y))
      throw std::invalid_argument("fit_kl_envelope: samples must be finite and nonnegative");
    if (s.r == 0.0 && s.y > 0.0)
      throw std::invalid_argument("fit_kl_envelope: positive value at r = 0 cannot be dominated");
    if (s.r > 0.0) rs.push_back(s.r);
    ts.push_back(s.t);
  }
  std::sort(rs.begin(), rs.end());
  rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  std::vector<double> r_knots{0.0};
  if (rs.empty()) {
    r_knots.push_back(1.0);
  } else {
    auto thinned = thin_sorted(rs, options.max_r_knots);
    r_knots.insert(r_knots.end(), thinned.begin(), thinned.end());
  }
  std::vector<double> t_knots{0.0};
  {
    auto thinned = thin_sorted(ts, options.max_t_knots);
    for (double t : thinned)
      if (t > 0.0) t_knots.push_back(t);
  }

  const std::size_t nr = r_knots.size();
  const std::size_t nt = t_knots.size();
  std::vector<std::vector<double>> grid(nr, std::vector<double>(nt, 0.0));
  for (const auto& s : samples) {
    if (s.r == 0.0) continue;
    const auto c = static_cast<std::size_t>(std::lower_bound(t_knots.begin(), t_knots.end(), s.t) - t_knots.begin());
    const auto i = static_cast<std::size_t>(std::lower_bound(r_knots.begin(), r_knots.end(), s.r) - r_knots.begin());
    if (r_knots[i] == s.r) {
      grid[i][c] = std::max(grid[i][c], s.y);
    } else if (i >= 2) {
      grid[i - 1][c] = std::max(grid[i - 1][c], s.y);
      grid[i][c] = std::max(grid[i][c], s.y);
    } else {
      grid[i][c] = std::max(grid[i][c], s.y * r_knots[i] / s.r);
    }
  }
  if (options.pool_ratios) {
    std::vector<double> ratio(nt, 0.0);
    for (std::size_t i = 1; i < nr; ++i)
      for (std::size_t c = 0; c < nt; ++c) ratio[c] = std::max(ratio[c], grid[i][c] / r_knots[i]);
    for (std::size_t i = 1; i < nr; ++i)
      for (std::size_t c = 0; c < nt; ++c) grid[i][c] = std::max(grid[i][c], ratio[c] * r_knots[i]);
  }
  // nondecreasing in r, nonincreasing in t
  for (std::size_t i = 1; i < nr; ++i) {
    for (std::size_t jj = nt; jj-- > 0;) {
      double v = std::max(grid[i][jj], grid[i - 1][jj]);
      if (jj + 1 < nt) v = std::max(v, grid[i][jj + 1]);
      grid[i][jj] = v;
    }
  }
  double top = 0.0;
  for (const auto& row : grid) top = std::max(top, row[0]);
  const double slack = strict_slack(top);
  for (std::size_t i = 1; i < nr; ++i)
    for (double& v : grid[i]) v += slack * static_cast<double>(i);

  const double rate = fitted_decay_rate(t_knots, grid.back());
  const double tail = fitted_r_tail(r_knots, grid);
  return KLFn(std::move(r_knots), std::move(t_knots), std::move(grid), tail, rate);
}

}  // namespace iiss
