// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradflow/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace gradflow {

namespace {

// Visits every k-subset of {0..n-1} in lexicographic order.
template <class Fn>
void for_each_subset(std::size_t n, std::size_t k, Fn&& fn) {
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(std::span<const std::size_t>(idx));
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double fa, double b,
                            double fb, double m, double fm, double whole, double eps, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  return adaptive_simpson_rec(f, a, fa, b, fb, m, fm, simpson(a, fa, b, fb, fm), eps, 60);
}

// (eᵘ − 1)/u, continuous at u = 0.
double expm1_over_u(double u) { return u == 0.0 ? 1.0 : std::expm1(u) / u; }

}  // namespace

SvmResult hard_margin_svm(const Dataset& data) {
  data.validate();
  if (data.task != TaskKind::binary) throw OracleError("hard-margin SVM needs binary labels");
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  if (n > kSvmMaxSamples) {
    throw OracleError("brute-force SVM is limited to " + std::to_string(kSvmMaxSamples) +
                      " samples, got " + std::to_string(n));
  }

  constexpr double kFeasTol = 1e-9;
  std::optional<Vector> best;
  double best_norm = std::numeric_limits<double>::infinity();
  // Least violating consistent candidate, for the infeasibility report.
  Vector least_bad;
  double least_bad_score = -std::numeric_limits<double>::infinity();

  for (std::size_t k = 1; k <= std::min(n, d); ++k) {
    for_each_subset(n, k, [&](std::span<const std::size_t> subset) {
      Matrix xs(subset.size(), d);
      Vector ys(subset.size());
      for (std::size_t i = 0; i < subset.size(); ++i) {
        std::copy(data.inputs[subset[i]].begin(), data.inputs[subset[i]].end(), xs.row(i).begin());
        ys[i] = data.labels[subset[i]];
      }
      if (max_abs(xs.data()) == 0.0) return;
      const Vector w = min_norm_least_squares(xs, ys);
      const Vector fit = matvec(xs, w);
      for (std::size_t i = 0; i < fit.size(); ++i)
        if (std::fabs(fit[i] - ys[i]) > kFeasTol) return;
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j)
        worst = std::min(worst, data.labels[j] * dot(w, data.inputs[j]));
      const double wn = norm2(w);
      if (worst >= 1.0 - kFeasTol) {
        if (wn < best_norm * (1.0 - 1e-12)) {
          best_norm = wn;
          best = w;
        }
      } else if (wn > 0.0 && worst / wn > least_bad_score) {
        least_bad_score = worst / wn;
        least_bad = w;
      }
    });
  }

  SvmResult out;
  if (best) {
    MarginSolution s;
    s.w_raw = *best;
    s.margin = 1.0 / best_norm;
    s.w_tilde = s.w_raw;
    for (double& v : s.w_tilde) v /= best_norm;
    for (std::size_t j = 0; j < n; ++j)
      if (data.labels[j] * dot(s.w_raw, data.inputs[j]) <= 1.0 + kFeasTol)
        s.support_indices.push_back(j);
    out.solution = std::move(s);
    return out;
  }
  out.sign_pattern.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    const double m = least_bad.empty() ? 0.0 : data.labels[j] * dot(least_bad, data.inputs[j]);
    out.sign_pattern[j] = m > 0.0 ? 1 : (m < 0.0 ? -1 : 0);
    if (out.sign_pattern[j] <= 0) out.violated_indices.push_back(j);
  }
  return out;
}

double logarithmic_integral(double z) {
  if (!(z > 1.0)) {
    std::ostringstream os;
    os << "logarithmic_integral needs z > 1, got " << z;
    throw OracleError(os.str());
  }
  if (!std::isfinite(z)) return std::numeric_limits<double>::infinity();
  // With t = eᵘ the principal value splits into γ + log L, which carries the
  // singularity at t = 1, plus an entire integrand over [0, L], L = log z.
  const double big_l = std::log(z);
  const int panels = std::max(1, static_cast<int>(std::ceil(big_l)));
  const double width = big_l / panels;
  double tail = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double lo = i * width;
    const double hi = i + 1 == panels ? big_l : lo + width;
    const double est = (hi - lo) * expm1_over_u(hi);
    tail += adaptive_simpson(expm1_over_u, lo, hi, 1e-15 * est);
  }
  return std::numbers::egamma + std::log(big_l) + tail;
}

double inverse_logarithmic_integral(double value) {
  if (!std::isfinite(value)) throw OracleError("inverse_logarithmic_integral of non-finite value");
  double lo = 1.0 + 1e-6;
  while (logarithmic_integral(lo) > value) {
    const double next = 1.0 + (lo - 1.0) * 1e-3;
    if (next == 1.0) return std::nextafter(1.0, 2.0);
    lo = next;
  }
  double hi = 2.0;
  while (logarithmic_integral(hi) < value) {
    lo = hi;
    hi *= 2.0;
  }
  // Newton on li(z) − value with li′(z) = 1/log z, kept inside the bracket;
  // a step that leaves the bracket is replaced by bisection.
  double z = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double g = logarithmic_integral(z) - value;
    if (g == 0.0) return z;
    if (g < 0.0)
      lo = z;
    else
      hi = z;
    double next = z - g * std::log(z);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - z) <= 1e-15 * z || next == lo || next == hi) return next;
    z = next;
  }
  return z;
}

double logarithmic_integral_limit_form(double z) {
  return logarithmic_integral(z) - z / std::log(z);
}

double growth_constant(int layers, double f_tilde, double rho0) {
  if (!(f_tilde > 0.0)) throw OracleError("growth law needs f̃ > 0");
  switch (layers) {
    case 1:
      return std::exp(rho0 * f_tilde);
    case 2:
      if (!(rho0 > 0.0)) throw OracleError("two-layer growth law needs ρ₀ > 0");
      return logarithmic_integral(std::exp(rho0 * rho0 * f_tilde));
    default:
      throw OracleError("closed-form growth exists for K ∈ {1, 2}; integrate K = " +
                        std::to_string(layers) + " numerically");
  }
}

double growth_closed_form(int layers, double f_tilde, double t, double constant) {
  if (!(f_tilde > 0.0)) throw OracleError("growth law needs f̃ > 0");
  switch (layers) {
    case 1:
      return std::log(f_tilde * f_tilde * t + constant) / f_tilde;
    case 2: {
      const double r = inverse_logarithmic_integral(4.0 * f_tilde * t + constant);
      return std::sqrt(std::log(r) / f_tilde);
    }
    default:
      throw OracleError("closed-form growth exists for K ∈ {1, 2}; integrate K = " +
                        std::to_string(layers) + " numerically");
  }
}

NonseparableEquilibrium nonseparable_equilibrium_1d(double x1, double x2) {
  if (!(x1 > 0.0) || !(x2 > x1)) {
    std::ostringstream os;
    os << "nonseparable_equilibrium_1d needs 0 < x1 < x2, got x1=" << x1 << " x2=" << x2;
    throw OracleError(os.str());
  }
  auto flow = [&](double w) { return -x1 * std::exp(x1 * w) + x2 * std::exp(-x2 * w); };
  // F(0) = x2 − x1 > 0 and F is strictly decreasing.
  double lo = 0.0;
  double hi = 1.0;
  while (flow(hi) > 0.0) hi *= 2.0;
  NonseparableEquilibrium out;
  while (out.iterations < 2000) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    ++out.iterations;
    if (flow(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  out.w = std::fabs(flow(lo)) <= std::fabs(flow(hi)) ? lo : hi;
  out.slope = -x1 * x1 * std::exp(x1 * out.w) - x2 * x2 * std::exp(-x2 * out.w);
  return out;
}

Vector central_difference_gradient(const ScalarField& f, std::span<const double> point,
                                   double step) {
  Vector p(point.begin(), point.end());
  Vector g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + step;
    const double fp = f(p);
    p[i] = orig - step;
    const double fm = f(p);
    p[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw OracleError("non-finite function value while differencing coordinate " +
                        std::to_string(i));
    }
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

double fd_gradient_check(const ScalarField& f, std::span<const double> point,
                         std::span<const double> gradient, double step) {
  if (gradient.size() != point.size()) throw OracleError("gradient and point lengths differ");
  const Vector fd = central_difference_gradient(f, point, step);
  const double floor = std::max(1e-2 * max_abs(fd), 1e-300);
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    if (!std::isfinite(gradient[i])) throw OracleError("non-finite analytic gradient entry");
    const double denom = std::max({std::fabs(gradient[i]), std::fabs(fd[i]), floor});
    worst = std::max(worst, std::fabs(gradient[i] - fd[i]) / denom);
  }
  return worst;
}

}  // namespace gradflow
