// Copyright 2026-present the dblsh authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dblsh/lsh_math.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include "dblsh/errors.hpp"

namespace dblsh {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double simpson(double fa, double fm, double fb, double a, double b) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(fa, flm, fm, a, m);
  const double right = simpson(fm, frm, fb, m, b);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return adaptive_simpson(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48);
}

void check_tau(double tau) {
  if (!(tau > 0.0)) {
    throw DomainError("distance tau must be positive, got " + std::to_string(tau));
  }
}

}  // namespace

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_upper_tail(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double dynamic_collision_probability(double tau, double w) {
  check_tau(tau);
  if (!(w >= 0.0)) {
    throw DomainError("bucket width must be non-negative, got " + std::to_string(w));
  }
  return std::erf(w / (2.0 * tau) * kInvSqrt2);
}

double dynamic_collision_complement(double tau, double w) {
  check_tau(tau);
  if (!(w >= 0.0)) {
    throw DomainError("bucket width must be non-negative, got " + std::to_string(w));
  }
  return std::erfc(w / (2.0 * tau) * kInvSqrt2);
}

double static_collision_probability(double tau, double w) {
  check_tau(tau);
  if (!(w > 0.0)) {
    throw DomainError("bucket width must be positive, got " + std::to_string(w));
  }
  // The integrand is below 1e-300 past 40 tau.
  const double upper = std::min(w, 40.0 * tau);
  auto integrand = [tau, w](double t) { return normal_pdf(t / tau) / tau * (1.0 - t / w); };
  return 2.0 * integrate(integrand, 0.0, upper, 0.5e-9);
}

double derive_alpha(double gamma) {
  if (!(gamma > 0.0)) {
    throw DomainError("gamma must be positive, got " + std::to_string(gamma));
  }
  return gamma * normal_pdf(gamma) / normal_upper_tail(gamma);
}

CollisionProfile collision_profile(double c, double w0) {
  if (!(c > 1.0)) {
    throw ParameterError("approximation ratio c must exceed 1, got " + std::to_string(c));
  }
  if (!(w0 > 0.0)) {
    throw ParameterError("initial width w0 must be positive, got " + std::to_string(w0));
  }
  CollisionProfile p;
  const double q1 = dynamic_collision_complement(1.0, w0);
  const double q2 = dynamic_collision_complement(c, w0);
  p.p1 = 1.0 - q1;
  p.p2 = 1.0 - q2;
  p.rho_star = std::log1p(-q1) / std::log1p(-q2);
  p.alpha = derive_alpha(w0 / (2.0 * c * c));
  return p;
}

double static_rho(double c, double w) {
  if (!(c > 1.0)) {
    throw ParameterError("approximation ratio c must exceed 1");
  }
  const double p1 = static_collision_probability(1.0, w);
  const double p2 = static_collision_probability(c, w);
  return std::log(p1) / std::log(p2);
}

DerivedParams derive_params(std::size_t n, std::size_t t, double c, double w0) {
  if (t < 1) {
    throw ParameterError("candidate multiplier t must be at least 1");
  }
  if (n <= t) {
    throw ParameterError("derive_params requires n > t (n=" + std::to_string(n) +
                         ", t=" + std::to_string(t) + ")");
  }
  DerivedParams out;
  out.profile = collision_profile(c, w0);
  const double ratio = static_cast<double>(n) / static_cast<double>(t);
  const double log_inv_p2 = -std::log1p(-dynamic_collision_complement(c, w0));
  const double k = std::ceil(std::log(ratio) / log_inv_p2);
  const double l = std::ceil(std::pow(ratio, out.profile.rho_star));
  if (!std::isfinite(k) || k > 1e9) {
    throw ParameterError("derived K is not representable (p2 too close to 1)");
  }
  out.K = static_cast<std::size_t>(std::max(1.0, k));
  out.L = static_cast<std::size_t>(std::max(1.0, l));
  return out;
}

std::vector<double> radius_schedule(double c, double r_max) {
  if (!(c > 1.0)) {
    throw ParameterError("approximation ratio c must exceed 1");
  }
  if (!std::isfinite(r_max)) {
    throw ParameterError("maximum radius must be finite");
  }
  std::vector<double> radii{1.0};
  for (int i = 1; radii.back() < r_max; ++i) {
    radii.push_back(std::pow(c, i));
  }
  return radii;
}

}  // namespace dblsh
