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

#pragma once

#include <cstddef>
#include <vector>

namespace dblsh {

// Standard normal pdf and upper tail Q(x) = P[Z > x].
double normal_pdf(double x);
double normal_upper_tail(double x);

/// Collision probability of the query-centric family h(o) = a.o, where two
/// points at distance tau collide when |h(o1) - h(o2)| <= w/2:
/// p = 2 Phi(w / (2 tau)) - 1. Throws DomainError for tau <= 0 or w < 0.
double dynamic_collision_probability(double tau, double w);

// 1 - dynamic_collision_probability, evaluated without cancellation.
double dynamic_collision_complement(double tau, double w);

/// Collision probability of the quantized family floor((a.o + b) / w),
/// integrated numerically by adaptive Simpson to 1e-9 absolute error.
double static_collision_probability(double tau, double w);

/// gamma f(gamma) / Q(gamma): the exponent alpha for which rho* <= 1/c^alpha
/// when the initial width is w0 = 2 gamma c^2.
double derive_alpha(double gamma);

struct CollisionProfile {
  double p1 = 0.0;        // at distance 1
  double p2 = 0.0;        // at distance c
  double rho_star = 0.0;  // ln(1/p1) / ln(1/p2)
  double alpha = 0.0;     // derive_alpha(w0 / (2 c^2))
};

CollisionProfile collision_profile(double c, double w0);

// rho of the quantized family at a fixed width w.
double static_rho(double c, double w);

struct DerivedParams {
  std::size_t K = 1;
  std::size_t L = 1;
  CollisionProfile profile;
};

/// K = ceil(ln(n/t) / ln(1/p2)), L = ceil((n/t)^rho*), both at least 1.
/// Requires n > t >= 1, c > 1, w0 > 0.
DerivedParams derive_params(std::size_t n, std::size_t t, double c, double w0);

/// [1, c, c^2, ...] up to and including the first entry >= r_max.
std::vector<double> radius_schedule(double c, double r_max);

}  // namespace dblsh
