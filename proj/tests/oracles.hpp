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

// Independent reference computations used only by the tests. Nothing here
// calls into the library's numerical code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <random>
#include <utility>
#include <vector>

namespace dblsh::testing {

inline double pdf(double x) { return std::exp(-x * x / 2.0) / 2.5066282746310002; }

// Composite Simpson rule with a fixed, fine partition.
template <typename F>
double simpson(const F& f, double a, double b, int intervals = 20000) {
  const double h = (b - a) / intervals;
  double sum = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) {
    sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

inline double normal_mass(double a, double b) { return simpson(pdf, a, b); }

inline double upper_tail(double g) { return normal_mass(g, g + 40.0); }

// Closed form of the quantized-family collision probability.
inline double static_probability_closed_form(double tau, double w) {
  const double r = w / tau;
  return normal_mass(-r, r) - 2.0 / r * pdf(0.0) * (1.0 - std::exp(-r * r / 2.0));
}

// Monte-Carlo estimate of P[|a.(o1 - o2)| <= w/2] over Gaussian a, with
// ||o1 - o2|| = tau, in `dim` dimensions.
inline double monte_carlo_dynamic(double tau, double w, int trials, std::uint64_t seed,
                                  int dim = 8) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::vector<double> diff(dim);
  double norm = 0.0;
  for (auto& v : diff) {
    v = normal(gen);
    norm += v * v;
  }
  for (auto& v : diff) v *= tau / std::sqrt(norm);
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    double dot = 0.0;
    for (int j = 0; j < dim; ++j) dot += normal(gen) * diff[j];
    hits += std::abs(dot) <= w / 2.0 ? 1 : 0;
  }
  return static_cast<double>(hits) / trials;
}

// Monte-Carlo estimate of P[floor((a.o1 + b)/w) == floor((a.o2 + b)/w)].
inline double monte_carlo_static(double tau, double w, int trials, std::uint64_t seed,
                                 int dim = 8) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, w);
  std::vector<double> o1(dim), o2(dim);
  double norm = 0.0;
  for (int j = 0; j < dim; ++j) {
    o1[j] = normal(gen);
    o2[j] = normal(gen);
    norm += (o2[j] - o1[j]) * (o2[j] - o1[j]);
  }
  for (int j = 0; j < dim; ++j) o2[j] = o1[j] + (o2[j] - o1[j]) * tau / std::sqrt(norm);
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    double d1 = 0.0, d2 = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double a = normal(gen);
      d1 += a * o1[j];
      d2 += a * o2[j];
    }
    const double b = uniform(gen);
    hits += std::floor((d1 + b) / w) == std::floor((d2 + b) / w) ? 1 : 0;
  }
  return static_cast<double>(hits) / trials;
}

// Heap-based exact k-NN over row-major points, ascending and id-tiebroken.
inline std::vector<std::pair<double, std::uint32_t>> heap_knn(
    const std::vector<std::vector<double>>& points, const std::vector<double>& q, std::size_t k) {
  std::priority_queue<std::pair<double, std::uint32_t>> heap;
  for (std::uint32_t i = 0; i < points.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += (points[i][j] - q[j]) * (points[i][j] - q[j]);
    heap.emplace(std::sqrt(s), i);
    if (heap.size() > k) heap.pop();
  }
  std::vector<std::pair<double, std::uint32_t>> out;
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace dblsh::testing
