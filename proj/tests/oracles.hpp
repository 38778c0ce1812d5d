// Copyright 2026 The vflrps Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reference computations written independently of the library: quadratic
// ranking, textbook correlation, centralized gradient descent and a pooled
// plaintext redundancy report. Tests compare library output against these.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace vflrps::oracle {

// rank_i = 1 + #{x_j < x_i} + (#{x_j == x_i} - 1) / 2
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0;
    double equal = 0;
    for (double v : x) {
      if (v < x[i]) less += 1;
      if (v == x[i]) equal += 1;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

// Textbook Pearson: cov / (sx * sy) with two-pass sums; 0 when either side is constant.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0;
  double my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline bool constant(const std::vector<double>& x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (constant(x) || constant(y)) return 0.0;
  return pearson(ranks(x), ranks(y));
}

// 1 - 6 sum d^2 / (n (n^2 - 1)), valid without ties.
inline double spearman_classical(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double n = static_cast<double>(x.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

// Column-wise (v - mean) / population std, std 0 mapped to 1.
inline std::vector<std::vector<double>> standardize(const std::vector<std::vector<double>>& cols) {
  std::vector<std::vector<double>> out;
  for (const auto& c : cols) {
    double m = 0;
    for (double v : c) m += v;
    m /= static_cast<double>(c.size());
    double ss = 0;
    for (double v : c) ss += (v - m) * (v - m);
    double sd = std::sqrt(ss / static_cast<double>(c.size()));
    if (sd == 0) sd = 1;
    std::vector<double> s;
    for (double v : c) s.push_back((v - m) / sd);
    out.push_back(std::move(s));
  }
  return out;
}

struct LinearModel {
  std::vector<double> w;
  double b = 0.0;
};

// Full-batch gradient descent on all columns at once (row-major loops).
inline LinearModel centralized_gd(const std::vector<std::vector<double>>& cols, const std::vector<double>& y, double lr,
                                  int epochs, bool logistic) {
  const std::size_t n = y.size();
  const std::size_t d = cols.size();
  LinearModel m;
  m.w.assign(d, 0.0);
  std::vector<double> res(n);
  for (int e = 0; e < epochs; ++e) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = m.b;
      for (std::size_t j = 0; j < d; ++j) s += m.w[j] * cols[j][i];
      const double p = logistic ? 1.0 / (1.0 + std::exp(-s)) : s;
      res[i] = p - y[i];
    }
    std::vector<double> grad(d, 0.0);
    double gb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) grad[j] += cols[j][i] * res[i];
      gb += res[i];
    }
    for (std::size_t j = 0; j < d; ++j) m.w[j] -= lr * grad[j] / static_cast<double>(n);
    m.b -= lr * gb / static_cast<double>(n);
  }
  return m;
}

inline double log_loss(const std::vector<std::vector<double>>& cols, const std::vector<double>& y,
                       const std::vector<double>& w, double b) {
  double loss = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double s = b;
    for (std::size_t j = 0; j < cols.size(); ++j) s += w[j] * cols[j][i];
    const double p = 1.0 / (1.0 + std::exp(-s));
    loss -= y[i] * std::log(p) + (1 - y[i]) * std::log(1 - p);
  }
  return loss / static_cast<double>(y.size());
}

// Pooled plaintext redundancy: every raw column visible at once.
struct PooledParty {
  int id = 0;
  std::vector<std::vector<double>> columns;
};

struct PooledReport {
  std::set<std::pair<int, std::size_t>> overlap;
  std::set<std::pair<std::pair<int, std::size_t>, std::pair<int, std::size_t>>> pairs;
};

inline PooledReport pooled_redundancy(const std::vector<std::vector<double>>& active, const std::vector<double>& y,
                                      const std::vector<PooledParty>& parties, double theta, double delta,
                                      double tau) {
  PooledReport report;
  // pattern[(party, feature)] = correlations against active features then y
  std::map<std::pair<int, std::size_t>, std::vector<double>> pattern;
  std::map<std::pair<int, std::size_t>, const std::vector<double>*> raw;
  for (const auto& p : parties) {
    for (std::size_t f = 0; f < p.columns.size(); ++f) {
      std::vector<double> v;
      for (const auto& a : active) v.push_back(spearman(a, p.columns[f]));
      v.push_back(spearman(y, p.columns[f]));
      const auto key = std::make_pair(p.id, f);
      double top = 0;
      for (std::size_t i = 0; i < active.size(); ++i) top = std::max(top, std::abs(v[i]));
      if (top > theta) report.overlap.insert(key);
      pattern[key] = v;
      raw[key] = &p.columns[f];
    }
  }
  for (const auto& [a, va] : pattern) {
    for (const auto& [b, vb] : pattern) {
      if (a.first >= b.first || report.overlap.count(a) || report.overlap.count(b)) continue;
      if (constant(*raw[a]) || constant(*raw[b])) continue;
      double dist = 0;
      for (std::size_t i = 0; i < va.size(); ++i) dist += (va[i] - vb[i]) * (va[i] - vb[i]);
      if (!(std::sqrt(dist) < delta)) continue;
      if (std::abs(spearman(*raw[a], *raw[b])) > tau) report.pairs.insert({a, b});
    }
  }
  return report;
}

}  // namespace vflrps::oracle
