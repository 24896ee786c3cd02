// Copyright 2026 The cfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reference implementations used only as test oracles. They are written
// from the definitions, independently of the library code.

#ifndef CFX_TESTS_ORACLES_H_
#define CFX_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cfx::testing {

// Edit distance by memoised recursion over suffix pairs.
inline size_t OracleLevenshtein(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
  std::map<std::pair<size_t, size_t>, size_t> memo;
  std::function<size_t(size_t, size_t)> d = [&](size_t i, size_t j) -> size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    size_t best = std::min(d(i + 1, j) + 1, d(i, j + 1) + 1);
    best = std::min(best, d(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1));
    memo[key] = best;
    return best;
  };
  return d(0, 0);
}

// Average ranks by counting smaller and equal values.
inline std::vector<double> OracleRanks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    double less = 0;
    double equal = 0;
    for (double x : v) {
      if (x < v[i]) ++less;
      if (x == v[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

// Spearman as the Pearson coefficient of average ranks. NaN when constant.
inline double OracleSpearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto rx = OracleRanks(x);
  auto ry = OracleRanks(y);
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sx += rx[i];
    sy += ry[i];
    sxx += rx[i] * rx[i];
    syy += ry[i] * ry[i];
    sxy += rx[i] * ry[i];
  }
  double cov = sxy - sx * sy / n;
  double vx = sxx - sx * sx / n;
  double vy = syy - sy * sy / n;
  if (vx <= 1e-12 || vy <= 1e-12) return std::nan("");
  return cov / std::sqrt(vx * vy);
}

inline double OracleCosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0, nu = 0, nv = 0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 || nv == 0) return -1;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

}  // namespace cfx::testing

#endif  // CFX_TESTS_ORACLES_H_
