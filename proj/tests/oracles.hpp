#pragma once

// Reference computations written without the library: plain loops over small
// instances, used as ground truth by the unit and property tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Dense = std::vector<std::vector<double>>;
using EdgeList = std::vector<std::pair<int, int>>;

// Cyclic Jacobi rotations; eigenvalues ascending.
inline std::vector<double> jacobi_eigenvalues(Dense a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        double t = (theta >= 0 ? 1 : -1) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

// Calls f(coloring) for all q^n colorings.
inline void for_each_coloring(int n, int q, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> c(n, 0);
  while (true) {
    f(c);
    int i = 0;
    while (i < n && ++c[i] == q) c[i++] = 0;
    if (i == n) return;
  }
}

inline double weight(const EdgeList& e, const Dense& B, const std::vector<int>& c) {
  double w = 1;
  for (auto [u, v] : e) w *= B[c[u]][c[v]];
  return w;
}

inline double partition_function(int n, const EdgeList& e, const Dense& B) {
  double z = 0;
  for_each_coloring(n, static_cast<int>(B.size()), [&](const std::vector<int>& c) { z += weight(e, B, c); });
  return z;
}

// Z restricted to colorings with the given color counts.
inline double restricted_z(int n, const EdgeList& e, const Dense& B, const std::vector<int>& counts) {
  double z = 0;
  const int q = static_cast<int>(B.size());
  for_each_coloring(n, q, [&](const std::vector<int>& c) {
    std::vector<int> k(q, 0);
    for (int x : c) ++k[x];
    if (k == counts) z += weight(e, B, c);
  });
  return z;
}

// Every perfect matching of points 0..m-1, point i on vertex i / delta.
inline void for_each_pairing(int n, int delta, const std::function<void(const EdgeList&)>& f) {
  const int m = n * delta;
  std::vector<int> partner(m, -1);
  std::function<void()> rec = [&] {
    int i = 0;
    while (i < m && partner[i] >= 0) ++i;
    if (i == m) {
      EdgeList e;
      for (int a = 0; a < m; ++a)
        if (a < partner[a]) e.emplace_back(a / delta, partner[a] / delta);
      f(e);
      return;
    }
    for (int j = i + 1; j < m; ++j) {
      if (partner[j] >= 0) continue;
      partner[i] = j;
      partner[j] = i;
      rec();
      partner[i] = partner[j] = -1;
    }
  };
  rec();
}

inline std::uint64_t double_factorial(int k) {
  std::uint64_t r = 1;
  for (int i = k; i > 1; i -= 2) r *= i;
  return r;
}

// Mean over all pairings of Z^alpha and of (Z^alpha)^2.
inline std::pair<double, double> pairing_moments(int n, int delta, const Dense& B, const std::vector<int>& counts) {
  double s1 = 0, s2 = 0;
  std::uint64_t k = 0;
  for_each_pairing(n, delta, [&](const EdgeList& e) {
    double z = restricted_z(n, e, B, counts);
    s1 += z;
    s2 += z * z;
    ++k;
  });
  return {s1 / k, s2 / k};
}

// Number of edge subsets of size k that form a single cycle (self-loop k=1, parallel pair k=2).
inline std::vector<std::uint64_t> cycles_by_subsets(int n, const EdgeList& e, int kmax) {
  std::vector<std::uint64_t> out(kmax, 0);
  const int m = static_cast<int>(e.size());
  std::vector<int> pick;
  std::function<void(int)> rec = [&](int start) {
    const int k = static_cast<int>(pick.size());
    if (k >= 1) {
      std::vector<int> deg(n, 0);
      for (int i : pick) {
        ++deg[e[i].first];
        ++deg[e[i].second];
      }
      bool ok = true;
      int first = -1;
      for (int v = 0; v < n; ++v) {
        if (deg[v] != 0 && deg[v] != 2) ok = false;
        if (deg[v] == 2 && first < 0) first = v;
      }
      if (ok) {
        std::vector<int> seen(n, 0);
        std::vector<int> stack = {first};
        seen[first] = 1;
        int reached = 1, touched = 0;
        for (int v = 0; v < n; ++v) touched += deg[v] ? 1 : 0;
        while (!stack.empty()) {
          int v = stack.back();
          stack.pop_back();
          for (int i : pick) {
            int a = e[i].first, b = e[i].second;
            int w = a == v ? b : b == v ? a : -1;
            if (w >= 0 && !seen[w]) {
              seen[w] = 1;
              ++reached;
              stack.push_back(w);
            }
          }
        }
        if (reached == touched) ++out[k - 1];
      }
    }
    if (k == kmax) return;
    for (int i = start; i < m; ++i) {
      pick.push_back(i);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return out;
}

// One Swendsen-Wang step as an explicit distribution over next colorings, by
// enumerating kept-edge subsets and component recolorings.
inline std::vector<double> sw_row(int n, const EdgeList& e, int q, double B, const std::vector<int>& c) {
  std::vector<int> mono;
  for (std::size_t i = 0; i < e.size(); ++i)
    if (c[e[i].first] == c[e[i].second]) mono.push_back(static_cast<int>(i));
  std::size_t states = 1;
  for (int i = 0; i < n; ++i) states *= q;
  std::vector<double> row(states, 0);
  const int k = static_cast<int>(mono.size());
  for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
    double p = 1;
    std::vector<int> label(n);
    for (int v = 0; v < n; ++v) label[v] = v;
    for (int b = 0; b < k; ++b) {
      bool kept = (mask >> b) & 1;
      p *= kept ? 1 - 1 / B : 1 / B;
      if (kept) {
        int a = label[e[mono[b]].first], z = label[e[mono[b]].second];
        for (auto& l : label)
          if (l == z) l = a;
      }
    }
    if (p == 0) continue;
    std::vector<int> comps;
    for (int v = 0; v < n; ++v)
      if (std::find(comps.begin(), comps.end(), label[v]) == comps.end()) comps.push_back(label[v]);
    const int nc = static_cast<int>(comps.size());
    double share = p / std::pow(double(q), nc);
    for_each_coloring(nc, q, [&](const std::vector<int>& cc) {
      std::size_t idx = 0, mult = 1;
      for (int v = 0; v < n; ++v) {
        int ci = static_cast<int>(std::find(comps.begin(), comps.end(), label[v]) - comps.begin());
        idx += cc[ci] * mult;
        mult *= q;
      }
      row[idx] += share;
    });
  }
  return row;
}

// Expected interaction between independent colors drawn from two ordered marginals:
// color `a` with probability p, each other color with (1-p)/(q-1).
inline double expected_weight(int q, double B, double p, int a, int b) {
  double s = 0;
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) {
      double pi = i == a ? p : (1 - p) / (q - 1);
      double pj = j == b ? p : (1 - p) / (q - 1);
      s += pi * pj * (i == j ? B : 1);
    }
  return s;
}

// Ψ1 at the uniform phase of Potts(q, B): (Δ/2) ln(q² + (B-1)q) - (Δ-1) ln q.
inline double potts_uniform_psi1(int q, int delta, double B) {
  return 0.5 * delta * std::log(q * q + (B - 1) * q) - (delta - 1) * std::log(double(q));
}

// Random symmetric matrix with entries in [lo, hi].
inline Dense random_symmetric(std::mt19937_64& g, int q, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Dense a(q, std::vector<double>(q));
  for (int i = 0; i < q; ++i)
    for (int j = i; j < q; ++j) a[i][j] = a[j][i] = u(g);
  return a;
}

inline std::vector<double> random_simplex(std::mt19937_64& g, int q) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(q);
  double s = 0;
  for (auto& x : v) s += (x = e(g));
  for (auto& x : v) x /= s;
  return v;
}

}  // namespace oracle
