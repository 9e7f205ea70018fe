#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "graphs.hpp"
#include "rng.hpp"
#include "spinsys.hpp"
#include "treefix.hpp"

namespace pottslab {

struct SWState {
  std::vector<int> coloring;
  std::int64_t monoEdges = 0;
};

inline std::int64_t count_mono(const RegularGraph& G, const std::vector<int>& c) {
  std::int64_t m = 0;
  for (auto [u, v] : G.edges)
    if (c[u] == c[v]) ++m;
  return m;
}

inline SWState make_state(const RegularGraph& G, std::vector<int> coloring) {
  require(static_cast<int>(coloring.size()) == G.n, "coloring has wrong length");
  SWState s{std::move(coloring), 0};
  s.monoEdges = count_mono(G, s.coloring);
  return s;
}

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

inline void require_sw(int q, double B) {
  require(q >= 1, "q must be positive");
  require(B >= 1 && std::isfinite(B), "Swendsen-Wang needs B >= 1");
}

// One Swendsen-Wang update: keep each monochromatic edge with probability 1 - 1/B,
// then recolor each kept-edge component uniformly, in order of smallest vertex.
inline SWState sw_step(const RegularGraph& G, int q, double B, const SWState& state, Rng& rng) {
  require_sw(q, B);
  require(static_cast<int>(state.coloring.size()) == G.n, "state does not match graph");
  const double keep = 1 - 1 / B;
  UnionFind uf(G.n);
  for (auto [u, v] : G.edges)
    if (u != v && state.coloring[u] == state.coloring[v] && rng.uniform() < keep) uf.unite(u, v);
  SWState next;
  next.coloring.assign(G.n, -1);
  std::vector<int> rootColor(G.n, -1);
  for (int v = 0; v < G.n; ++v) {
    int r = uf.find(v);
    if (rootColor[r] < 0) rootColor[r] = static_cast<int>(rng.below(q));
    next.coloring[v] = rootColor[r];
  }
  next.monoEdges = count_mono(G, next.coloring);
  return next;
}

// Most frequent color among U, lowest index on ties.
inline int phase_of(const std::vector<int>& sigma, const std::vector<int>& U, int q) {
  require(!U.empty(), "phase_of needs a nonempty vertex set");
  std::vector<int> cnt(q, 0);
  for (int v : U) ++cnt[sigma.at(v)];
  return static_cast<int>(std::max_element(cnt.begin(), cnt.end()) - cnt.begin());
}

inline std::vector<double> color_frequencies(const std::vector<int>& sigma, int q) {
  std::vector<double> f(q, 0);
  for (int c : sigma) f[c] += 1;
  for (auto& x : f) x /= sigma.empty() ? 1 : sigma.size();
  return f;
}

struct ExpectedMono {
  double Eu = 0;
  std::optional<double> Em;
  std::optional<double> x;  // majority ratio used for Em
};

inline double expected_mono_ordered(int q, int delta, double B, double x) {
  double s = x * x + q - 1;
  return 0.5 * delta * B * s / ((x + q - 1) * (x + q - 1) + (B - 1) * s);
}

// Expected monochromatic edges per vertex in the disordered (Eu) and ordered (Em) phases.
inline ExpectedMono expected_mono(int q, int delta, double B) {
  require_delta(delta);
  require(q >= 2 && B > 0, "expected_mono needs q >= 2 and B > 0");
  ExpectedMono e;
  e.Eu = 0.5 * delta * B / (q + B - 1);
  if (q >= 3 && B > 1 && B >= potts_thresholds(q, delta).Bu - 1e-12) {
    auto x = majority_ratio(q, delta, B);
    double xv = x ? *x : std::pow(detail::uniqueness_root(q, delta - 1), delta - 1);
    e.x = xv;
    e.Em = expected_mono_ordered(q, delta, B, xv);
  }
  return e;
}

struct GapCheck {
  bool holds = false;
  double ratio = 0;
  double threshold = 0;
  double B = 0;
};

// Em/Eu > 1/(1 - 1/B) at B = Bo.
inline GapCheck sw_gap_check(int q, int delta) {
  auto th = potts_thresholds(q, delta);
  auto e = expected_mono(q, delta, th.Bo);
  require(e.Em.has_value(), "no ordered phase at Bo");
  GapCheck g;
  g.B = th.Bo;
  g.ratio = *e.Em / e.Eu;
  g.threshold = 1 / (1 - 1 / th.Bo);
  g.holds = g.ratio > g.threshold;
  return g;
}

// Reference points for the disordered/ordered classification.
struct PhaseReference {
  int q = 0;
  double Eu = 0;
  std::optional<double> a;   // dominant-color frequency of the ordered phase
  std::optional<double> Em;
  double eps = 0.1;

  std::vector<double> ordered_vector(int j) const {
    std::vector<double> m(q, (1 - *a) / (q - 1));
    m[j] = *a;
    return m;
  }
};

inline PhaseReference phase_reference(int q, int delta, double B, std::optional<double> eps = std::nullopt) {
  PhaseReference r;
  r.q = q;
  auto e = expected_mono(q, delta, B);
  r.Eu = e.Eu;
  r.Em = e.Em;
  if (e.x) {
    double w = std::pow(*e.x, double(delta) / (delta - 1));
    r.a = w / (w + q - 1);
    double um = std::abs(*r.a - 1.0 / q);
    r.eps = 0.5 * std::min(um, std::abs(*r.Em - r.Eu)) / 2;
  }
  if (eps) r.eps = *eps;
  return r;
}

enum class UMT { U, M, T };

inline const char* to_string(UMT c) { return c == UMT::U ? "U" : c == UMT::M ? "M" : "T"; }

struct UMTReport {
  UMT label = UMT::T;
  bool freqNearU = false, edgeNearU = false;
  bool freqNearM = false, edgeNearM = false;
  int orderedColor = -1;  // j when labelled M
};

inline double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline UMTReport classify_umt(const std::vector<double>& freq, double monoPerVertex, const PhaseReference& ref) {
  UMTReport r;
  std::vector<double> u(ref.q, 1.0 / ref.q);
  r.freqNearU = sup_distance(freq, u) <= ref.eps;
  r.edgeNearU = std::abs(monoPerVertex - ref.Eu) < ref.eps;
  if (r.freqNearU && r.edgeNearU) {
    r.label = UMT::U;
    return r;
  }
  if (!ref.a) return r;
  r.edgeNearM = std::abs(monoPerVertex - *ref.Em) < ref.eps;
  for (int j = 0; j < ref.q; ++j)
    if (sup_distance(freq, ref.ordered_vector(j)) <= ref.eps) {
      r.freqNearM = true;
      if (r.edgeNearM) {
        r.label = UMT::M;
        r.orderedColor = j;
        return r;
      }
    }
  return r;
}

inline UMTReport classify_UMT(const std::vector<int>& sigma, const RegularGraph& G, int q, int delta, double B,
                              std::optional<double> eps = std::nullopt) {
  auto ref = phase_reference(q, delta, B, eps);
  return classify_umt(color_frequencies(sigma, q), double(count_mono(G, sigma)) / G.n, ref);
}

// Disordered (-1) or ordered (0) by the nearest reference point in the sup norm.
inline int phase_class(const std::vector<double>& freq, const PhaseReference& ref) {
  if (!ref.a) return -1;
  std::vector<double> u(ref.q, 1.0 / ref.q);
  double du = sup_distance(freq, u), dm = 1e300;
  for (int j = 0; j < ref.q; ++j) dm = std::min(dm, sup_distance(freq, ref.ordered_vector(j)));
  return dm < du ? 0 : -1;
}

struct ChainStart {
  enum Kind { disordered, ordered, given } kind = disordered;
  int color = 0;
  std::vector<int> coloring;
};

struct SWRecord {
  std::int64_t t = 0;
  int phaseLabel = -1;  // -1 disordered, 0 ordered
  UMT umt = UMT::T;
  int majorityColor = 0;
  std::vector<double> colorFrequencies;
  double monoDensity = 0;  // monochromatic edges per vertex
};

struct SWTrace {
  std::vector<SWRecord> records;
  std::uint64_t seed = 0;
  int q = 0;
  double B = 0;
  std::int64_t steps = 0;
  PhaseReference reference;

  double fraction(const std::function<bool(const SWRecord&)>& pred, std::size_t from = 1) const {
    if (records.size() <= from) return 0;
    std::size_t hits = 0;
    for (std::size_t i = from; i < records.size(); ++i) hits += pred(records[i]) ? 1 : 0;
    return double(hits) / (records.size() - from);
  }
};

inline std::vector<int> initial_coloring(const RegularGraph& G, int q, const ChainStart& start,
                                         const PhaseReference& ref, Rng& rng) {
  std::vector<int> c(G.n);
  switch (start.kind) {
    case ChainStart::given:
      require(static_cast<int>(start.coloring.size()) == G.n, "given coloring has wrong length");
      for (int x : start.coloring) require(x >= 0 && x < q, "given coloring has out-of-range colors");
      return start.coloring;
    case ChainStart::ordered: {
      require(ref.a.has_value(), "ordered start needs q >= 3 and B >= Bu");
      require(start.color >= 0 && start.color < q, "ordered start color out of range");
      for (auto& x : c) {
        if (rng.uniform() < *ref.a) {
          x = start.color;
        } else {
          int o = static_cast<int>(rng.below(q - 1));
          x = o >= start.color ? o + 1 : o;
        }
      }
      return c;
    }
    default:
      for (auto& x : c) x = static_cast<int>(rng.below(q));
      return c;
  }
}

inline SWRecord make_record(std::int64_t t, const RegularGraph& G, const SWState& s, const PhaseReference& ref) {
  SWRecord r;
  r.t = t;
  r.colorFrequencies = color_frequencies(s.coloring, ref.q);
  r.monoDensity = double(s.monoEdges) / G.n;
  r.phaseLabel = phase_class(r.colorFrequencies, ref);
  r.umt = classify_umt(r.colorFrequencies, r.monoDensity, ref).label;
  r.majorityColor = static_cast<int>(std::max_element(r.colorFrequencies.begin(), r.colorFrequencies.end()) -
                                     r.colorFrequencies.begin());
  return r;
}

// Record 0 is the start state, records 1..steps follow each update.
inline SWTrace run_chain(const RegularGraph& G, int q, double B, std::int64_t steps, const ChainStart& start,
                         std::uint64_t seed, std::optional<double> eps = std::nullopt) {
  require_sw(q, B);
  require(steps >= 0, "steps must be nonnegative");
  SWTrace tr;
  tr.seed = seed;
  tr.q = q;
  tr.B = B;
  tr.steps = steps;
  int delta = std::max(3, G.delta);
  if (q >= 2) {
    tr.reference = phase_reference(q, delta, B, eps);
  } else {
    tr.reference.q = q;
  }
  Rng rng(seed);
  SWState s = make_state(G, initial_coloring(G, q, start, tr.reference, rng));
  tr.records.reserve(steps + 1);
  tr.records.push_back(make_record(0, G, s, tr.reference));
  for (std::int64_t t = 1; t <= steps; ++t) {
    s = sw_step(G, q, B, s, rng);
    tr.records.push_back(make_record(t, G, s, tr.reference));
  }
  return tr;
}

// ---------------------------------------------------------------- exact kernel

inline constexpr std::uint64_t kMaxKernelStates = 20000;

struct SwKernel {
  int q = 0, n = 0;
  Matrix P;
};

inline SwKernel exact_sw_kernel(const RegularGraph& G, int q, double B) {
  require_sw(q, B);
  const std::uint64_t N = state_count(q, G.n, kMaxKernelStates);
  guard(N <= kMaxKernelStates, "exact kernel limited to q^n <= " + std::to_string(kMaxKernelStates));
  SwKernel K;
  K.q = q;
  K.n = G.n;
  K.P = Matrix::Zero(N, N);
  const double keep = 1 - 1 / B;
  for (std::uint64_t s = 0; s < N; ++s) {
    auto c = decode_state(s, q, G.n);
    std::vector<Edge> mono;
    for (auto [u, v] : G.edges)
      if (u != v && c[u] == c[v]) mono.push_back({u, v});
    guard(mono.size() < 30, "exact kernel: too many monochromatic edges");
    const std::uint64_t subsets = 1ULL << mono.size();
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
      UnionFind uf(G.n);
      int kept = 0;
      for (std::size_t e = 0; e < mono.size(); ++e)
        if (mask >> e & 1) {
          uf.unite(mono[e].first, mono[e].second);
          ++kept;
        }
      double pr = std::pow(keep, kept) * std::pow(1 - keep, int(mono.size()) - kept);
      if (pr == 0) continue;
      std::vector<int> compOf(G.n, -1), roots;
      for (int v = 0; v < G.n; ++v) {
        int r = uf.find(v);
        if (compOf[r] < 0) {
          compOf[r] = static_cast<int>(roots.size());
          roots.push_back(r);
        }
        compOf[v] = compOf[r];
      }
      const int nc = static_cast<int>(roots.size());
      const std::uint64_t colorings = state_count(q, nc, ~0ULL);
      const double share = pr / double(colorings);
      std::vector<int> next(G.n);
      for (std::uint64_t a = 0; a < colorings; ++a) {
        auto cc = decode_state(a, q, nc);
        for (int v = 0; v < G.n; ++v) next[v] = cc[compOf[v]];
        K.P(s, encode_state(next, q)) += share;
      }
    }
  }
  return K;
}

inline std::vector<char> phase_cut(const RegularGraph& G, int q, int color) {
  const std::uint64_t N = state_count(q, G.n, kMaxKernelStates);
  guard(N <= kMaxKernelStates, "phase cut limited to q^n <= " + std::to_string(kMaxKernelStates));
  std::vector<int> all(G.n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<char> S(N);
  for (std::uint64_t s = 0; s < N; ++s) S[s] = phase_of(decode_state(s, q, G.n), all, q) == color;
  return S;
}

// sum_{s in S} mu(s) P(s, S^c) / (mu(S) mu(S^c))
inline double conductance(const Matrix& P, const Vector& mu, const std::vector<char>& S) {
  require(static_cast<Eigen::Index>(S.size()) == mu.size() && P.rows() == mu.size(), "cut size mismatch");
  double muS = 0, muC = 0, flow = 0;
  bool any = false, all = true;
  for (std::size_t i = 0; i < S.size(); ++i) {
    if (S[i]) {
      any = true;
      muS += mu[i];
      for (std::size_t j = 0; j < S.size(); ++j)
        if (!S[j]) flow += mu[i] * P(i, j);
    } else {
      all = false;
      muC += mu[i];
    }
  }
  require(any && !all, "conductance needs a proper nonempty state set");
  return flow / (muS * muC);
}

inline Vector gibbs_vector(const GibbsOracle& o) {
  Vector mu(o.weights.size());
  for (std::size_t i = 0; i < o.weights.size(); ++i) mu[i] = o.weights[i] / o.Z;
  return mu;
}

inline double conductance(const RegularGraph& G, const InteractionMatrix& M, double B, const std::vector<char>& S) {
  auto K = exact_sw_kernel(G, M.q(), B);
  return conductance(K.P, gibbs_vector(brute_gibbs(G, M)), S);
}

// ---------------------------------------------------------------- annealed importance sampling

struct AisOptions {
  int temperatures = 200;
  int chains = 64;
  int sweepsPerTemperature = 1;
};

// Estimate of ln Z / n for the Potts model at activity B, annealing from B = 1.
inline double ais_log_partition(const RegularGraph& G, int q, double B, std::uint64_t seed,
                                const AisOptions& opt = {}) {
  require_sw(q, B);
  std::vector<double> logw(opt.chains, 0);
  for (int c = 0; c < opt.chains; ++c) {
    Rng rng = Rng::stream(seed, c);
    std::vector<int> col(G.n);
    for (auto& x : col) x = static_cast<int>(rng.below(q));
    SWState s = make_state(G, col);
    double prev = 1;
    for (int k = 1; k <= opt.temperatures; ++k) {
      double b = 1 + (B - 1) * double(k) / opt.temperatures;
      logw[c] += s.monoEdges * std::log(b / prev);
      for (int r = 0; r < opt.sweepsPerTemperature; ++r) s = sw_step(G, q, b, s, rng);
      prev = b;
    }
  }
  double hi = *std::max_element(logw.begin(), logw.end());
  double acc = 0;
  for (double w : logw) acc += std::exp(w - hi);
  return std::log(q) + (hi + std::log(acc / opt.chains)) / G.n;
}

}  // namespace pottslab
