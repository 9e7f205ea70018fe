#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "moments.hpp"
#include "rng.hpp"
#include "spinsys.hpp"
#include "treefix.hpp"

namespace pottslab {

enum class Role { Uplus, Uminus, Wplus, Wminus, treeInternal, rootPlus, rootMinus };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::Uplus: return "Uplus";
    case Role::Uminus: return "Uminus";
    case Role::Wplus: return "Wplus";
    case Role::Wminus: return "Wminus";
    case Role::treeInternal: return "treeInternal";
    case Role::rootPlus: return "rootPlus";
    default: return "rootMinus";
  }
}

inline Role role_from_string(const std::string& s) {
  for (Role r : {Role::Uplus, Role::Uminus, Role::Wplus, Role::Wminus, Role::treeInternal, Role::rootPlus,
                 Role::rootMinus})
    if (s == to_string(r)) return r;
  throw ValidationError("unknown vertex role '" + s + "'");
}

using Edge = std::pair<int, int>;

// Multigraph with self-loops; a loop adds 2 to its vertex degree.
struct RegularGraph {
  int n = 0;
  int delta = 0;
  std::vector<Edge> edges;
  std::map<int, Role> roles;
  std::optional<std::uint64_t> seed;

  std::vector<int> degrees() const {
    std::vector<int> d(n, 0);
    for (auto [u, v] : edges) {
      ++d[u];
      ++d[v];
    }
    return d;
  }

  int max_degree() const {
    auto d = degrees();
    return d.empty() ? 0 : *std::max_element(d.begin(), d.end());
  }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(n);
    for (auto [u, v] : edges) {
      adj[u].push_back(v);
      if (u != v) adj[v].push_back(u);
    }
    return adj;
  }

  // Side (0/1) per vertex if the graph is bipartite.
  std::optional<std::vector<int>> bipartition() const {
    auto adj = adjacency();
    std::vector<int> side(n, -1);
    for (int s = 0; s < n; ++s) {
      if (side[s] >= 0) continue;
      side[s] = 0;
      std::vector<int> stack{s};
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v : adj[u]) {
          if (side[v] < 0) {
            side[v] = 1 - side[u];
            stack.push_back(v);
          } else if (side[v] == side[u]) {
            return std::nullopt;
          }
        }
      }
    }
    return side;
  }

  bool is_bipartite() const { return bipartition().has_value(); }

  std::vector<int> vertices_with(Role r) const {
    std::vector<int> out;
    for (auto [v, role] : roles)
      if (role == r) out.push_back(v);
    return out;
  }
};

// Vertex v owns points delta*v .. delta*v + delta - 1.
inline RegularGraph graph_from_matching(int n, int delta, const std::vector<int>& partner) {
  RegularGraph g;
  g.n = n;
  g.delta = delta;
  for (int p = 0; p < static_cast<int>(partner.size()); ++p)
    if (p < partner[p]) {
      int u = p / delta, v = partner[p] / delta;
      g.edges.emplace_back(std::min(u, v), std::max(u, v));
    }
  return g;
}

inline void require_pairing_size(int n, int delta) {
  require(n >= 1 && delta >= 1, "pairing model needs n >= 1 and delta >= 1");
  require((static_cast<long long>(n) * delta) % 2 == 0, "pairing model needs delta * n even");
}

inline RegularGraph pairing_sample(int n, int delta, std::uint64_t seed) {
  require_pairing_size(n, delta);
  Rng rng(seed);
  std::vector<int> pts(n * delta);
  for (int i = 0; i < n * delta; ++i) pts[i] = i;
  rng.shuffle(pts);
  std::vector<int> partner(n * delta);
  for (std::size_t i = 0; i < pts.size(); i += 2) {
    partner[pts[i]] = pts[i + 1];
    partner[pts[i + 1]] = pts[i];
  }
  auto g = graph_from_matching(n, delta, partner);
  g.seed = seed;
  return g;
}

inline constexpr int kMaxEnumeratedPoints = 16;

// Visits every perfect matching of the delta*n points once.
inline std::uint64_t enumerate_pairings(int n, int delta, const std::function<void(const RegularGraph&)>& visit) {
  require_pairing_size(n, delta);
  guard(n * delta <= kMaxEnumeratedPoints,
        "pairing enumeration limited to " + std::to_string(kMaxEnumeratedPoints) + " points");
  const int P = n * delta;
  std::vector<int> partner(P, -1);
  std::uint64_t count = 0;
  std::function<void()> rec = [&] {
    int first = 0;
    while (first < P && partner[first] >= 0) ++first;
    if (first == P) {
      ++count;
      visit(graph_from_matching(n, delta, partner));
      return;
    }
    for (int o = first + 1; o < P; ++o) {
      if (partner[o] >= 0) continue;
      partner[first] = o;
      partner[o] = first;
      rec();
      partner[first] = partner[o] = -1;
    }
  };
  rec();
  return count;
}

inline constexpr int kMaxCycleLength = 12;

// X[k-1] = number of k-cycles; loops are 1-cycles, parallel pairs 2-cycles.
inline std::vector<std::uint64_t> count_cycles(const RegularGraph& G, int kmax) {
  require(kmax >= 1 && kmax <= kMaxCycleLength, "kmax must lie in 1.." + std::to_string(kMaxCycleLength));
  std::vector<std::uint64_t> X(kmax, 0);
  std::map<Edge, std::uint64_t> mult;
  for (auto [u, v] : G.edges) {
    if (u == v)
      ++X[0];
    else
      ++mult[{std::min(u, v), std::max(u, v)}];
  }
  std::vector<std::vector<std::pair<int, std::uint64_t>>> adj(G.n);
  for (auto [e, m] : mult) {
    if (kmax >= 2) X[1] += m * (m - 1) / 2;
    adj[e.first].push_back({e.second, m});
    adj[e.second].push_back({e.first, m});
  }
  if (kmax < 3) return X;
  std::vector<char> onPath(G.n, 0);
  std::vector<std::uint64_t> twice(kmax, 0);
  // Cycles rooted at their smallest vertex s, each traversed in both directions.
  for (int s = 0; s < G.n; ++s) {
    std::function<void(int, int, std::uint64_t)> dfs = [&](int u, int len, std::uint64_t w) {
      for (auto [v, m] : adj[u]) {
        if (v == s && len >= 3) twice[len - 1] += w * m;
        if (v <= s || onPath[v] || len == kmax) continue;
        onPath[v] = 1;
        dfs(v, len + 1, w * m);
        onPath[v] = 0;
      }
    };
    onPath[s] = 1;
    dfs(s, 1, 1);
    onPath[s] = 0;
  }
  for (int k = 3; k <= kmax; ++k) X[k - 1] = twice[k - 1] / 2;
  return X;
}

// ---------------------------------------------------------------- exact Gibbs oracle

inline constexpr std::uint64_t kMaxBruteStates = 2'000'000;

struct GibbsOracle {
  RegularGraph graph;
  InteractionMatrix model;
  double Z = 0;
  std::vector<double> weights;  // index = sum_v sigma_v q^v
  std::map<std::vector<int>, double> byCounts;
  // key: upper triangle (row-major, with diagonal) of the point-pair count matrix
  std::map<std::vector<int>, double> byEdgeCounts;

  int q() const { return model.q(); }
  double probability(std::uint64_t state) const { return weights[state] / Z; }
};

inline std::uint64_t state_count(int q, int n, std::uint64_t cap) {
  std::uint64_t N = 1;
  for (int i = 0; i < n; ++i) {
    if (N > cap / q + 1) return cap + 1;
    N *= q;
  }
  return N;
}

inline std::vector<int> decode_state(std::uint64_t s, int q, int n) {
  std::vector<int> c(n);
  for (int v = 0; v < n; ++v) {
    c[v] = static_cast<int>(s % q);
    s /= q;
  }
  return c;
}

inline std::uint64_t encode_state(const std::vector<int>& c, int q) {
  std::uint64_t s = 0;
  for (int v = static_cast<int>(c.size()) - 1; v >= 0; --v) s = s * q + c[v];
  return s;
}

inline GibbsOracle brute_gibbs(const RegularGraph& G, const InteractionMatrix& M) {
  const int q = M.q();
  const std::uint64_t N = state_count(q, G.n, kMaxBruteStates);
  guard(N <= kMaxBruteStates, "exact Gibbs oracle limited to q^n <= " + std::to_string(kMaxBruteStates));
  GibbsOracle o{G, M, 0, {}, {}, {}};
  o.weights.resize(N);
  for (std::uint64_t s = 0; s < N; ++s) {
    auto c = decode_state(s, q, G.n);
    double w = 1;
    Matrix k = Matrix::Zero(q, q);
    for (auto [u, v] : G.edges) {
      w *= M(c[u], c[v]);
      if (c[u] == c[v])
        k(c[u], c[u]) += 2;
      else {
        k(c[u], c[v]) += 1;
        k(c[v], c[u]) += 1;
      }
    }
    o.weights[s] = w;
    o.Z += w;
    std::vector<int> counts(q, 0);
    for (int x : c) ++counts[x];
    o.byCounts[counts] += w;
    std::vector<int> key;
    for (int i = 0; i < q; ++i)
      for (int j = i; j < q; ++j) key.push_back(static_cast<int>(k(i, j)));
    o.byEdgeCounts[key] += w;
  }
  return o;
}

// ---------------------------------------------------------------- gadgets and reductions

// Bipartite core from delta random perfect matchings between V+ and V- minus an
// m'-matching; the degree-(delta-1) core vertices become leaves of complete
// (delta-1)-ary trees whose roots keep degree delta-1.
inline RegularGraph build_gadget(int delta, int treesPerSide, int treeDepth, int nCore, std::uint64_t seed) {
  require_delta(delta);
  require(treesPerSide >= 1 && treeDepth >= 0 && nCore >= 1, "gadget parameters must be positive");
  long long leaves = 1;
  for (int i = 0; i < treeDepth; ++i) leaves *= delta - 1;
  const long long mPrime = treesPerSide * leaves;
  require(mPrime <= nCore, "gadget needs treesPerSide * (delta-1)^treeDepth <= nCore");
  const int s = nCore + static_cast<int>(mPrime);
  Rng rng(seed);
  RegularGraph g;
  g.delta = delta;
  g.seed = seed;
  g.n = 2 * s;
  std::vector<int> removedPlus(s);
  for (int i = 0; i < s; ++i) removedPlus[i] = i;
  rng.shuffle(removedPlus);
  removedPlus.resize(mPrime);
  std::vector<char> isW(2 * s, 0);
  for (int k = 0; k < delta; ++k) {
    std::vector<int> perm(s);
    for (int i = 0; i < s; ++i) perm[i] = i;
    rng.shuffle(perm);
    if (k == 0) {
      std::vector<char> drop(s, 0);
      for (int v : removedPlus) drop[v] = 1;
      for (int i = 0; i < s; ++i) {
        if (drop[i]) {
          isW[i] = isW[s + perm[i]] = 1;
          continue;
        }
        g.edges.emplace_back(i, s + perm[i]);
      }
    } else {
      for (int i = 0; i < s; ++i) g.edges.emplace_back(i, s + perm[i]);
    }
  }
  for (int v = 0; v < 2 * s; ++v) {
    bool plus = v < s;
    g.roles[v] = isW[v] ? (plus ? Role::Wplus : Role::Wminus) : (plus ? Role::Uplus : Role::Uminus);
  }
  for (int side = 0; side < 2; ++side) {
    std::vector<int> w;
    for (int v = side * s; v < (side + 1) * s; ++v)
      if (isW[v]) w.push_back(v);
    for (int t = 0; t < treesPerSide; ++t) {
      std::vector<int> level(w.begin() + t * leaves, w.begin() + (t + 1) * leaves);
      while (level.size() > 1) {
        std::vector<int> up;
        for (std::size_t i = 0; i < level.size(); i += delta - 1) {
          int parent = g.n++;
          g.roles[parent] = Role::treeInternal;
          for (int c = 0; c < delta - 1; ++c) g.edges.emplace_back(level[i + c], parent);
          up.push_back(parent);
        }
        level = up;
      }
      g.roles[level[0]] = side == 0 ? Role::rootPlus : Role::rootMinus;
    }
  }
  return g;
}

// Disjoint gadget copies, one per vertex of H, plus one edge per H-edge u<v joining
// a fresh rootPlus of gadget u to a fresh rootMinus of gadget v.
inline RegularGraph build_reduction(const RegularGraph& H, const std::vector<RegularGraph>& gadgets) {
  require(static_cast<int>(gadgets.size()) == H.n, "reduction needs one gadget per vertex of H");
  RegularGraph out;
  std::vector<int> offset(H.n);
  std::vector<std::vector<int>> plus(H.n), minus(H.n);
  for (int v = 0; v < H.n; ++v) {
    const auto& g = gadgets[v];
    offset[v] = out.n;
    for (auto [a, b] : g.edges) out.edges.emplace_back(a + out.n, b + out.n);
    for (auto [x, r] : g.roles) out.roles[x + out.n] = r;
    for (int x : g.vertices_with(Role::rootPlus)) plus[v].push_back(x + out.n);
    for (int x : g.vertices_with(Role::rootMinus)) minus[v].push_back(x + out.n);
    out.delta = std::max(out.delta, g.delta);
    out.n += g.n;
  }
  std::vector<std::size_t> usedPlus(H.n, 0), usedMinus(H.n, 0);
  for (auto [a, b] : H.edges) {
    require(a != b, "reduction graph H must not have self-loops");
    int tail = std::min(a, b), head = std::max(a, b);
    require(usedPlus[tail] < plus[tail].size(), "gadget " + std::to_string(tail) + " has too few + roots");
    require(usedMinus[head] < minus[head].size(), "gadget " + std::to_string(head) + " has too few - roots");
    out.edges.emplace_back(plus[tail][usedPlus[tail]++], minus[head][usedMinus[head]++]);
  }
  return out;
}

struct ReductionConstants {
  double p = 0, A = 0, D = 0, Bstar = 0;
  // Edge-count correction for H: C_H = D^{|E(H)|}.
  double C_H(int edgesOfH) const { return std::pow(D, edgesOfH); }
};

inline ReductionConstants reduction_constants_from_p(int q, double B, double p) {
  ReductionConstants c;
  c.p = p;
  double r = (1 - p) / (q - 1);
  // Expected edge weight between roots in equal phases (A) and distinct phases (D).
  c.A = 1 + (B - 1) * (p * p + (q - 1) * r * r);
  c.D = 1 + (B - 1) * (2 * p * r + (q - 2) * r * r);
  c.Bstar = c.A / c.D;
  return c;
}

inline ReductionConstants reduction_constants(int q, int delta, double B) {
  auto th = potts_thresholds(q, delta);
  require(B > th.Bo, "reduction constants need B > Bo");
  return reduction_constants_from_p(q, B, ordered_root_marginal(q, delta, B));
}

// ---------------------------------------------------------------- text format

inline void write_graph(std::ostream& os, const RegularGraph& g) {
  os << g.n << ' ' << g.delta << '\n';
  if (g.seed) os << "# seed " << *g.seed << '\n';
  for (auto [v, r] : g.roles) os << "# role " << v << ' ' << to_string(r) << '\n';
  for (auto [u, v] : g.edges) os << u << ' ' << v << '\n';
}

inline RegularGraph read_graph(std::istream& is) {
  RegularGraph g;
  std::string line;
  bool header = false;
  int lineNo = 0;
  while (std::getline(is, line)) {
    ++lineNo;
    auto where = " (line " + std::to_string(lineNo) + ")";
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, kind;
      ls >> hash >> kind;
      if (kind == "role") {
        int v;
        std::string name;
        require(static_cast<bool>(ls >> v >> name), "malformed role line" + where);
        g.roles[v] = role_from_string(name);
      } else if (kind == "seed") {
        std::uint64_t s;
        require(static_cast<bool>(ls >> s), "malformed seed line" + where);
        g.seed = s;
      }
      continue;
    }
    int a, b;
    require(static_cast<bool>(ls >> a >> b), "expected two integers" + where);
    if (!header) {
      require(a >= 0 && b >= 0, "graph header needs nonnegative n and delta");
      g.n = a;
      g.delta = b;
      header = true;
      continue;
    }
    require(a >= 0 && a < g.n && b >= 0 && b < g.n, "edge endpoint out of range" + where);
    g.edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  require(header, "graph file has no header line");
  for (auto [v, r] : g.roles) require(v >= 0 && v < g.n, "role vertex out of range");
  return g;
}

}  // namespace pottslab
