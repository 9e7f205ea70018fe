#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "spinsys.hpp"
#include "treefix.hpp"

namespace pottslab {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct EdgeDistribution {
  Matrix x;
  Vector marginals;
};

struct InnerResult {
  EdgeDistribution dist;
  double g1 = kNegInf;
  bool feasible = false;
  bool converged = false;
  Vector lambda;  // scaling vector on the full index set (0 for dropped colors)
};

namespace detail {

// Max-flow on the bipartite double cover: is there a nonnegative matrix supported
// on W > 0 with row and column sums alpha? Symmetrizing such a matrix keeps the sums.
inline bool support_feasible(const Matrix& W, const Vector& alpha) {
  const int m = static_cast<int>(W.rows());
  const int N = 2 * m + 2, s = 2 * m, t = 2 * m + 1;
  const double inf = 1e300;
  Matrix cap = Matrix::Zero(N, N);
  for (int i = 0; i < m; ++i) {
    cap(s, i) = alpha[i];
    cap(m + i, t) = alpha[i];
    for (int j = 0; j < m; ++j)
      if (W(i, j) > 0 && alpha[i] > 0 && alpha[j] > 0) cap(i, m + j) = inf;
  }
  double flow = 0;
  while (true) {
    std::vector<int> prev(N, -1);
    prev[s] = s;
    std::vector<int> queue{s};
    for (std::size_t h = 0; h < queue.size() && prev[t] < 0; ++h) {
      int u = queue[h];
      for (int v = 0; v < N; ++v)
        if (prev[v] < 0 && cap(u, v) > 1e-15) {
          prev[v] = u;
          queue.push_back(v);
        }
    }
    if (prev[t] < 0) break;
    double push = inf;
    for (int v = t; v != s; v = prev[v]) push = std::min(push, cap(prev[v], v));
    for (int v = t; v != s; v = prev[v]) {
      cap(prev[v], v) -= push;
      cap(v, prev[v]) += push;
    }
    flow += push;
  }
  return flow >= alpha.sum() - 1e-12;
}

inline double xlogx_sum(const Matrix& x) {
  double s = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x.data()[i] > 0) s += x.data()[i] * std::log(x.data()[i]);
  return s;
}

inline double entropy_term(const Vector& a) {
  double s = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] > 0) s += a[i] * std::log(a[i]);
  return s;
}

}  // namespace detail

// Maximize g1(x) = 1/2 sum x ln W - 1/2 sum x ln x over symmetric x >= 0 with row sums alpha.
// W is any symmetric nonnegative matrix (the paired model uses B (x) B).
inline InnerResult inner_edge_max_w(const Matrix& W, const Vector& alpha, const Vector* warm = nullptr,
                                    double tol = 1e-13, int maxIter = 200000) {
  const int m = static_cast<int>(W.rows());
  require(alpha.size() == m, "phase vector has wrong length");
  InnerResult out;
  out.dist.marginals = alpha;
  out.dist.x = Matrix::Zero(m, m);
  out.lambda = Vector::Zero(m);
  std::vector<int> S;
  for (int i = 0; i < m; ++i)
    if (alpha[i] > 0) S.push_back(i);
  const int k = static_cast<int>(S.size());
  if (k == 0) return out;
  Matrix Ws(k, k);
  Vector a(k);
  bool allPositive = true;
  for (int i = 0; i < k; ++i) {
    a[i] = alpha[S[i]];
    for (int j = 0; j < k; ++j) {
      Ws(i, j) = W(S[i], S[j]);
      if (Ws(i, j) <= 0) allPositive = false;
    }
  }
  if (!allPositive && !detail::support_feasible(Ws, a)) return out;
  out.feasible = true;
  Vector lam(k);
  for (int i = 0; i < k; ++i) {
    double w = warm ? (*warm)[S[i]] : 0.0;
    lam[i] = w > 0 ? w : std::sqrt(a[i]);
  }
  double err = 1;
  for (int it = 0; it < maxIter; ++it) {
    Vector r = lam.cwiseProduct(Ws * lam);
    err = (r - a).cwiseAbs().maxCoeff();
    if (err < tol) break;
    for (int i = 0; i < k; ++i) lam[i] *= r[i] > 0 ? std::sqrt(a[i] / r[i]) : 2.0;
  }
  out.converged = err < tol;
  for (int i = 0; i < k; ++i) {
    out.lambda[S[i]] = lam[i];
    for (int j = 0; j < k; ++j) out.dist.x(S[i], S[j]) = Ws(i, j) * lam[i] * lam[j];
  }
  double g = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double x = out.dist.x(i, j);
      if (x > 0) g += 0.5 * x * (std::log(W(i, j)) - std::log(x));
    }
  out.g1 = g;
  return out;
}

inline InnerResult inner_edge_max(const InteractionMatrix& M, const Vector& alpha) {
  require_simplex(alpha, M.q());
  return inner_edge_max_w(M.entries(), alpha);
}

inline double psi1_w(const Matrix& W, int delta, const Vector& alpha, const Vector* warm = nullptr,
                     InnerResult* inner = nullptr) {
  auto r = inner_edge_max_w(W, alpha, warm);
  double v = r.feasible ? (delta - 1) * detail::entropy_term(alpha) + delta * r.g1 : kNegInf;
  if (inner) *inner = std::move(r);
  return v;
}

// (delta-1) sum alpha ln alpha + delta g1(x*), in nats per vertex.
inline double psi1(const InteractionMatrix& M, int delta, const Vector& alpha) {
  require_delta(delta);
  require_simplex(alpha, M.q());
  return psi1_w(M.entries(), delta, alpha);
}

// ---------------------------------------------------------------- norms

struct NormResult {
  double value = 0;
  Vector argmax;
};

// max over R >= 0 of |Bhat R|_2 / |R|_p by the nonlinear power iteration
// R <- (Bhat'Bhat R)^{1/(p-1)}, which is the tree recursion when p = delta/(delta-1).
inline NormResult matrix_norm_p2(const Matrix& Bhat, double p, const std::vector<Vector>& seeds = {},
                                 int randomStarts = 32, std::uint64_t seed = 1, int maxIter = 200000) {
  require(Bhat.rows() == Bhat.cols(), "norm needs a square matrix");
  require(p > 1 && p <= 2, "norm exponent p must lie in (1, 2]");
  const int q = static_cast<int>(Bhat.rows());
  const Matrix B = Bhat.transpose() * Bhat;
  const double expo = 1 / (p - 1);
  auto value = [&](const Vector& R) { return (Bhat * R).norm() / std::pow(R.array().pow(p).sum(), 1 / p); };
  auto run = [&](Vector R) {
    R = R.cwiseMax(0.0);
    R /= R.maxCoeff();
    double v = value(R);
    for (int it = 0; it < maxIter; ++it) {
      Vector y = (B * R).cwiseMax(0.0);
      if (y.maxCoeff() <= 0) break;
      y /= y.maxCoeff();
      Vector next = y.array().pow(expo).matrix();
      next /= next.maxCoeff();
      double nv = value(next);
      double dx = (next - R).cwiseAbs().maxCoeff();
      R = next;
      bool done = std::abs(nv - v) <= 1e-16 * nv && dx < 1e-13;
      v = nv;
      if (done) break;
    }
    return NormResult{v, R};
  };
  NormResult best{-1, Vector()};
  auto consider = [&](const NormResult& r) {
    if (r.value > best.value) best = r;
  };
  for (const auto& s : seeds) {
    require(s.size() == q, "norm seed has wrong length");
    consider(run(s));
  }
  Rng rng(seed);
  for (int i = 0; i < randomStarts; ++i) {
    auto w = rng.dirichlet(q);
    consider(run(Eigen::Map<Vector>(w.data(), q)));
  }
  for (int i = 0; i < q; ++i) consider(run(Vector::Unit(q, i)));
  consider(run(Vector::Ones(q)));
  best.argmax /= std::pow(best.argmax.array().pow(p).sum(), 1 / p);
  return best;
}

inline Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

// ---------------------------------------------------------------- second moment exponent

struct Psi2Options {
  int randomStarts = 50;
  std::uint64_t seed = 7;
  int maxSteps = 4000;
};

struct Psi2Result {
  double value = kNegInf;
  Matrix gamma;  // maximizing overlap matrix
};

namespace detail {

// Scale K to row sums r and column sums c.
inline Matrix sinkhorn(Matrix K, const Vector& r, const Vector& c, int maxIter = 100000) {
  for (int it = 0; it < maxIter; ++it) {
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
      double s = K.row(i).sum();
      if (s > 0) K.row(i) *= r[i] / s;
    }
    double err = 0;
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      double s = K.col(j).sum();
      err = std::max(err, std::abs(s - c[j]));
      if (s > 0) K.col(j) *= c[j] / s;
    }
    if (err < 1e-15) break;
  }
  return K;
}

inline Vector flatten(const Matrix& g) {
  const auto q = g.rows();
  Vector v(q * q);
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index k = 0; k < q; ++k) v[i * q + k] = g(i, k);
  return v;
}

}  // namespace detail

// Entropic mirror ascent of gamma -> Psi1^{B(x)B}(gamma) over the transportation polytope.
inline double ascend_overlap(const Matrix& W2, int delta, const Vector& alpha, Matrix& gamma, int maxSteps) {
  const auto q = alpha.size();
  Vector lam;
  InnerResult inner;
  Vector flat = detail::flatten(gamma);
  double f = psi1_w(W2, delta, flat, nullptr, &inner);
  if (!std::isfinite(f)) return f;
  lam = inner.lambda;
  double eta = 0.5;
  int quiet = 0;
  for (int step = 0; step < maxSteps && quiet < 3; ++step) {
    Matrix G = Matrix::Zero(q, q);
    for (Eigen::Index i = 0; i < q; ++i)
      for (Eigen::Index k = 0; k < q; ++k) {
        double g = gamma(i, k);
        if (g > 0) G(i, k) = (delta - 1) * std::log(g) - delta * std::log(lam[i * q + k]);
      }
    bool accepted = false;
    while (eta > 1e-12) {
      Matrix cand = gamma.array() * (eta * G.array()).exp();
      cand = detail::sinkhorn(cand, alpha, alpha);
      InnerResult ci;
      Vector cf = detail::flatten(cand);
      double fc = psi1_w(W2, delta, cf, &lam, &ci);
      if (std::isfinite(fc) && fc >= f) {
        quiet = fc - f < 1e-15 ? quiet + 1 : 0;
        gamma = cand;
        f = fc;
        lam = ci.lambda;
        eta = std::min(eta * 1.5, 64.0);
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;
  }
  return f;
}

// Psi2(alpha) = max over overlaps gamma with both marginals alpha of Psi1^{B(x)B}(gamma).
inline Psi2Result psi2_detail(const InteractionMatrix& M, int delta, const Vector& alpha,
                              const Psi2Options& opt = {}) {
  require_delta(delta);
  require_simplex(alpha, M.q());
  const int q = M.q();
  const Matrix W2 = kron(M.entries(), M.entries());
  std::vector<Matrix> starts;
  starts.push_back(alpha * alpha.transpose());
  starts.push_back(alpha.asDiagonal().toDenseMatrix());
  Rng rng(opt.seed);
  Matrix mask = alpha * alpha.transpose();
  for (int s = 0; s < opt.randomStarts; ++s) {
    Matrix K(q, q);
    for (int i = 0; i < q; ++i)
      for (int k = 0; k < q; ++k) K(i, k) = mask(i, k) > 0 ? rng.exponential() + 1e-3 : 0.0;
    starts.push_back(detail::sinkhorn(K, alpha, alpha));
  }
  Psi2Result best;
  for (auto& g : starts) {
    double v = ascend_overlap(W2, delta, alpha, g, opt.maxSteps);
    if (v > best.value) {
      best.value = v;
      best.gamma = g;
    }
  }
  return best;
}

inline double psi2(const InteractionMatrix& M, int delta, const Vector& alpha, const Psi2Options& opt = {}) {
  return psi2_detail(M, delta, alpha, opt).value;
}

// ---------------------------------------------------------------- exact finite-n moments

inline constexpr std::uint64_t kDefaultLatticeBound = 50'000'000;

namespace detail {

// ln of the number of perfect matchings of 2m points.
inline double log_pm(int twoM) {
  int m = twoM / 2;
  return std::lgamma(twoM + 1.0) - std::lgamma(m + 1.0) - m * std::log(2.0);
}

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// ln E[w restricted to configurations with class counts c] over the pairing model on
// n vertices of degree delta, for interaction W between classes. Sums over the symmetric
// point-pair count matrices k with row sums delta*c.
inline double log_moment_core(int n, int delta, const Matrix& W, const std::vector<int>& c, std::uint64_t& budget) {
  const int m = static_cast<int>(c.size());
  std::vector<int> res(m);
  double base = std::lgamma(n + 1.0) - log_pm(delta * n);
  for (int a = 0; a < m; ++a) {
    res[a] = delta * c[a];
    base += std::lgamma(res[a] + 1.0) - std::lgamma(c[a] + 1.0);
  }
  Matrix logW = W.array().log();
  double total = kNegInf;
  // Walk upper-triangle entries (a, b), b > a; the diagonal takes what remains.
  std::function<void(int, int, double)> rec = [&](int a, int b, double acc) {
    guard(budget-- > 0, "exact moment enumeration exceeds the lattice bound");
    if (a == m) {
      total = log_add(total, acc);
      return;
    }
    if (b == m) {
      int kaa = res[a];
      if (kaa % 2) return;
      double t = acc;
      if (kaa > 0) {
        if (W(a, a) <= 0) return;
        t += log_pm(kaa) - std::lgamma(kaa + 1.0) + 0.5 * kaa * logW(a, a);
      }
      res[a] = 0;
      rec(a + 1, a + 2, t);
      res[a] = kaa;
      return;
    }
    int hi = W(a, b) > 0 ? std::min(res[a], res[b]) : 0;
    for (int k = 0; k <= hi; ++k) {
      res[a] -= k;
      res[b] -= k;
      double t = acc;
      if (k > 0) t += -std::lgamma(k + 1.0) + k * logW(a, b);
      rec(a, b + 1, t);
      res[a] += k;
      res[b] += k;
    }
  };
  rec(0, 1, base);
  return total;
}

inline std::vector<int> integral_counts(int n, const Vector& alpha) {
  std::vector<int> c(alpha.size());
  int sum = 0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    double v = alpha[i] * n;
    c[i] = static_cast<int>(std::lround(v));
    require(std::abs(v - c[i]) < 1e-9, "n * alpha must be integral");
    require(c[i] >= 0, "phase entries must be nonnegative");
    sum += c[i];
  }
  require(sum == n, "phase counts must sum to n");
  return c;
}

inline void require_pairing(int n, int delta) {
  require(n >= 1, "n must be positive");
  require(delta >= 1, "degree must be positive");
  require((static_cast<long long>(n) * delta) % 2 == 0, "delta * n must be even");
}

}  // namespace detail

inline double log_first_moment_exact(int n, int delta, const InteractionMatrix& M, const std::vector<int>& counts,
                                     std::uint64_t latticeBound = kDefaultLatticeBound) {
  detail::require_pairing(n, delta);
  require(static_cast<int>(counts.size()) == M.q(), "count vector has wrong length");
  require(std::accumulate(counts.begin(), counts.end(), 0) == n, "counts must sum to n");
  return detail::log_moment_core(n, delta, M.entries(), counts, latticeBound);
}

inline double log_first_moment_exact(int n, int delta, const InteractionMatrix& M, const Vector& alpha,
                                     std::uint64_t latticeBound = kDefaultLatticeBound) {
  require_simplex(alpha, M.q());
  return log_first_moment_exact(n, delta, M, detail::integral_counts(n, alpha), latticeBound);
}

// E[Z^alpha] over the pairing model; 0 when no edge configuration is compatible.
inline double first_moment_exact(int n, int delta, const InteractionMatrix& M, const Vector& alpha,
                                 std::uint64_t latticeBound = kDefaultLatticeBound) {
  return std::exp(log_first_moment_exact(n, delta, M, alpha, latticeBound));
}

// ln E[(Z^alpha)^2]: sum over integer overlap matrices of the paired-model first moment.
inline double log_second_moment_exact(int n, int delta, const InteractionMatrix& M, const Vector& alpha,
                                      std::uint64_t latticeBound = kDefaultLatticeBound) {
  detail::require_pairing(n, delta);
  require_simplex(alpha, M.q());
  const int q = M.q();
  auto c = detail::integral_counts(n, alpha);
  const Matrix W2 = kron(M.entries(), M.entries());
  std::vector<int> g(q * q, 0), colRes = c;
  double total = kNegInf;
  std::function<void(int, int, int)> rec = [&](int i, int k, int rowRes) {
    guard(latticeBound-- > 0, "exact second moment enumeration exceeds the lattice bound");
    if (i == q) {
      total = detail::log_add(total, detail::log_moment_core(n, delta, W2, g, latticeBound));
      return;
    }
    if (k == q - 1) {
      if (rowRes > colRes[k]) return;
      g[i * q + k] = rowRes;
      colRes[k] -= rowRes;
      rec(i + 1, 0, i + 1 < q ? c[i + 1] : 0);
      colRes[k] += rowRes;
      g[i * q + k] = 0;
      return;
    }
    for (int v = 0; v <= std::min(rowRes, colRes[k]); ++v) {
      g[i * q + k] = v;
      colRes[k] -= v;
      rec(i, k + 1, rowRes - v);
      colRes[k] += v;
    }
    g[i * q + k] = 0;
  };
  rec(0, 0, c[0]);
  return total;
}

inline double second_moment_exact(int n, int delta, const InteractionMatrix& M, const Vector& alpha,
                                  std::uint64_t latticeBound = kDefaultLatticeBound) {
  return std::exp(log_second_moment_exact(n, delta, M, alpha, latticeBound));
}

// ---------------------------------------------------------------- Potts phase diagram

enum class Regime { disorderedOnly, disorderedDominant, coexistence, orderedDominant, orderedOnly };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::disorderedOnly: return "disordered-only";
    case Regime::disorderedDominant: return "disordered-dominant";
    case Regime::coexistence: return "coexistence";
    case Regime::orderedDominant: return "ordered-dominant";
    default: return "ordered-only";
  }
}

// DIF = Phi1(x,1,...,1) - Phi1(1,...,1) for a majority ratio x.
inline double potts_dif(int q, int delta, double B, double x) {
  auto M = build_potts_matrix(q, B);
  Vector R = Vector::Ones(q);
  R[0] = x;
  return phi1(M, delta, R) - phi1(M, delta, Vector::Ones(q));
}

struct PhaseDiagramPoint {
  Regime regime = Regime::disorderedOnly;
  std::optional<double> dif;
  std::vector<Phase> localMaxima;
  std::vector<int> dominantSet;  // indices into localMaxima
  PottsThresholds thresholds;
};

inline PhaseDiagramPoint potts_phase_diagram(int q, int delta, double B) {
  require(B > 1, "phase diagram needs B > 1");
  PhaseDiagramPoint out;
  out.thresholds = potts_thresholds(q, delta);
  const auto& th = out.thresholds;
  auto M = build_potts_matrix(q, B);
  auto x = majority_ratio(q, delta, B);
  if (!x && B >= th.Bu - 1e-12 && B < th.Brc) x = std::pow(detail::uniqueness_root(q, delta - 1), delta - 1);
  if (x) out.dif = potts_dif(q, delta, B, *x);
  if (B < th.Bu)
    out.regime = Regime::disorderedOnly;
  else if (B >= th.Brc)
    out.regime = Regime::orderedOnly;
  else if (std::abs(B - th.Bo) <= 1e-9)
    out.regime = Regime::coexistence;
  else
    out.regime = B < th.Bo ? Regime::disorderedDominant : Regime::orderedDominant;

  for (const auto& fp : potts_fixpoints(q, delta, B)) {
    if (fp.stability != Stability::attractive) continue;
    const int copies = fp.potts->t == 0 ? 1 : q;
    for (int c = 0; c < copies; ++c) {
      Phase ph;
      ph.alpha = fp.alpha;
      if (c > 0) std::swap(ph.alpha[0], ph.alpha[c]);
      ph.psi1 = psi1(M, delta, ph.alpha);
      ph.hessianEigen = fp.hessianEigen;
      ph.localMax = true;
      ph.hessianLocalMax = fp.hessianNegative;
      out.localMaxima.push_back(ph);
    }
  }
  double best = kNegInf;
  for (const auto& p : out.localMaxima) best = std::max(best, p.psi1);
  for (std::size_t i = 0; i < out.localMaxima.size(); ++i) {
    auto& p = out.localMaxima[i];
    if (p.psi1 >= best - 1e-9) {
      p.dominant = true;
      p.hessianDominant = p.hessianLocalMax;
      out.dominantSet.push_back(static_cast<int>(i));
    }
  }
  return out;
}

// ---------------------------------------------------------------- small subgraph conditioning

struct SmallGraphConstants {
  std::vector<double> mu;
  std::vector<double> lambda;  // lambda[i-1] = (delta-1)^i / (2i)
  std::vector<double> delta;   // delta[i-1] = sum_j mu_j^i
  double ratioLimit = 1;
  double seriesValue = 1;      // exp(sum_{i<=kmax} lambda_i delta_i^2)
};

inline SmallGraphConstants small_graph_constants(const InteractionMatrix& M, int delta, const Fixpoint& fp,
                                                 int kmax) {
  require_delta(delta);
  require(kmax >= 1, "kmax must be positive");
  auto js = jacobian_matrix(M, delta, fp.R);
  SmallGraphConstants out;
  out.mu = js.restricted;
  for (double m : out.mu)
    require(m < 1.0 / (delta - 1) - kMarginalBand && (delta - 1) * m * m < 1,
            "small subgraph constants need a Hessian dominant fixpoint");
  double logSeries = 0;
  for (int i = 1; i <= kmax; ++i) {
    double lam = std::pow(delta - 1.0, i) / (2.0 * i);
    double d = 0;
    for (double m : out.mu) d += std::pow(m, i);
    out.lambda.push_back(lam);
    out.delta.push_back(d);
    logSeries += lam * d * d;
  }
  double logProd = 0;
  for (double a : out.mu)
    for (double b : out.mu) logProd += -0.5 * std::log1p(-(delta - 1) * a * b);
  out.ratioLimit = std::exp(logProd);
  out.seriesValue = std::exp(logSeries);
  return out;
}

// ---------------------------------------------------------------- reports

struct MomentReport {
  std::vector<Phase> phases;
  std::vector<double> phasePsi2;
  double psi1Max = kNegInf;
  double psi2Max = kNegInf;
  std::optional<double> normValue;
  std::vector<int> dominantSet;
  std::optional<SmallGraphConstants> smallGraph;
  bool gridExceeded = false;  // the simplex safety scan beat every fixpoint phase
};

struct MomentOptions {
  bool computePsi2 = true;
  Psi2Options psi2;
  int gridMaxColors = 4;
  double gridStep = 0.02;
  int smallGraphKmax = 60;
  std::uint64_t seed = 1;
};

namespace detail {

inline void simplex_grid(int q, int steps, const std::function<void(const Vector&)>& f) {
  std::vector<int> c(q, 0);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == q - 1) {
      c[i] = left;
      Vector a(q);
      for (int j = 0; j < q; ++j) a[j] = double(c[j]) / steps;
      f(a);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      c[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, steps);
}

}  // namespace detail

inline std::vector<Fixpoint> model_fixpoints(const InteractionMatrix& M, int delta, std::uint64_t seed) {
  const Matrix& B = M.entries();
  const int q = M.q();
  double diag = B(0, 0), off = q > 1 ? B(0, 1) : 0;
  bool potts = off > 0;
  for (int i = 0; i < q && potts; ++i)
    for (int j = 0; j < q; ++j)
      if (std::abs(B(i, j) / off - (i == j ? diag / off : 1.0)) > 1e-15) potts = false;
  if (potts && diag / off > 1) {
    auto fps = potts_fixpoints(q, delta, diag / off);
    std::vector<Fixpoint> out;
    for (const auto& f : fps) out.push_back(make_fixpoint(M, delta, f.R, f.potts));
    return out;
  }
  Rng rng(seed);
  return search_fixpoints(M, delta, rng);
}

// Psi1 over fixpoint phases, Psi2 at each, the induced norm, dominant set and
// small-graph constants of the first Hessian dominant phase.
inline MomentReport moment_report(const InteractionMatrix& M, int delta, const MomentOptions& opt = {}) {
  require_delta(delta);
  MomentReport rep;
  auto fps = model_fixpoints(M, delta, opt.seed);
  std::vector<Vector> seeds;
  for (const auto& fp : fps) {
    Phase ph;
    ph.alpha = fp.alpha;
    ph.psi1 = psi1(M, delta, fp.alpha);
    ph.hessianEigen = fp.hessianEigen;
    ph.localMax = fp.stability == Stability::attractive;
    ph.hessianLocalMax = fp.hessianNegative;
    rep.phases.push_back(ph);
    rep.psi1Max = std::max(rep.psi1Max, ph.psi1);
    seeds.push_back(fp.R);
  }
  for (std::size_t i = 0; i < rep.phases.size(); ++i) {
    auto& ph = rep.phases[i];
    if (ph.psi1 >= rep.psi1Max - 1e-9) {
      ph.dominant = true;
      ph.hessianDominant = ph.hessianLocalMax;
      rep.dominantSet.push_back(static_cast<int>(i));
    }
  }
  if (M.q() <= opt.gridMaxColors) {
    int steps = static_cast<int>(std::lround(1 / opt.gridStep));
    detail::simplex_grid(M.q(), steps, [&](const Vector& a) {
      if (psi1(M, delta, a) > rep.psi1Max + 1e-9) rep.gridExceeded = true;
    });
  }
  if (M.ferromagnetic()) {
    auto n = matrix_norm_p2(cholesky_factor(M), double(delta) / (delta - 1), seeds, 32, opt.seed);
    rep.normValue = n.value;
  }
  if (opt.computePsi2) {
    for (const auto& ph : rep.phases) {
      double v = psi2(M, delta, ph.alpha, opt.psi2);
      rep.phasePsi2.push_back(v);
      rep.psi2Max = std::max(rep.psi2Max, v);
    }
  }
  for (std::size_t i = 0; i < fps.size(); ++i)
    if (rep.phases[i].hessianDominant) {
      try {
        rep.smallGraph = small_graph_constants(M, delta, fps[i], opt.smallGraphKmax);
      } catch (const ValidationError&) {
      }
      break;
    }
  return rep;
}

}  // namespace pottslab
