#pragma once

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "spinsys.hpp"

namespace pottslab {

inline constexpr double kMarginalBand = 1e-9;
inline constexpr double kFixpointResidual = 1e-10;

enum class Stability { attractive, unstable, marginal };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::attractive: return "attractive";
    case Stability::unstable: return "unstable";
    default: return "marginal";
  }
}

struct PottsStructure {
  int t = 0;       // number of large coordinates
  double x = 1;    // R_1 / R_q
};

struct Fixpoint {
  Vector R;
  Vector alpha;
  std::vector<double> restricted;      // spectrum of M on the subspace orthogonal to sqrt(alpha)
  std::vector<double> jacobianEigen;   // (delta-1) * restricted
  std::vector<double> hessianEigen;    // (1+x)((delta-1)x-1) per restricted x
  Stability stability = Stability::unstable;
  bool hessianNegative = false;
  std::optional<PottsStructure> potts;
};

struct PottsThresholds {
  double Bu = 0, Bo = 0, Brc = 0;
};

inline void require_delta(int delta) { require(delta >= 3, "degree delta must be at least 3"); }

// Scale R so that R'BR = 1.
inline Vector normalize_ratio(const InteractionMatrix& M, const Vector& R) {
  double s = R.dot(M.entries() * R);
  require(s > 0 && std::isfinite(s), "ratio vector has zero weight");
  return R / std::sqrt(s);
}

inline Vector tree_step(const InteractionMatrix& M, int delta, const Vector& R) {
  require_delta(delta);
  require(R.size() == M.q(), "ratio vector has wrong length");
  for (Eigen::Index i = 0; i < R.size(); ++i)
    require(R[i] > 0 && std::isfinite(R[i]), "ratio vector must be strictly positive");
  Vector s = M.entries() * R;
  // Rescale before powering so large degrees cannot overflow.
  s /= s.maxCoeff();
  Vector out = s.array().pow(delta - 1).matrix();
  return normalize_ratio(M, out);
}

inline double fixpoint_residual(const InteractionMatrix& M, int delta, const Vector& R) {
  Vector Rn = normalize_ratio(M, R);
  return (tree_step(M, delta, Rn) - Rn).cwiseAbs().maxCoeff();
}

inline Vector ratio_to_phase(const Vector& R, int delta) {
  Vector a = R.array().pow(double(delta) / (delta - 1)).matrix();
  return a / a.sum();
}

// Phi_1(R) = delta/2 ln(R'BR) - (delta-1) ln sum R^{delta/(delta-1)}
inline double phi1(const InteractionMatrix& M, int delta, const Vector& R) {
  double quad = R.dot(M.entries() * R);
  double s = R.array().pow(double(delta) / (delta - 1)).sum();
  return 0.5 * delta * std::log(quad) - (delta - 1) * std::log(s);
}

struct JacobianSpectrum {
  Matrix M;
  std::vector<double> full;        // ascending
  std::vector<double> restricted;  // ascending
};

// Orthonormal basis of the complement of the unit vector e.
inline Matrix orthogonal_complement(const Vector& e) {
  const auto q = e.size();
  Matrix E = e;
  Eigen::HouseholderQR<Matrix> qr(E);
  Matrix Q = qr.householderQ() * Matrix::Identity(q, q);
  return Q.rightCols(q - 1);
}

inline std::vector<double> sorted_eigen(const Matrix& A) {
  std::vector<double> v;
  if (A.rows() == 0) return v;
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) v.push_back(es.eigenvalues()[i]);
  std::sort(v.begin(), v.end());
  return v;
}

inline JacobianSpectrum jacobian_matrix(const InteractionMatrix& M, int delta, const Vector& Rin) {
  require_delta(delta);
  Vector R = normalize_ratio(M, Rin);
  double res = (tree_step(M, delta, R) - R).cwiseAbs().maxCoeff();
  require(res < kFixpointResidual, "not a tree-recursion fixpoint (residual " + std::to_string(res) + ")");
  const int q = M.q();
  Vector alpha = ratio_to_phase(R, delta);
  JacobianSpectrum out;
  out.M.resize(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) out.M(i, j) = M(i, j) * R[i] * R[j] / std::sqrt(alpha[i] * alpha[j]);
  out.full = sorted_eigen(out.M);
  Matrix Q = orthogonal_complement(alpha.cwiseSqrt());
  Matrix Mr = Q.transpose() * out.M * Q;
  out.restricted = sorted_eigen(0.5 * (Mr + Mr.transpose()));
  return out;
}

struct StabilityReport {
  Stability stability = Stability::unstable;
  std::vector<double> jacobianEigen;
  std::vector<double> hessianEigen;
  bool hessianNegative = false;
  // False when the interaction is not ferromagnetic: the Jacobian and Hessian
  // criteria can then disagree.
  bool equivalenceGuaranteed = false;
};

inline StabilityReport stability_from_restricted(const std::vector<double>& restricted, int delta, bool ferro) {
  StabilityReport r;
  r.equivalenceGuaranteed = ferro;
  double rho = 0;
  bool neg = true;
  for (double x : restricted) {
    double j = (delta - 1) * x;
    r.jacobianEigen.push_back(j);
    rho = std::max(rho, std::abs(j));
    double a = 1 + x, b = j - 1;
    r.hessianEigen.push_back(a * b);
    // Factors inside the marginal band count as zero.
    bool strictlyNeg = (a > kMarginalBand && b < -kMarginalBand) || (a < -kMarginalBand && b > kMarginalBand);
    if (!strictlyNeg) neg = false;
  }
  r.hessianNegative = neg;
  if (rho < 1 - kMarginalBand)
    r.stability = Stability::attractive;
  else if (rho <= 1 + kMarginalBand)
    r.stability = Stability::marginal;
  else
    r.stability = Stability::unstable;
  return r;
}

inline StabilityReport classify_stability(const InteractionMatrix& M, int delta, const Vector& R) {
  auto js = jacobian_matrix(M, delta, R);
  return stability_from_restricted(js.restricted, delta, M.ferromagnetic());
}

inline Fixpoint make_fixpoint(const InteractionMatrix& M, int delta, const Vector& R,
                              std::optional<PottsStructure> potts = std::nullopt) {
  Fixpoint fp;
  fp.R = normalize_ratio(M, R);
  fp.alpha = ratio_to_phase(fp.R, delta);
  auto js = jacobian_matrix(M, delta, fp.R);
  fp.restricted = js.restricted;
  auto st = stability_from_restricted(js.restricted, delta, M.ferromagnetic());
  fp.jacobianEigen = st.jacobianEigen;
  fp.hessianEigen = st.hessianEigen;
  fp.stability = st.stability;
  fp.hessianNegative = st.hessianNegative;
  fp.potts = potts;
  return fp;
}

namespace detail {

// f_t(y) = (t y^d + q - t) / (y (1 + y + ... + y^{d-2})); the tree equation reads B - 1 = f_t(y).
inline double potts_f(int q, int d, int t, double y) {
  double S = 0, p = 1;
  for (int k = 0; k <= d - 2; ++k) {
    S += p;
    p *= y;
  }
  double yd = std::pow(y, d);
  return (t * yd + q - t) / (y * S);
}

inline double bisect(const std::function<double(double)>& g, double lo, double hi) {
  double glo = g(lo);
  for (int it = 0; it < 400; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (hi - lo <= 1e-13 * std::max(1.0, std::abs(mid))) break;
    double gm = g(mid);
    if (gm == 0) return mid;
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// All y > 1 with f_t(y) = target, ascending.
inline std::vector<double> potts_roots(int q, int d, int t, double target) {
  std::vector<double> roots;
  auto g = [&](double y) { return potts_f(q, d, t, y) - target; };
  const double ratio = std::pow(2.0, 1.0 / 8);
  double z = 1e-6;
  double prevY = 1 + z, prevG = g(prevY);
  if (prevG == 0) roots.push_back(prevY);
  while (true) {
    z *= ratio;
    double y = 1 + z;
    if (y > 1048576.0) break;
    double gy = g(y);
    if (gy == 0) {
      roots.push_back(y);
    } else if (prevG != 0 && (gy < 0) != (prevG < 0)) {
      roots.push_back(bisect(g, prevY, y));
    }
    prevY = y;
    prevG = gy;
  }
  return roots;
}

inline double uniqueness_poly(int q, int d, double y) {
  return std::pow(y, 2 * d) - d * std::pow(y, d + 1) - (d - 1.0) * (q - 2) * std::pow(y, d) +
         d * (q - 1.0) * std::pow(y, d - 1) - (q - 1);
}

// Root rho > 1 of the uniqueness polynomial.
inline double uniqueness_root(int q, int d) {
  auto p = [&](double y) { return uniqueness_poly(q, d, y); };
  double lo = 1 + 1e-6, hi = 2;
  double ph = p(hi);
  while (ph < 0) {
    lo = hi;
    hi *= 2;
    require(hi < 1e12, "uniqueness polynomial has no root above 1");
    ph = p(hi);
  }
  if (ph == 0) return hi;
  return bisect(p, lo, hi);
}

inline Vector potts_ratio(int q, int t, double x) {
  Vector R = Vector::Ones(q);
  R.head(t).setConstant(x);
  return R;
}

}  // namespace detail

inline PottsThresholds potts_thresholds(int q, int delta) {
  require(q >= 3, "Potts thresholds need q >= 3");
  require_delta(delta);
  const int d = delta - 1;
  PottsThresholds th;
  th.Brc = 1 + double(q) / (delta - 2);
  th.Bo = (q - 2) / (std::pow(q - 1.0, 1 - 2.0 / delta) - 1);
  double rho = detail::uniqueness_root(q, d);
  th.Bu = 1 + detail::potts_f(q, d, 1, rho);
  return th;
}

// Fixpoints up to color permutation: the uniform one first, then by t, then by x.
inline std::vector<Fixpoint> potts_fixpoints(int q, int delta, double B) {
  require_delta(delta);
  require(B > 1, "Potts fixpoint enumeration needs B > 1");
  auto M = build_potts_matrix(q, B);
  const int d = delta - 1;
  std::vector<Fixpoint> out;
  out.push_back(make_fixpoint(M, delta, Vector::Ones(q), PottsStructure{0, 1.0}));
  for (int t = 1; t < q; ++t)
    for (double y : detail::potts_roots(q, d, t, B - 1)) {
      double x = std::pow(y, d);
      out.push_back(make_fixpoint(M, delta, detail::potts_ratio(q, t, x), PottsStructure{t, x}));
    }
  return out;
}

// x = R_1/R_q of the attractive (largest-x) majority fixpoint, if any.
inline std::optional<double> majority_ratio(int q, int delta, double B) {
  require_delta(delta);
  auto roots = detail::potts_roots(q, delta - 1, 1, B - 1);
  if (roots.empty()) return std::nullopt;
  return std::pow(roots.back(), delta - 1);
}

// Root marginal of the dominant color for a vertex of degree delta-1.
inline double ordered_root_marginal(int q, int delta, double B) {
  auto th = potts_thresholds(q, delta);
  require(B >= th.Bu - 1e-12, "ordered root marginal needs B >= Bu");
  auto x = majority_ratio(q, delta, B);
  // At B = Bu the two majority roots merge at rho and may escape the scan.
  double xv = x ? *x : std::pow(detail::uniqueness_root(q, delta - 1), delta - 1);
  return xv / (xv + q - 1);
}

// Damped iteration from Dirichlet starts; distinct converged fixpoints sorted lexicographically.
inline std::vector<Fixpoint> search_fixpoints(const InteractionMatrix& M, int delta, Rng& rng, int starts = 200,
                                              double damping = 0.5, int maxIter = 20000) {
  require_delta(delta);
  const int q = M.q();
  std::vector<Vector> found;
  for (int s = 0; s < starts; ++s) {
    auto w = rng.dirichlet(q);
    Vector R(q);
    for (int i = 0; i < q; ++i) R[i] = w[i] + 1e-12;
    R = normalize_ratio(M, R);
    for (int it = 0; it < maxIter; ++it) {
      Vector next = normalize_ratio(M, (1 - damping) * R + damping * tree_step(M, delta, R));
      double diff = (next - R).cwiseAbs().maxCoeff();
      R = next;
      if (diff < 1e-14) break;
    }
    if (fixpoint_residual(M, delta, R) >= kFixpointResidual) continue;
    found.push_back(R);
  }
  std::sort(found.begin(), found.end(), [](const Vector& a, const Vector& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  std::vector<Fixpoint> out;
  std::vector<Vector> kept;
  for (const auto& R : found) {
    bool dup = false;
    for (const auto& K : kept)
      if ((K - R).cwiseAbs().maxCoeff() < 1e-6) dup = true;
    if (dup) continue;
    kept.push_back(R);
    out.push_back(make_fixpoint(M, delta, R));
  }
  return out;
}

}  // namespace pottslab
