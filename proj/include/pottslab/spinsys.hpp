#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "error.hpp"

namespace pottslab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kMaxColors = 32;
inline constexpr double kZeroEigenTol = 1e-10;

enum class Signature { ferromagnetic, antiferromagnetic, indefinite };

inline const char* to_string(Signature s) {
  switch (s) {
    case Signature::ferromagnetic: return "ferromagnetic";
    case Signature::antiferromagnetic: return "antiferromagnetic";
    default: return "indefinite";
  }
}

namespace detail {

inline Signature signature_from_eigen(const Vector& ev) {
  // ev ascending
  bool allPos = true;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (!(ev[i] > kZeroEigenTol)) allPos = false;
  if (allPos) return Signature::ferromagnetic;
  bool anti = ev[ev.size() - 1] > kZeroEigenTol;
  for (Eigen::Index i = 0; i + 1 < ev.size(); ++i)
    if (!(ev[i] < -kZeroEigenTol)) anti = false;
  return anti ? Signature::antiferromagnetic : Signature::indefinite;
}

// Diagnostic text, empty when the support graph is connected and not bipartite.
inline std::string ergodicity_problem(const Matrix& B) {
  const int q = static_cast<int>(B.rows());
  std::vector<int> side(q, -1);
  bool oddCycle = false;
  side[0] = 0;
  std::queue<int> todo;
  todo.push(0);
  while (!todo.empty()) {
    int i = todo.front();
    todo.pop();
    for (int j = 0; j < q; ++j) {
      if (B(i, j) <= 0) continue;
      if (side[j] < 0) {
        side[j] = 1 - side[i];
        todo.push(j);
      } else if (side[j] == side[i]) {
        oddCycle = true;
      }
    }
  }
  for (int i = 0; i < q; ++i)
    if (side[i] < 0) return "reducible: color " + std::to_string(i) + " is unreachable from color 0";
  // A symmetric support always has 2-cycles, so the period is 1 or 2.
  if (!oddCycle) return "periodic: support graph is bipartite (period 2)";
  return {};
}

}  // namespace detail

// Symmetric nonnegative q x q interaction matrix. Immutable after construction.
class InteractionMatrix {
 public:
  static InteractionMatrix from_entries(const Matrix& entries) {
    require(entries.rows() == entries.cols(), "interaction matrix must be square");
    const int q = static_cast<int>(entries.rows());
    require(q >= 2, "interaction matrix needs q >= 2");
    require(q <= kMaxColors, "q exceeds the supported maximum of " + std::to_string(kMaxColors));
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) {
        require(std::isfinite(entries(i, j)), "interaction entries must be finite");
        require(entries(i, j) >= 0, "interaction entries must be nonnegative");
        require(entries(i, j) == entries(j, i),
                "interaction matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    InteractionMatrix m;
    m.entries_ = entries;
    Eigen::SelfAdjointEigenSolver<Matrix> es(entries, Eigen::EigenvaluesOnly);
    m.eigen_ = es.eigenvalues();
    m.signature_ = detail::signature_from_eigen(m.eigen_);
    m.ergodicProblem_ = detail::ergodicity_problem(entries);
    return m;
  }

  int q() const { return static_cast<int>(entries_.rows()); }
  const Matrix& entries() const { return entries_; }
  double operator()(int i, int j) const { return entries_(i, j); }
  // Ascending.
  const Vector& eigenvalues() const { return eigen_; }
  Signature signature() const { return signature_; }
  bool ergodic() const { return ergodicProblem_.empty(); }
  const std::string& ergodicity_diagnostic() const { return ergodicProblem_; }
  bool ferromagnetic() const { return signature_ == Signature::ferromagnetic; }

 private:
  InteractionMatrix() = default;
  Matrix entries_;
  Vector eigen_;
  Signature signature_ = Signature::indefinite;
  std::string ergodicProblem_;
};

inline InteractionMatrix build_potts_matrix(int q, double B) {
  require(q >= 2 && q <= kMaxColors, "Potts model needs 2 <= q <= " + std::to_string(kMaxColors));
  require(B > 0 && std::isfinite(B), "Potts activity B must be positive");
  Matrix e = Matrix::Ones(q, q);
  e.diagonal().setConstant(B);
  return InteractionMatrix::from_entries(e);
}

inline Signature classify_signature(const InteractionMatrix& M) {
  require(M.ergodic(), "non-ergodic interaction matrix: " + M.ergodicity_diagnostic());
  return M.signature();
}

inline Signature classify_signature(const Matrix& entries) {
  return classify_signature(InteractionMatrix::from_entries(entries));
}

// Upper-triangular Bhat with B = Bhat^T Bhat.
inline Matrix cholesky_factor(const InteractionMatrix& M) {
  require(M.ferromagnetic(), "Cholesky factor requires a positive definite interaction matrix");
  Eigen::LLT<Matrix> llt(M.entries());
  require(llt.info() == Eigen::Success, "Cholesky factorization failed");
  Matrix U = llt.matrixL().transpose();
  return U;
}

// (z1'Mz1)(z2'Mz2) - (z1'Mz2)^2
inline double alignment_gap(const InteractionMatrix& M, const Vector& z1, const Vector& z2) {
  require(z1.size() == M.q() && z2.size() == M.q(), "alignment vectors have wrong length");
  for (const Vector* z : {&z1, &z2}) {
    require(z->minCoeff() >= 0, "alignment vectors must be nonnegative");
    require(std::abs(z->sum() - 1) < 1e-9, "alignment vectors must have unit 1-norm");
  }
  const Matrix& B = M.entries();
  double a = z1.dot(B * z1), b = z2.dot(B * z2), c = z1.dot(B * z2);
  return a * b - c * c;
}

inline bool ferro_alignment_check(const InteractionMatrix& M, const Vector& z1, const Vector& z2) {
  const Matrix& B = M.entries();
  double scale = std::max(1.0, B.cwiseAbs().maxCoeff());
  return alignment_gap(M, z1, z2) >= -1e-12 * scale * scale;
}

// A point of the probability simplex with its first-moment exponent.
struct Phase {
  Vector alpha;
  double psi1 = 0;
  std::vector<double> hessianEigen;
  bool localMax = false;
  bool hessianLocalMax = false;
  bool dominant = false;
  bool hessianDominant = false;
};

inline void require_simplex(const Vector& a, int q) {
  require(a.size() == q, "phase vector has length " + std::to_string(a.size()) + ", expected " + std::to_string(q));
  for (Eigen::Index i = 0; i < a.size(); ++i)
    require(std::isfinite(a[i]) && a[i] >= 0, "phase entries must be nonnegative");
  require(std::abs(a.sum() - 1) < 1e-9, "phase entries must sum to 1");
}

inline Vector uniform_phase(int q) { return Vector::Constant(q, 1.0 / q); }

}  // namespace pottslab
