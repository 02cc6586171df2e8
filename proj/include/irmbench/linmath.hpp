#pragma once

#include <limits>
#include <vector>

#include "irmbench/matrix.hpp"

namespace irmbench {

// Tolerances used by the symmetric-eigen machinery. Exposed so tests can
// assert against exactly the constants the implementation uses.
namespace lintol {
inline constexpr double kSymmetry = 1e-12;        // allowed |A_ij - A_ji| / max(1, |A_ij|)
inline constexpr double kEigReconstruct = 1e-9;   // ||V L V^T - A||_max / ||A||_max
inline constexpr double kOrthonormal = 1e-9;      // ||V^T V - I||_max
inline constexpr double kRank = 1e-12;            // eigenvalue truncation, relative to lambda_max
inline constexpr double kCondSingular = 1e-14;    // |l_min| <= kCondSingular * |l_max| -> infinite
inline constexpr double kNotPsd = 1e-9;           // l_min < -kNotPsd * l_max -> reject
inline constexpr double kSolveResidual = 1e-8;    // ||A X - P B|| <= kSolveResidual * ||B||
}  // namespace lintol

// Dense symmetric matrix. Construction validates finiteness and symmetry
// (within lintol::kSymmetry) and stores an exactly symmetrized copy.
class SymMatrix {
  public:
    SymMatrix() = default;
    explicit SymMatrix(const Matrix& m);

    static SymMatrix identity(int n) { return SymMatrix(Matrix::identity(n)); }
    static SymMatrix diag(const std::vector<double>& d);

    int dim() const { return m_.rows(); }
    const Matrix& mat() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }

  private:
    Matrix m_;
};

// Eigendecomposition A = V diag(lambda) V^T with eigenvalues sorted
// descending and orthonormal eigenvector columns.
struct EigDecomp {
    std::vector<double> eigenvalues;
    Matrix eigenvectors;
};

// Cyclic Jacobi eigendecomposition. Deterministic for fixed input.
// Throws InvalidMatrixError on non-finite entries (guarded again here even
// though SymMatrix construction already checks).
EigDecomp sym_eig(const SymMatrix& a);

// |lambda_max| / |lambda_min|. Returns +infinity when
// |lambda_min| <= lintol::kCondSingular * |lambda_max|.
// Throws DegenerateError on the zero matrix.
double condition_number(const SymMatrix& a);
double condition_number(const EigDecomp& eig);

// Solve A X = B for positive semidefinite A. Eigenvalues above
// lintol::kRank * lambda_max are inverted; the rest are truncated, which
// yields the minimum-norm least-squares solution on the retained eigenspace.
// Sets *truncated (when provided) if any eigenvalue was dropped.
// Throws ShapeError on dimension mismatch and NotPSDError when
// lambda_min < -lintol::kNotPsd * lambda_max.
Matrix spd_solve(const SymMatrix& a, const Matrix& b, bool* truncated = nullptr);
Matrix spd_solve(const EigDecomp& eig, const Matrix& b, bool* truncated = nullptr);

// Moore-Penrose pseudoinverse through the same truncated eigen route.
Matrix sym_pinv(const SymMatrix& a, bool* truncated = nullptr);

// Averages m with its transpose before constructing; for products that are
// symmetric up to rounding (theta * sxx * theta^T and friends).
SymMatrix symmetrized(Matrix m);

}  // namespace irmbench
