#include "irmbench/linmath.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace irmbench {

SymMatrix::SymMatrix(const Matrix& m) {
    if (m.rows() != m.cols()) throw ShapeError("SymMatrix: not square");
    if (!m.all_finite()) throw InvalidMatrixError("SymMatrix: non-finite entry");
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j) {
            const double tol = lintol::kSymmetry * std::max(1.0, std::abs(m(i, j)));
            if (std::abs(m(i, j) - m(j, i)) > tol)
                throw InvalidMatrixError("SymMatrix: asymmetric at (" + std::to_string(i) +
                                         "," + std::to_string(j) + ")");
        }
    m_ = m;
    // Store the exact symmetrization so downstream algebra sees A_ij == A_ji.
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j) {
            const double v = 0.5 * (m_(i, j) + m_(j, i));
            m_(i, j) = v;
            m_(j, i) = v;
        }
}

SymMatrix SymMatrix::diag(const std::vector<double>& d) {
    Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return SymMatrix(m);
}

namespace {

double off_diag_sq(const Matrix& a) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i + 1; j < a.cols(); ++j) s += a(i, j) * a(i, j);
    return 2.0 * s;
}

}  // namespace

EigDecomp sym_eig(const SymMatrix& sa) {
    const int n = sa.dim();
    Matrix a = sa.mat();
    if (!a.all_finite()) throw InvalidMatrixError("sym_eig: non-finite entry");
    Matrix v = Matrix::identity(n);

    if (n > 0) {
        const double scale = std::max(a.max_abs(), 1e-300);
        const double stop = 1e-30 * scale * scale * n * n;
        const int max_sweeps = 64;
        for (int sweep = 0; sweep < max_sweeps && off_diag_sq(a) > stop; ++sweep) {
            for (int p = 0; p < n - 1; ++p) {
                for (int q = p + 1; q < n; ++q) {
                    const double apq = a(p, q);
                    if (std::abs(apq) <= 1e-300) {
                        a(p, q) = 0.0;
                        a(q, p) = 0.0;
                        continue;
                    }
                    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                    const double t = (theta >= 0 ? 1.0 : -1.0) /
                                     (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    const double c = 1.0 / std::sqrt(t * t + 1.0);
                    const double s = t * c;
                    const double tau = s / (1.0 + c);

                    const double app = a(p, p), aqq = a(q, q);
                    a(p, p) = app - t * apq;
                    a(q, q) = aqq + t * apq;
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    for (int r = 0; r < n; ++r) {
                        if (r != p && r != q) {
                            const double arp = a(r, p), arq = a(r, q);
                            a(r, p) = arp - s * (arq + tau * arp);
                            a(p, r) = a(r, p);
                            a(r, q) = arq + s * (arp - tau * arq);
                            a(q, r) = a(r, q);
                        }
                        const double vrp = v(r, p), vrq = v(r, q);
                        v(r, p) = vrp - s * (vrq + tau * vrp);
                        v(r, q) = vrq + s * (vrp - tau * vrq);
                    }
                }
            }
        }
    }

    // Sort eigenpairs by descending eigenvalue.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a(i, i) > a(j, j); });

    EigDecomp out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (int k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[k], order[k]);
        for (int r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, order[k]);
    }
    return out;
}

double condition_number(const EigDecomp& eig) {
    double amax = 0.0, amin = std::numeric_limits<double>::infinity();
    for (double l : eig.eigenvalues) {
        amax = std::max(amax, std::abs(l));
        amin = std::min(amin, std::abs(l));
    }
    if (amax == 0.0) throw DegenerateError("condition_number: zero matrix");
    if (amin <= lintol::kCondSingular * amax)
        return std::numeric_limits<double>::infinity();
    return amax / amin;
}

double condition_number(const SymMatrix& a) { return condition_number(sym_eig(a)); }

Matrix spd_solve(const EigDecomp& eig, const Matrix& b, bool* truncated) {
    const int n = static_cast<int>(eig.eigenvalues.size());
    if (b.rows() != n) throw ShapeError("spd_solve: rhs rows != dim");
    const double lmax = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
    const double lmin = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.back();
    if (lmin < -lintol::kNotPsd * std::max(lmax, 0.0))
        throw NotPSDError("spd_solve: matrix is indefinite");

    const double cutoff = lintol::kRank * std::max(lmax, 0.0);
    bool dropped = false;

    // X = V diag(1/l on retained spectrum) V^T B
    Matrix vtb = tmul(eig.eigenvectors, b);  // n x k
    for (int i = 0; i < n; ++i) {
        const double l = eig.eigenvalues[i];
        if (l > cutoff && l > 0.0) {
            for (int j = 0; j < vtb.cols(); ++j) vtb(i, j) /= l;
        } else {
            dropped = true;
            for (int j = 0; j < vtb.cols(); ++j) vtb(i, j) = 0.0;
        }
    }
    if (truncated) *truncated = dropped;
    return eig.eigenvectors * vtb;
}

Matrix spd_solve(const SymMatrix& a, const Matrix& b, bool* truncated) {
    return spd_solve(sym_eig(a), b, truncated);
}

Matrix sym_pinv(const SymMatrix& a, bool* truncated) {
    return spd_solve(a, Matrix::identity(a.dim()), truncated);
}

SymMatrix symmetrized(Matrix m) {
    if (m.rows() != m.cols()) throw ShapeError("symmetrized: not square");
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
    return SymMatrix(m);
}

}  // namespace irmbench
