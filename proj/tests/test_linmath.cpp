#include <doctest.h>

#include <cmath>
#include <limits>

#include "irmbench/envgen.hpp"
#include "irmbench/linmath.hpp"
#include "irmbench/rng.hpp"

using namespace irmbench;

namespace {

Matrix random_symmetric(Rng& rng, int d) {
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            const double v = 2.0 * rng.uniform() - 1.0;
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

}  // namespace

TEST_CASE("sym_eig identity") {
    const EigDecomp e = sym_eig(SymMatrix::identity(2));
    CHECK(e.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sym_eig 2x2 via characteristic polynomial") {
    // [[1,1],[1,3]]: trace 4, det 2, lambda = 2 +- sqrt(2)
    const double tr = 4.0, det = 2.0;
    const double lam_hi = 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
    const double lam_lo = 0.5 * (tr - std::sqrt(tr * tr - 4.0 * det));
    const EigDecomp e = sym_eig(SymMatrix(Matrix{{1, 1}, {1, 3}}));
    CHECK(e.eigenvalues[0] == doctest::Approx(lam_hi).epsilon(1e-12));
    CHECK(e.eigenvalues[1] == doctest::Approx(lam_lo).epsilon(1e-12));
}

TEST_CASE("sym_eig diagonal") {
    const EigDecomp e = sym_eig(SymMatrix::diag({5, 2, 1}));
    CHECK(e.eigenvalues[0] == doctest::Approx(5.0));
    CHECK(e.eigenvalues[1] == doctest::Approx(2.0));
    CHECK(e.eigenvalues[2] == doctest::Approx(1.0));
    // eigenvectors are a permuted identity
    for (int k = 0; k < 3; ++k) {
        int ones = 0;
        for (int r = 0; r < 3; ++r)
            if (std::abs(std::abs(e.eigenvectors(r, k)) - 1.0) < 1e-12) ++ones;
        CHECK(ones == 1);
    }
}

TEST_CASE("sym_eig rejects non-finite") {
    Matrix m{{1.0, 0.0}, {0.0, 1.0}};
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(SymMatrix{m}, InvalidMatrixError);
}

TEST_CASE("SymMatrix rejects asymmetry") {
    CHECK_THROWS_AS(SymMatrix(Matrix{{1.0, 2.0}, {2.1, 1.0}}), InvalidMatrixError);
}

TEST_CASE("condition_number basics") {
    CHECK(condition_number(SymMatrix::identity(3)) == doctest::Approx(1.0));
    // ratio of the 2x2 eigenvalues: (2+sqrt2)/(2-sqrt2) = 3 + 2 sqrt2
    CHECK(condition_number(SymMatrix(Matrix{{1, 1}, {1, 3}})) ==
          doctest::Approx(3.0 + 2.0 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(std::isinf(condition_number(SymMatrix::diag({1.0, 1e-16}))));
    CHECK_THROWS_AS(condition_number(SymMatrix(Matrix(2, 2))), DegenerateError);
}

TEST_CASE("spd_solve examples") {
    const Matrix b{{3.0}, {7.0}};
    CHECK((spd_solve(SymMatrix::identity(2), b) - b).max_abs() < 1e-12);

    const Matrix x = spd_solve(SymMatrix::diag({2, 1}), Matrix{{2.0}, {1.0}});
    CHECK(x(0, 0) == doctest::Approx(1.0));
    CHECK(x(1, 0) == doctest::Approx(1.0));

    bool truncated = false;
    const Matrix p = spd_solve(SymMatrix::diag({1, 0}), b, &truncated);
    CHECK(truncated);
    CHECK(p(0, 0) == doctest::Approx(3.0));
    CHECK(p(1, 0) == 0.0);
}

TEST_CASE("spd_solve errors") {
    CHECK_THROWS_AS(spd_solve(SymMatrix::identity(2), Matrix(3, 1)), ShapeError);
    CHECK_THROWS_AS(spd_solve(SymMatrix::diag({1.0, -1.0}), Matrix(2, 1)), NotPSDError);
}

TEST_CASE("eig invariants on random matrices") {
    Rng rng(101);
    double worst_rec = 0.0, worst_orth = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const int d = 1 + t % 8;
        const Matrix a = random_symmetric(rng, d);
        const EigDecomp e = sym_eig(SymMatrix(a));
        REQUIRE(std::is_sorted(e.eigenvalues.rbegin(), e.eigenvalues.rend()));
        Matrix recon(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int k = 0; k < d; ++k)
                    s += e.eigenvectors(i, k) * e.eigenvalues[k] * e.eigenvectors(j, k);
                recon(i, j) = s;
            }
        worst_rec = std::max(worst_rec, (recon - a).max_abs() / std::max(a.max_abs(), 1e-12));
        worst_orth = std::max(
            worst_orth, (tmul(e.eigenvectors, e.eigenvectors) - Matrix::identity(d)).max_abs());
    }
    CHECK(worst_rec <= lintol::kEigReconstruct);
    CHECK(worst_orth <= lintol::kOrthonormal);
}

TEST_CASE("spd_solve recovers x for conditioned SPD") {
    Rng rng(202);
    double worst = 0.0;
    for (int t = 0; t < 300; ++t) {
        const int d = 2 + t % 7;
        // SPD with condition number <= 1e6 by construction
        const Matrix q = rotation_matrix(d, rng.bits());
        Matrix a(d, d);
        for (int i = 0; i < d; ++i) {
            const double lam = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) a(r, c) += q(r, i) * lam * q(c, i);
        }
        const Matrix x = rng.normal_matrix(d, 2);
        const SymMatrix sa = symmetrized(a);
        const Matrix got = spd_solve(sa, sa.mat() * x);
        worst = std::max(worst,
                         (got - x).frobenius_norm() / std::max(x.frobenius_norm(), 1e-12));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("condition number is scale invariant") {
    Rng rng(303);
    for (int t = 0; t < 200; ++t) {
        const int d = 2 + t % 6;
        const Matrix a = random_symmetric(rng, d);
        const double c = std::pow(10.0, -4.0 + 8.0 * rng.uniform());
        const double k1 = condition_number(SymMatrix(a));
        const double k2 = condition_number(SymMatrix(a * c));
        if (std::isinf(k1)) {
            CHECK(std::isinf(k2));
        } else {
            CHECK(k2 == doctest::Approx(k1).epsilon(1e-9));
        }
    }
}
