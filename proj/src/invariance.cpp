#include "irmbench/invariance.hpp"

#include <cmath>
#include <limits>

#include "irmbench/envgen.hpp"

namespace irmbench {

namespace {

void check_psd(const SymMatrix& a, const char* what) {
    if (a.dim() == 0) return;
    const EigDecomp e = sym_eig(a);
    const double lmax = std::max(e.eigenvalues.front(), 0.0);
    if (e.eigenvalues.back() < -lintol::kNotPsd * std::max(lmax, 1.0))
        throw InvalidMatrixError(std::string(what) + ": not positive semidefinite");
}

}  // namespace

void validate_moments(const EnvironmentMoments& m) {
    if (m.n < 1) throw EmptyEnvironmentError("moments: n < 1");
    if (m.sxy.rows() != m.dx() || m.sxy.cols() != m.dy())
        throw ShapeError("moments: sxy shape mismatch");
    check_psd(m.sxx, "sxx");
    check_psd(m.syy, "syy");

    const int dx = m.dx(), dy = m.dy();
    Matrix block(dx + dy, dx + dy);
    for (int i = 0; i < dx; ++i)
        for (int j = 0; j < dx; ++j) block(i, j) = m.sxx(i, j);
    for (int i = 0; i < dx; ++i)
        for (int j = 0; j < dy; ++j) {
            block(i, dx + j) = m.sxy(i, j);
            block(dx + j, i) = m.sxy(i, j);
        }
    for (int i = 0; i < dy; ++i)
        for (int j = 0; j < dy; ++j) block(dx + i, dx + j) = m.syy(i, j);
    check_psd(SymMatrix(block), "[[sxx,sxy],[sxy^T,syy]]");
}

EnvironmentMoments compute_moments(const EnvironmentData& data) {
    const long n = data.x.rows();
    if (n < 1) throw EmptyEnvironmentError("compute_moments: empty dataset");
    if (data.y.rows() != data.x.rows())
        throw ShapeError("compute_moments: x/y row mismatch");

    const double inv_n = 1.0 / static_cast<double>(n);
    EnvironmentMoments m;
    m.sxx = symmetrized(tmul(data.x, data.x) * inv_n);
    m.sxy = tmul(data.x, data.y) * inv_n;
    m.syy = symmetrized(tmul(data.y, data.y) * inv_n);
    m.n = n;
    return m;
}

SymMatrix gram(const LinearRepresentation& rep, const EnvironmentMoments& m) {
    if (rep.d_x() != m.dx()) throw ShapeError("gram: theta cols != d_x");
    return symmetrized(mult(rep.theta * m.sxx.mat(), rep.theta));
}

Classifier lse_classifier(const LinearRepresentation& rep, const EnvironmentMoments& m) {
    const SymMatrix g = gram(rep, m);
    Classifier c;
    c.w = spd_solve(g, rep.theta * m.sxy, &c.singular_gram);
    return c;
}

double risk(const LinearRepresentation& rep, const Classifier& w, const EnvironmentMoments& m) {
    const SymMatrix g = gram(rep, m);
    if (w.w.rows() != g.dim() || w.w.cols() != m.dy())
        throw ShapeError("risk: classifier shape mismatch");
    const Matrix gw = g.mat() * w.w;
    double r = frob_inner(w.w, gw) - 2.0 * frob_inner(w.w, rep.theta * m.sxy);
    for (int j = 0; j < m.dy(); ++j) r += m.syy(j, j);
    return r;
}

double penalty_irmv2(const LinearRepresentation& rep, const Classifier& w,
                     const EnvironmentMoments& m) {
    const SymMatrix g = gram(rep, m);
    const Classifier we = lse_classifier(rep, m);
    const Matrix u = w.w - we.w;
    return frob_inner(u, g.mat() * u);
}

double penalty_irmv1(const LinearRepresentation& rep, const Classifier& w,
                     const EnvironmentMoments& m) {
    const SymMatrix g = gram(rep, m);
    const Matrix grad_half = g.mat() * w.w - rep.theta * m.sxy;  // (1/2) grad_w risk
    const double norm = grad_half.frobenius_norm();
    return 4.0 * norm * norm;
}

Classifier pooled_classifier(const LinearRepresentation& rep,
                             const std::vector<EnvironmentMoments>& moments, double lambda) {
    (void)lambda;
    if (moments.empty()) throw EmptyEnvironmentError("pooled_classifier: no environments");
    Matrix gsum(rep.d_phi(), rep.d_phi());
    Matrix bsum(rep.d_phi(), moments.front().dy());
    for (const EnvironmentMoments& m : moments) {
        gsum += gram(rep, m).mat();
        bsum += rep.theta * m.sxy;
    }
    Classifier c;
    c.w = spd_solve(SymMatrix(gsum), bsum, &c.singular_gram);
    return c;
}

double adaptive_lambda(const LinearRepresentation& rep, const EnvironmentMoments& m,
                       double lambda0) {
    const EigDecomp e = sym_eig(gram(rep, m));
    const double denom = lambda0 + e.eigenvalues.back();
    if (denom <= 1e-14)
        throw DegenerateCoefficientError("adaptive_lambda: lambda0 + lambda_min <= 1e-14");
    return 1.0 / denom;
}

PenaltyReport penalty_report(const LinearRepresentation& rep, const Classifier& w,
                             const EnvironmentMoments& m) {
    PenaltyReport r;
    r.risk = risk(rep, w, m);
    r.rho_v1 = penalty_irmv1(rep, w, m);
    r.rho_v2 = penalty_irmv2(rep, w, m);
    const EigDecomp e = sym_eig(gram(rep, m));
    r.lambda_min = e.eigenvalues.back();
    r.lambda_max = e.eigenvalues.front();
    double amax = 0.0, amin = std::numeric_limits<double>::infinity();
    for (double l : e.eigenvalues) {
        amax = std::max(amax, std::abs(l));
        amin = std::min(amin, std::abs(l));
    }
    r.kappa = (amax == 0.0 || amin <= lintol::kCondSingular * amax)
                  ? std::numeric_limits<double>::infinity()
                  : amax / amin;
    return r;
}

}  // namespace irmbench
