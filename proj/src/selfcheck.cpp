#include <cmath>
#include <cstdio>
#include <cstring>

#include "irmbench/bench.hpp"

namespace irmbench {

namespace {


std::string fmt_sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Harness {
    std::vector<CheckResult> results;

    void check(const std::string& name, bool pass, const std::string& detail = "") {
        results.push_back({name, pass, detail});
    }
};

Matrix random_symmetric(Rng& rng, int d) {
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = 2.0 * rng.uniform() - 1.0;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

EnvironmentMoments random_moments(Rng& rng, int dx, int dy) {
    const int n = dx + dy + 6;
    EnvironmentData d;
    d.task = Task::regression;
    d.x = rng.normal_matrix(n, dx);
    d.y = rng.normal_matrix(n, dy);
    return compute_moments(d);
}

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-12);
}

void check_eig_invariants(Harness& h) {
    Rng rng(mix_seed({fnv1a64("selfcheck_eig")}));
    double worst_rec = 0.0, worst_orth = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const int d = 1 + t % 8;
        const Matrix a = random_symmetric(rng, d);
        const EigDecomp e = sym_eig(SymMatrix(a));
        Matrix recon(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int k = 0; k < d; ++k)
                    s += e.eigenvectors(i, k) * e.eigenvalues[k] * e.eigenvectors(j, k);
                recon(i, j) = s;
            }
        const double scale = std::max(a.max_abs(), 1e-12);
        worst_rec = std::max(worst_rec, (recon - a).max_abs() / scale);
        worst_orth = std::max(
            worst_orth, (tmul(e.eigenvectors, e.eigenvectors) - Matrix::identity(d)).max_abs());
    }
    h.check("eig_reconstruction", worst_rec <= lintol::kEigReconstruct,
            "worst " + fmt_sci(worst_rec));
    h.check("eig_orthonormality", worst_orth <= lintol::kOrthonormal,
            "worst " + fmt_sci(worst_orth));
}

void check_spd_solve(Harness& h) {
    Rng rng(mix_seed({fnv1a64("selfcheck_spd")}));
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const int d = 2 + t % 7;
        const Matrix q = rotation_matrix(d, rng.bits());
        Matrix a(d, d);
        for (int i = 0; i < d; ++i) {
            // log-uniform eigenvalues in [1e-3, 1e3]: kappa <= 1e6
            const double l = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) a(r, c) += q(r, i) * l * q(c, i);
        }
        const Matrix x = rng.normal_matrix(d, 1);
        const Matrix b = symmetrized(a).mat() * x;
        const Matrix got = spd_solve(symmetrized(a), b);
        worst = std::max(worst, (got - x).frobenius_norm() /
                                    std::max(x.frobenius_norm(), 1e-12));
    }
    h.check("spd_solve_recovery", worst <= 1e-8, "worst " + fmt_sci(worst));
}

void check_condition_scaling(Harness& h) {
    Rng rng(mix_seed({fnv1a64("selfcheck_cond")}));
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const int d = 2 + t % 6;
        const Matrix a = random_symmetric(rng, d);
        const double c = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
        double k1, k2;
        try {
            k1 = condition_number(SymMatrix(a));
            k2 = condition_number(SymMatrix(a * c));
        } catch (const DegenerateError&) {
            continue;
        }
        if (std::isinf(k1) && std::isinf(k2)) continue;
        worst = std::max(worst, rel_err(k2, k1));
    }
    h.check("condition_scale_invariance", worst <= 1e-9, "worst " + fmt_sci(worst));
}

void check_lemma1(Harness& h) {
    Rng rng(mix_seed({fnv1a64("selfcheck_lemma1")}));
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int dx = 1 + t % 6;
        const int dy = 1 + t % 2;
        const int dphi = 1 + t % dx;
        const EnvironmentMoments m = random_moments(rng, dx, dy);
        const LinearRepresentation rep{rng.normal_matrix(dphi, dx)};
        const Classifier w{rng.normal_matrix(dphi, dy)};
        const Classifier we = lse_classifier(rep, m);
        const double gap = risk(rep, w, m) - risk(rep, we, m);
        const double rho = penalty_irmv2(rep, w, m);
        worst = std::max(worst, std::abs(gap - rho) / std::max(std::abs(rho), 1e-12));
    }
    h.check("lemma1_risk_gap", worst <= 1e-9, "worst " + fmt_sci(worst));
}

void check_eq8(Harness& h) {
    Rng rng(mix_seed({fnv1a64("selfcheck_eq8")}));
    double worst = 0.0;
    int done = 0;
    while (done < 100) {
        const int dx = 2 + done % 5;
        const int dphi = 1 + done % dx;
        const EnvironmentMoments m = random_moments(rng, dx, 1);
        const LinearRepresentation rep{rng.normal_matrix(dphi, dx)};
        const SymMatrix g = gram(rep, m);
        double kappa;
        try {
            kappa = condition_number(g);
        } catch (const DegenerateError&) {
            continue;
        }
        if (kappa >= 1e8) continue;
        const Classifier w{rng.normal_matrix(dphi, 1)};
        const Classifier we = lse_classifier(rep, m);
        const Matrix gu = g.mat() * (w.w - we.w);
        const double direct = 4.0 * gu.frobenius_norm() * gu.frobenius_norm();
        worst = std::max(worst, rel_err(penalty_irmv1(rep, w, m), direct));
        ++done;
    }
    h.check("eq8_gradient_identity", worst <= 1e-9, "worst " + fmt_sci(worst));
}

void check_lemma3(Harness& h) {
    Rng rng(mix_seed({fnv1a64("selfcheck_lemma3")}));
    double worst_violation = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const int dx = 1 + t % 6;
        const int dphi = 1 + t % std::min(dx, 4);
        const EnvironmentMoments m = random_moments(rng, dx, 1);
        const LinearRepresentation rep{rng.normal_matrix(dphi, dx)};
        const Classifier w{rng.normal_matrix(dphi, 1)};
        const PenaltyReport r = penalty_report(rep, w, m);
        const double tol = 1e-8 * (1.0 + r.rho_v2);
        // rho_v1 includes the gradient factor 4, so the eigenvalue sandwich
        // reads 4 l_min rho_v2 <= rho_v1 <= 4 l_max rho_v2.
        worst_violation =
            std::max(worst_violation, 4.0 * r.lambda_min * r.rho_v2 - tol - r.rho_v1);
        worst_violation =
            std::max(worst_violation, r.rho_v1 - (4.0 * r.lambda_max * r.rho_v2 + tol));
    }
    h.check("lemma3_sandwich", worst_violation <= 0.0,
            "worst violation " + fmt_sci(worst_violation));
}

// Steepest descent with exact line search on the pooled risk; independent of
// the eigen-based solve path.
Matrix pooled_risk_minimizer(const LinearRepresentation& rep,
                             const std::vector<EnvironmentMoments>& ms) {
    Matrix a(rep.d_phi(), rep.d_phi());
    Matrix b(rep.d_phi(), ms.front().dy());
    for (const EnvironmentMoments& m : ms) {
        a += gram(rep, m).mat();
        b += rep.theta * m.sxy;
    }
    Matrix w(rep.d_phi(), ms.front().dy());
    for (int it = 0; it < 200000; ++it) {
        const Matrix g = a * w - b;  // (1/2) gradient
        const double gn = g.frobenius_norm();
        if (gn <= 1e-12 * (1.0 + b.frobenius_norm())) break;
        const Matrix ag = a * g;
        const double denom = frob_inner(g, ag);
        if (denom <= 0.0) break;
        w -= g * (gn * gn / denom);
    }
    return w;
}

void check_lemma2(Harness& h) {
    Rng rng(mix_seed({fnv1a64("selfcheck_lemma2")}));
    double worst = 0.0;
    bool bitwise = true;
    for (int t = 0; t < 20; ++t) {
        const int dx = 2 + t % 5;
        const int dphi = 1 + t % dx;
        const int ne = 1 + t % 4;
        std::vector<EnvironmentMoments> ms;
        for (int e = 0; e < ne; ++e) ms.push_back(random_moments(rng, dx, 1));
        const LinearRepresentation rep{rng.normal_matrix(dphi, dx)};
        const Classifier pooled = pooled_classifier(rep, ms, 1.0);
        const Matrix direct = pooled_risk_minimizer(rep, ms);
        worst = std::max(worst, (pooled.w - direct).max_abs() /
                                    (1.0 + direct.max_abs()));
        const Classifier p0 = pooled_classifier(rep, ms, 0.0);
        const Classifier p100 = pooled_classifier(rep, ms, 100.0);
        bitwise = bitwise &&
                  std::memcmp(pooled.w.data().data(), p0.w.data().data(),
                              pooled.w.data().size() * sizeof(double)) == 0 &&
                  std::memcmp(pooled.w.data().data(), p100.w.data().data(),
                              pooled.w.data().size() * sizeof(double)) == 0;
    }
    h.check("lemma2_pooled_vs_descent", worst <= 1e-6, "worst " + fmt_sci(worst));
    h.check("lemma2_lambda_independent", bitwise);
}

void check_risk_nonneg(Harness& h) {
    Rng rng(mix_seed({fnv1a64("selfcheck_risk")}));
    double worst = 0.0;
    for (int t = 0; t < 300; ++t) {
        const int dx = 1 + t % 6;
        const EnvironmentMoments m = random_moments(rng, dx, 1);
        const int dphi = 1 + t % dx;
        const LinearRepresentation rep{rng.normal_matrix(dphi, dx)};
        const Classifier w{rng.normal_matrix(dphi, 1)};
        worst = std::min(worst, risk(rep, w, m));
    }
    h.check("risk_nonnegative", worst >= -1e-10, "worst " + fmt_sci(worst));
}

void check_generator_determinism(Harness& h) {
    UnitTestConfig cfg;
    cfg.n_train = 500;
    cfg.n_test = 200;
    bool same = true;
    for (int example = 1; example <= 3; ++example) {
        const EnvironmentData a = gen_unit_test(example, cfg, 1, Split::train, 42);
        const EnvironmentData b = gen_unit_test(example, cfg, 1, Split::train, 42);
        same = same && a.x.data() == b.x.data() && a.y.data() == b.y.data();
    }
    const SemSpec spec = default_sem_spec();
    const EnvironmentData s1 = gen_sem(spec, 2, 500, 7);
    const EnvironmentData s2 = gen_sem(spec, 2, 500, 7);
    same = same && s1.x.data() == s2.x.data() && s1.latents.data() == s2.latents.data();
    h.check("generator_determinism", same);
}

void check_scramble_shuffle(Harness& h) {
    UnitTestConfig cfg;
    cfg.n_train = 400;
    const EnvironmentData d = gen_unit_test(1, cfg, 0, Split::train, 3);
    const EnvironmentData s = scramble(d, 99);
    double worst_norm = 0.0;
    for (long i = 0; i < d.n(); ++i)
        worst_norm = std::max(worst_norm, std::abs(norm2(d.x.row_vec(static_cast<int>(i))) -
                                                   norm2(s.x.row_vec(static_cast<int>(i)))));
    const Matrix r = rotation_matrix(d.d_x(), 99);
    const Matrix back = s.x * r;  // (x R^T) R = x
    h.check("scramble_isometry", worst_norm <= 1e-10, "worst " + fmt_sci(worst_norm));
    h.check("scramble_inverse", (back - d.x).max_abs() <= 1e-10);

    const EnvironmentData sh = shuffle_spurious(d, 5);
    bool multiset_ok = true;
    for (int j : d.spurious_indices) {
        std::vector<double> a = d.x.col_vec(j), b = sh.x.col_vec(j);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        multiset_ok = multiset_ok && a == b;
    }
    h.check("shuffle_preserves_marginals", multiset_ok);
}

void check_moment_consistency(Harness& h) {
    const SemSpec spec = default_sem_spec();
    const long n = 100000;
    const EnvironmentData data = gen_sem(spec, 1, n, 12345);
    const EnvironmentMoments emp = compute_moments(data);
    const EnvironmentMoments pop = sem_population_moments(spec, 1);
    // 5x standard error, entrywise; the standard error of E[x_i x_j] is
    // estimated from the sample fourth moments.
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < spec.d; ++i)
        for (int j = 0; j < spec.d; ++j) {
            double var = 0.0;
            for (long r = 0; r < n; ++r) {
                const double p = data.x(static_cast<int>(r), i) * data.x(static_cast<int>(r), j);
                const double dlt = p - emp.sxx(i, j);
                var += dlt * dlt / static_cast<double>(n - 1);
            }
            const double se = std::sqrt(var / static_cast<double>(n));
            const double err = std::abs(emp.sxx(i, j) - pop.sxx(i, j));
            worst = std::max(worst, err / std::max(se, 1e-12));
            ok = ok && err <= 5.0 * se;
        }
    h.check("sem_moment_consistency", ok, "worst err/se " + fmt_sci(worst));
}

void check_invariant_projection(Harness& h) {
    const SemSpec spec = default_sem_spec();
    const LinearRepresentation phi = invariant_projection(spec, spec.d_c);
    Rng rng(mix_seed({fnv1a64("selfcheck_proj")}));
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::vector<double> zc = rng.normal_vec(spec.d_c);
        const std::vector<double> ze = rng.normal_vec(spec.d_e);
        std::vector<double> z(zc);
        z.insert(z.end(), ze.begin(), ze.end());
        const Matrix x = spec.s * Matrix::col(z);
        const Matrix proj = phi.theta * x;
        for (int i = 0; i < spec.d_c; ++i)
            worst = std::max(worst, std::abs(proj(i, 0) - zc[i]));
    }
    h.check("invariant_projection_recovers_zc", worst <= 1e-9,
            "worst " + fmt_sci(worst));
}

}  // namespace

std::vector<CheckResult> selfcheck() {
    Harness h;
    check_eig_invariants(h);
    check_spd_solve(h);
    check_condition_scaling(h);
    check_lemma1(h);
    check_eq8(h);
    check_lemma3(h);
    check_lemma2(h);
    check_risk_nonneg(h);
    check_generator_determinism(h);
    check_scramble_shuffle(h);
    check_moment_consistency(h);
    check_invariant_projection(h);
    return h.results;
}

}  // namespace irmbench
