#include "irmbench/diagnostics.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace irmbench {

NondegeneracyReport check_nondegeneracy(const SemSpec& spec) {
    validate_spec(spec);
    const int ne = spec.n_env();
    if (ne <= spec.d_e)
        throw PreconditionError("check_nondegeneracy: need more environments than d_e");

    NondegeneracyReport report;
    report.envs.resize(ne);
    bool all_ok = true;
    for (int e = 0; e < ne; ++e) {
        NondegeneracyEnv& out = report.envs[e];
        // Columns are the other environments' means, in list order.
        Matrix m(spec.d_e, ne - 1);
        int col = 0;
        for (int i = 0; i < ne; ++i) {
            if (i == e) continue;
            for (int r = 0; r < spec.d_e; ++r) m(r, col) = spec.environments[i].mu_e[r];
            ++col;
        }
        const Matrix mu = Matrix::col(spec.environments[e].mu_e);
        // Minimum-norm least squares through the truncated pseudoinverse:
        // alpha = (M^T M)^+ M^T mu.
        const Matrix alpha = spd_solve(SymMatrix(tmul(m, m)), tmul(m, mu));
        out.alpha = alpha.col_vec(0);
        out.alpha_sum = 0.0;
        for (double a : out.alpha) out.alpha_sum += a;
        out.alpha_residual = (m * alpha - mu).frobenius_norm();
        out.sum_ok = std::abs(out.alpha_sum - 1.0) > 1e-8;

        // Gamma_e rank; the 1/(1 - sum alpha) prefactor cannot change the
        // rank, so the numerator is used directly.
        Matrix gamma(spec.d_e, spec.d_e);
        const double se = spec.environments[e].sigma_e;
        for (int r = 0; r < spec.d_e; ++r) {
            gamma(r, r) += se * se;
            for (int c2 = 0; c2 < spec.d_e; ++c2)
                gamma(r, c2) += spec.environments[e].mu_e[r] * spec.environments[e].mu_e[c2];
        }
        col = 0;
        for (int i = 0; i < ne; ++i) {
            if (i == e) continue;
            const double a = out.alpha[col++];
            const double si = spec.environments[i].sigma_e;
            for (int r = 0; r < spec.d_e; ++r) {
                gamma(r, r) -= a * si * si;
                for (int c2 = 0; c2 < spec.d_e; ++c2)
                    gamma(r, c2) -= a * spec.environments[i].mu_e[r] * spec.environments[i].mu_e[c2];
            }
        }
        const EigDecomp eig = sym_eig(SymMatrix(gamma));
        double amax = 0.0;
        for (double l : eig.eigenvalues) amax = std::max(amax, std::abs(l));
        out.gamma_rank = 0;
        for (double l : eig.eigenvalues)
            if (amax > 0.0 && std::abs(l) > 1e-10 * amax) ++out.gamma_rank;
        out.rank_ok = (out.gamma_rank == spec.d_e);
        all_ok = all_ok && out.sum_ok && out.rank_ok;
    }
    report.overall_ok = all_ok;
    return report;
}

Classifier closed_form_beta(const LinearRepresentation& phi, const SemSpec& spec, int env_index) {
    validate_spec(spec);
    if (env_index < 0 || env_index >= spec.n_env())
        throw SpecError("closed_form_beta: bad env index");
    const SemEnvironment& env = spec.environments[env_index];
    const int dz = spec.d_c + spec.d_e;
    if (phi.d_x() != spec.d) throw ShapeError("closed_form_beta: Phi cols != d");

    const Matrix ps = phi.theta * spec.s;  // d_phi x dz
    Matrix ps_scaled = ps;                 // Phi S blockdiag(sigma^2) -> scale columns
    for (int j = 0; j < dz; ++j) {
        const double v = (j < spec.d_c) ? spec.sigma_c * spec.sigma_c : env.sigma_e * env.sigma_e;
        for (int i = 0; i < ps.rows(); ++i) ps_scaled(i, j) = ps(i, j) * v;
    }
    const SymMatrix sigma = symmetrized(mult(ps_scaled, ps));

    const EigDecomp eig = sym_eig(sigma);
    const double lmax = std::max(eig.eigenvalues.front(), 0.0);
    if (!(eig.eigenvalues.back() > 1e-12 * std::max(lmax, 1e-300)))
        throw SingularCovarianceError("closed_form_beta: singular covariance");

    std::vector<double> mu_z(dz);
    for (int j = 0; j < spec.d_c; ++j) mu_z[j] = spec.mu_c[j];
    for (int j = 0; j < spec.d_e; ++j) mu_z[spec.d_c + j] = env.mu_e[j];
    const Matrix mu_bar = ps * Matrix::col(mu_z);

    const Matrix sinv_mu = spd_solve(eig, mu_bar);
    const double quad = frob_inner(mu_bar, sinv_mu);
    const Matrix beta = sinv_mu * (1.0 / (1.0 + quad));

    // Rank-one-update inverse of Sigma + mu mu^T checked against the direct
    // pseudoinverse of the assembled Gram.
    {
        Matrix gram_mat = sigma.mat();
        for (int i = 0; i < gram_mat.rows(); ++i)
            for (int j = 0; j < gram_mat.cols(); ++j)
                gram_mat(i, j) += mu_bar(i, 0) * mu_bar(j, 0);
        const Matrix direct = sym_pinv(SymMatrix(gram_mat));
        Matrix update = spd_solve(eig, Matrix::identity(sigma.dim()));
        for (int i = 0; i < update.rows(); ++i)
            for (int j = 0; j < update.cols(); ++j)
                update(i, j) -= sinv_mu(i, 0) * sinv_mu(j, 0) / (1.0 + quad);
        const double scale = std::max(direct.max_abs(), 1.0);
        if ((direct - update).max_abs() > 1e-9 * scale)
            throw Error("closed_form_beta: rank-one-update inverse check failed");
    }

    Classifier w;
    w.w = Matrix(phi.d_phi(), 2);
    for (int i = 0; i < phi.d_phi(); ++i) {
        w.w(i, 0) = spec.eta * beta(i, 0);
        w.w(i, 1) = -(1.0 - spec.eta) * beta(i, 0);
    }
    return w;
}

ArjovskyGram arjovsky_gram(double c, double sigma) {
    if (!(sigma > 0.0)) throw SpecError("arjovsky_gram: sigma must be > 0");
    const double s2 = sigma * sigma;
    ArjovskyGram out;
    out.gram = SymMatrix(Matrix{{s2, c * s2}, {c * s2, c * c * (2.0 * s2 + 1.0)}});
    const double tr = s2 + c * c * (2.0 * s2 + 1.0);
    const double det = c * c * s2 * (2.0 * s2 + 1.0) - c * c * s2 * s2;
    const double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
    const double lmax = 0.5 * (tr + disc);
    const double lmin = 0.5 * (tr - disc);
    out.kappa = (std::abs(lmin) <= lintol::kCondSingular * std::abs(lmax))
                    ? std::numeric_limits<double>::infinity()
                    : std::abs(lmax) / std::abs(lmin);
    return out;
}

double arjovsky_kappa_alt(double c, double sigma) {
    const double s2 = sigma * sigma;
    if (c == 0.0) return std::numeric_limits<double>::infinity();
    const double inner = s2 / c + c * (2.0 * s2 + 1.0) +
                         std::sqrt(s2 * s2 / (c * c) +
                                   c * c * (2.0 * s2 + 1.0) * (2.0 * s2 + 1.0) - 2.0 * s2);
    return inner * inner / (2.0 * (s2 + 1.0));
}

CounterexampleProfile rosenfeld_kappa_bound(const SemSpec& spec, int env_index, double epsilon,
                                            MaskProbFormula which_p, long n, uint64_t seed) {
    validate_spec(spec);
    if (!(epsilon >= 1.0)) throw PreconditionError("rosenfeld_kappa_bound: epsilon < 1");
    if (env_index < 0 || env_index >= spec.n_env())
        throw SpecError("rosenfeld_kappa_bound: bad env index");
    const SemEnvironment& env = spec.environments[env_index];

    CounterexampleProfile p;
    p.epsilon = epsilon;
    const double expo = std::min(epsilon - 1.0, (epsilon - 1.0) * (epsilon - 1.0)) / 8.0;
    p.p_mask_sec43 = std::exp(-spec.d_e * expo);
    p.p_mask_appB2 = std::exp(-expo);

    double mu_c2 = 0.0;
    for (double v : spec.mu_c) mu_c2 += v * v;
    double mu_e2 = 0.0;
    for (double v : env.mu_e) mu_e2 += v * v;
    const double num = mu_c2 + spec.d_c * spec.sigma_c * spec.sigma_c;
    const double tail = std::sqrt(mu_e2) + std::sqrt(spec.d_e * env.sigma_e * env.sigma_e);
    p.bound_constant = num / ((spec.d_e + spec.d_c) * (num + tail * tail));
    const double p_used = (which_p == MaskProbFormula::sec43) ? p.p_mask_sec43 : p.p_mask_appB2;
    p.kappa_lower_bound = p.bound_constant * (1.0 / p_used - 1.0);

    // Empirical kappa of the masked Gram; batched for a standard error.
    const EnvironmentData data = gen_sem(spec, env_index, n, seed);
    const MaskedRepresentation masked = apply_masked_representation(data, spec, epsilon);
    p.empirical_mask_prob = masked.mask_frequency;
    const EnvironmentMoments m = compute_moments(masked.data);
    const EigDecomp eig = sym_eig(m.sxx);
    double amax = 0.0, amin = std::numeric_limits<double>::infinity();
    for (double l : eig.eigenvalues) {
        amax = std::max(amax, std::abs(l));
        amin = std::min(amin, std::abs(l));
    }
    p.kappa_empirical = (amax == 0.0 || amin <= lintol::kCondSingular * amax)
                            ? std::numeric_limits<double>::infinity()
                            : amax / amin;

    const int nbatch = 10;
    const long per = masked.data.n() / nbatch;
    if (per >= 2) {
        std::vector<double> ks;
        for (int bi = 0; bi < nbatch; ++bi) {
            EnvironmentData part;
            part.task = masked.data.task;
            part.x = masked.data.x.block(static_cast<int>(bi * per), 0, static_cast<int>(per),
                                         masked.data.x.cols());
            part.y = masked.data.y.block(static_cast<int>(bi * per), 0, static_cast<int>(per), 1);
            const EigDecomp be = sym_eig(compute_moments(part).sxx);
            double bmax = 0.0, bmin = std::numeric_limits<double>::infinity();
            for (double l : be.eigenvalues) {
                bmax = std::max(bmax, std::abs(l));
                bmin = std::min(bmin, std::abs(l));
            }
            if (bmin > lintol::kCondSingular * bmax && bmax > 0.0) ks.push_back(bmax / bmin);
        }
        if (ks.size() >= 2) {
            double mean = 0.0;
            for (double k : ks) mean += k / ks.size();
            double var = 0.0;
            for (double k : ks) var += (k - mean) * (k - mean) / (ks.size() - 1);
            p.kappa_stderr = std::sqrt(var / ks.size());
        }
    }
    return p;
}

double theorem1_leakage(const LinearRepresentation& theta, const SemSpec& spec) {
    validate_spec(spec);
    if (theta.d_x() != spec.d) throw ShapeError("theorem1_leakage: theta cols != d");
    const Matrix ab = theta.theta * spec.s;  // d_phi x (d_c + d_e) = [A B]
    const Matrix a = ab.block(0, 0, ab.rows(), spec.d_c);
    const Matrix b = ab.block(0, spec.d_c, ab.rows(), spec.d_e);

    std::vector<EnvironmentMoments> moments;
    for (int e = 0; e < spec.n_env(); ++e)
        moments.push_back(sem_population_moments(spec, e, Task::binary_pm1));
    const Classifier w = pooled_classifier(theta, moments);

    const double bn = tmul(b, w.w).frobenius_norm();
    const double an = tmul(a, w.w).frobenius_norm();
    return bn / std::max(an + bn, 1e-12);
}

PenaltyCurvePoint penalty_curves_at(double c, double sigma) {
    const ArjovskyGram ag = arjovsky_gram(c, sigma);
    const double s2 = sigma * sigma;
    // Population cross moment under phi_c: E[phi(X) Y] = [s^2, 2 c s^2].
    const Matrix b = Matrix::col({s2, 2.0 * c * s2});
    const Matrix wstar = spd_solve(ag.gram, b);
    const Matrix winv = Matrix::col({1.0, 0.0});
    const Matrix u = winv - wstar;
    PenaltyCurvePoint p;
    p.c = c;
    p.distance_sq = u.frobenius_norm() * u.frobenius_norm();
    const Matrix gu = ag.gram.mat() * u;
    p.weighted_sq = frob_inner(u, gu);
    p.gram_sq = gu.frobenius_norm() * gu.frobenius_norm();
    p.kappa = ag.kappa;
    return p;
}

std::string nondegeneracy_json(const NondegeneracyReport& report) {
    nlohmann::json j;
    j["overall_ok"] = report.overall_ok;
    j["environments"] = nlohmann::json::array();
    for (const NondegeneracyEnv& e : report.envs) {
        j["environments"].push_back({{"alpha", e.alpha},
                                     {"alpha_sum", e.alpha_sum},
                                     {"alpha_residual", e.alpha_residual},
                                     {"sum_ok", e.sum_ok},
                                     {"gamma_rank", e.gamma_rank},
                                     {"rank_ok", e.rank_ok}});
    }
    return j.dump(2);
}

std::string counterexample_json(const CounterexampleProfile& p) {
    nlohmann::json j{{"epsilon", p.epsilon},
                     {"p_mask_sec43", p.p_mask_sec43},
                     {"p_mask_appB2", p.p_mask_appB2},
                     {"empirical_mask_prob", p.empirical_mask_prob},
                     {"kappa_empirical", p.kappa_empirical},
                     {"kappa_stderr", p.kappa_stderr},
                     {"bound_constant", p.bound_constant},
                     {"kappa_lower_bound", p.kappa_lower_bound}};
    return j.dump(2);
}

}  // namespace irmbench
