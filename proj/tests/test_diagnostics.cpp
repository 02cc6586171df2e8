#include <doctest.h>

#include <cmath>

#include "irmbench/diagnostics.hpp"

using namespace irmbench;

namespace {

SemSpec tiny_spec(int d_c, int d_e, const std::vector<std::vector<double>>& mus,
                  const std::vector<double>& sigmas) {
    SemSpec spec;
    spec.d_c = d_c;
    spec.d_e = d_e;
    spec.d = d_c + d_e;
    spec.s = Matrix::identity(spec.d);
    spec.mu_c.assign(d_c, 1.0);
    spec.sigma_c = 1.0;
    spec.eta = 0.5;
    for (size_t i = 0; i < mus.size(); ++i) spec.environments.push_back({mus[i], sigmas[i]});
    return spec;
}

}  // namespace

TEST_CASE("nondegeneracy: hand linear solve") {
    // mu1 = e1, mu2 = e2, mu3 = mu1 + mu2, equal sigma (d_e = 2)
    const SemSpec spec = tiny_spec(1, 2, {{1, 0}, {0, 1}, {1, 1}}, {1, 1, 1});
    const NondegeneracyReport r = check_nondegeneracy(spec);
    REQUIRE(r.envs.size() == 3);
    // env 3: alpha = (1, 1), sum 2 != 1
    CHECK(r.envs[2].alpha[0] == doctest::Approx(1.0));
    CHECK(r.envs[2].alpha[1] == doctest::Approx(1.0));
    CHECK(r.envs[2].alpha_sum == doctest::Approx(2.0));
    CHECK(r.envs[2].sum_ok);
    CHECK(r.envs[2].alpha_residual <= 1e-8);
}

TEST_CASE("nondegeneracy: zero mean environment") {
    const SemSpec spec = tiny_spec(1, 2, {{1, 0}, {0, 1}, {0, 0}}, {1, 1, 1});
    const NondegeneracyReport r = check_nondegeneracy(spec);
    // env 3: alpha = 0, sum 0 != 1; Gamma_3 = sigma^2 I, full rank
    CHECK(r.envs[2].alpha[0] == doctest::Approx(0.0));
    CHECK(r.envs[2].alpha[1] == doctest::Approx(0.0));
    CHECK(r.envs[2].alpha_sum == doctest::Approx(0.0));
    CHECK(r.envs[2].sum_ok);
    CHECK(r.envs[2].gamma_rank == 2);
    CHECK(r.envs[2].rank_ok);
}

TEST_CASE("nondegeneracy: duplicated environment fails") {
    const NondegeneracyReport good = check_nondegeneracy(default_sem_spec());
    CHECK(good.overall_ok);

    const NondegeneracyReport dup = check_nondegeneracy(duplicated_sem_spec());
    CHECK_FALSE(dup.overall_ok);
    // the duplicate is exactly representable with alpha = 1 on its twin
    bool some_sum_one = false;
    for (const NondegeneracyEnv& e : dup.envs)
        some_sum_one = some_sum_one || !e.sum_ok;
    CHECK(some_sum_one);
}

TEST_CASE("nondegeneracy: permutation invariance") {
    SemSpec spec = default_sem_spec();
    const NondegeneracyReport base = check_nondegeneracy(spec);
    SemSpec perm = spec;
    std::swap(perm.environments[0], perm.environments[2]);
    const NondegeneracyReport swapped = check_nondegeneracy(perm);
    CHECK(swapped.overall_ok == base.overall_ok);
    CHECK(swapped.envs[2].alpha_sum == doctest::Approx(base.envs[0].alpha_sum));
    CHECK(swapped.envs[0].alpha_sum == doctest::Approx(base.envs[2].alpha_sum));
    CHECK(swapped.envs[2].gamma_rank == base.envs[0].gamma_rank);
}

TEST_CASE("nondegeneracy: precondition on environment count") {
    const SemSpec spec = tiny_spec(1, 2, {{1, 0}, {0, 1}}, {1, 1});
    CHECK_THROWS_AS(check_nondegeneracy(spec), PreconditionError);
}

TEST_CASE("closed_form_beta scalar reduction") {
    // d_phi = 1 representation picking a single causal coordinate:
    // Sigma = sigma_c^2, mu = m  ->  beta = m / (sigma^2 + m^2)
    SemSpec spec = tiny_spec(1, 1, {{0.0}}, {1.0});
    spec.mu_c = {0.7};
    spec.sigma_c = 1.3;
    Matrix phi(1, 2);
    phi(0, 0) = 1.0;
    const Classifier w = closed_form_beta(LinearRepresentation{phi}, spec, 0);
    const double beta = 0.7 / (1.3 * 1.3 + 0.7 * 0.7);
    CHECK(w.w(0, 0) == doctest::Approx(spec.eta * beta).epsilon(1e-12));
    CHECK(w.w(0, 1) == doctest::Approx(-(1.0 - spec.eta) * beta).epsilon(1e-12));
}

TEST_CASE("closed_form_beta zero mean direction") {
    SemSpec spec = tiny_spec(2, 1, {{0.0}}, {1.0});
    spec.mu_c = {0.0, 0.0};
    Matrix phi(2, 3);
    phi(0, 0) = 1.0;
    phi(1, 1) = 1.0;
    const Classifier w = closed_form_beta(LinearRepresentation{phi}, spec, 0);
    CHECK(w.w.max_abs() <= 1e-15);
}

TEST_CASE("closed_form_beta matches the empirical one-hot LSE") {
    const SemSpec spec = default_sem_spec();
    Rng rng(71);
    const LinearRepresentation phi{rng.normal_matrix(3, spec.d)};
    const int env = 1;
    const Classifier closed = closed_form_beta(phi, spec, env);

    const long n = 50000;
    const EnvironmentData d = gen_sem(spec, env, n, 73);
    EnvironmentData onehot = d;
    onehot.task = Task::binary_onehot;
    onehot.y = Matrix(static_cast<int>(n), 2);
    for (long i = 0; i < n; ++i) {
        const int row = static_cast<int>(i);
        onehot.y(row, d.y(row, 0) > 0 ? 0 : 1) = 1.0;
    }
    const Classifier emp = lse_classifier(phi, compute_moments(onehot));

    // standard error per entry from 10 disjoint batches
    const int nb = 10;
    const long per = n / nb;
    std::vector<Matrix> batch_ws;
    for (int bi = 0; bi < nb; ++bi) {
        EnvironmentData part;
        part.task = Task::binary_onehot;
        part.x = onehot.x.block(static_cast<int>(bi * per), 0, static_cast<int>(per), spec.d);
        part.y = onehot.y.block(static_cast<int>(bi * per), 0, static_cast<int>(per), 2);
        batch_ws.push_back(lse_classifier(phi, compute_moments(part)).w);
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
            double mean = 0.0;
            for (const Matrix& bw : batch_ws) mean += bw(i, j) / nb;
            double var = 0.0;
            for (const Matrix& bw : batch_ws)
                var += (bw(i, j) - mean) * (bw(i, j) - mean) / (nb - 1);
            const double se = std::sqrt(var / nb);
            CHECK(std::abs(emp.w(i, j) - closed.w(i, j)) <= 5.0 * std::max(se, 1e-6));
        }
}

TEST_CASE("arjovsky gram closed form and kappa") {
    const ArjovskyGram g11 = arjovsky_gram(1.0, 1.0);
    CHECK(g11.gram(0, 0) == doctest::Approx(1.0));
    CHECK(g11.gram(0, 1) == doctest::Approx(1.0));
    CHECK(g11.gram(1, 1) == doctest::Approx(3.0));
    CHECK(g11.kappa == doctest::Approx(3.0 + 2.0 * std::sqrt(2.0)).epsilon(1e-12));

    const ArjovskyGram g0 = arjovsky_gram(0.0, 2.0);
    CHECK(g0.gram(0, 0) == doctest::Approx(4.0));
    CHECK(g0.gram(1, 1) == 0.0);
    CHECK(std::isinf(g0.kappa));

    CHECK(arjovsky_gram(1e3, 1.0).kappa > 1e4);
    CHECK(arjovsky_gram(1e-3, 1.0).kappa > 1e4);

    // eigenvalue route agrees with sym_eig
    const EigDecomp eig = sym_eig(g11.gram);
    CHECK(g11.kappa ==
          doctest::Approx(eig.eigenvalues.front() / eig.eigenvalues.back()).epsilon(1e-9));
}

TEST_CASE("arjovsky alternative kappa expression") {
    // the printed expression exceeds the eigenvalue ratio by 2x at sigma=c=1
    CHECK(arjovsky_kappa_alt(1.0, 1.0) ==
          doctest::Approx(6.0 + 4.0 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(arjovsky_kappa_alt(1.0, 1.0) ==
          doctest::Approx(2.0 * arjovsky_gram(1.0, 1.0).kappa).epsilon(1e-12));
    // both diverge at the limits
    CHECK(arjovsky_kappa_alt(1e-6, 1.0) > 1e8);
    CHECK(arjovsky_kappa_alt(1e6, 1.0) > 1e8);
}

TEST_CASE("rosenfeld bound constant and trivial epsilon") {
    // mu_c = 0, sigma_c = 1, mu_e = 0, sigma_e = 1, d_c = d_e = 1:
    // C = 1 / (2 (1 + 1)) = 0.25
    SemSpec spec = tiny_spec(1, 1, {{0.0}, {0.1}}, {1.0, 1.0});
    spec.mu_c = {0.0};
    const CounterexampleProfile p =
        rosenfeld_kappa_bound(spec, 0, 1.0, MaskProbFormula::appB2, 5000, 5);
    CHECK(p.bound_constant == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p.p_mask_sec43 == doctest::Approx(1.0));
    CHECK(p.p_mask_appB2 == doctest::Approx(1.0));
    CHECK(p.kappa_lower_bound == doctest::Approx(0.0));
    CHECK(p.kappa_empirical >= 1.0);
    CHECK(p.empirical_mask_prob > 0.0);
    CHECK(p.empirical_mask_prob < 1.0);

    CHECK_THROWS_AS(rosenfeld_kappa_bound(spec, 0, 0.5, MaskProbFormula::appB2, 100, 1),
                    PreconditionError);
}

TEST_CASE("rosenfeld bound internal consistency") {
    const SemSpec spec = default_sem_spec();
    const int env = spec.n_env() - 1;
    const CounterexampleProfile p =
        rosenfeld_kappa_bound(spec, env, 4.0, MaskProbFormula::appB2, 20000, 9);
    // bound column = C (1/p - 1) with independently recomputed C and p
    double mu_c2 = 0.0;
    for (double v : spec.mu_c) mu_c2 += v * v;
    double mu_e2 = 0.0;
    for (double v : spec.environments[env].mu_e) mu_e2 += v * v;
    const double num = mu_c2 + spec.d_c;
    const double tail =
        std::sqrt(mu_e2) + std::sqrt(spec.d_e) * spec.environments[env].sigma_e;
    const double c = num / ((spec.d_c + spec.d_e) * (num + tail * tail));
    const double pb = std::exp(-std::min(3.0, 9.0) / 8.0);
    CHECK(p.kappa_lower_bound == doctest::Approx(c * (1.0 / pb - 1.0)).epsilon(1e-12));
    CHECK(p.kappa_empirical >= p.kappa_lower_bound - 3.0 * p.kappa_stderr);
    // sec43 formula carries the d_e factor in the exponent
    CHECK(p.p_mask_sec43 == doctest::Approx(std::pow(p.p_mask_appB2, spec.d_e)).epsilon(1e-12));
}

TEST_CASE("theorem1 leakage extremes") {
    const SemSpec spec = default_sem_spec();
    const LinearRepresentation inv = invariant_projection(spec, spec.d_c);
    CHECK(theorem1_leakage(inv, spec) <= 1e-10);

    // selector of the spurious latents only: A = 0
    Matrix spu(spec.d_e, spec.d);
    for (int i = 0; i < spec.d_e; ++i) spu(i, spec.d_c + i) = 1.0;
    CHECK(theorem1_leakage(LinearRepresentation{spu}, spec) >= 1.0 - 1e-10);
}

TEST_CASE("figure-1 qualitative facts") {
    // (i) discontinuity at c = 0 of the plain distance curve
    const PenaltyCurvePoint at0 = penalty_curves_at(0.0, 1.0);
    const PenaltyCurvePoint at_eps = penalty_curves_at(1e-6, 1.0);
    CHECK(at0.distance_sq <= 1e-12);
    CHECK(at_eps.distance_sq > 10.0 * at0.distance_sq);
    CHECK(at_eps.distance_sq > 1e-2);

    // (ii) the distance curve is smaller at c = 1e3 than at c = 1
    CHECK(penalty_curves_at(1e3, 1.0).distance_sq < penalty_curves_at(1.0, 1.0).distance_sq);

    // (iii) the risk-gap curve is finite and continuous on a log grid
    std::vector<double> grid;
    for (int i = 0; i <= 72; ++i) grid.push_back(std::pow(10.0, -6.0 + 0.125 * i));
    std::vector<double> vals;
    double lo = 1e300, hi = -1e300;
    for (double c : grid) {
        const PenaltyCurvePoint p = penalty_curves_at(c, 1.0);
        REQUIRE(std::isfinite(p.weighted_sq));
        vals.push_back(p.weighted_sq);
        lo = std::min(lo, p.weighted_sq);
        hi = std::max(hi, p.weighted_sq);
    }
    const double range = hi - lo;
    for (size_t i = 1; i < vals.size(); ++i)
        CHECK(std::abs(vals[i] - vals[i - 1]) <= 0.25 * range + 1e-9);
    // the c = 0 endpoint is defined (pseudoinverse), not NaN
    CHECK(std::isfinite(at0.weighted_sq));

    // closed form: the c > 0 curve is the constant sigma^4/(sigma^2+1)
    CHECK(penalty_curves_at(0.3, 1.0).weighted_sq == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(penalty_curves_at(7.0, 1.0).weighted_sq == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("kappa is non-decreasing in epsilon (monte carlo)") {
    const SemSpec spec = default_sem_spec();
    const int env = spec.n_env() - 1;
    std::vector<double> ks;
    for (double eps : {1.0, 2.0, 4.0}) {
        const CounterexampleProfile p =
            rosenfeld_kappa_bound(spec, env, eps, MaskProbFormula::appB2, 50000, 13);
        ks.push_back(p.kappa_empirical);
    }
    CHECK(ks[1] >= ks[0] * 0.5);  // within noise
    CHECK(ks[2] >= ks[1] * 0.5);
    CHECK(ks[2] > ks[0]);  // the trend over the full grid is strict
}

TEST_CASE("report serialization") {
    const NondegeneracyReport r = check_nondegeneracy(default_sem_spec());
    const std::string j = nondegeneracy_json(r);
    CHECK(j.find("\"overall_ok\": true") != std::string::npos);
    const CounterexampleProfile p =
        rosenfeld_kappa_bound(default_sem_spec(), 0, 2.0, MaskProbFormula::appB2, 2000, 3);
    const std::string cj = counterexample_json(p);
    CHECK(cj.find("\"kappa_lower_bound\"") != std::string::npos);
}
