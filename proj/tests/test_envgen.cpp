#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "irmbench/envgen.hpp"

using namespace irmbench;

namespace {

double mean_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x / v.size();
    return m;
}

// Pooled least-squares regression of y on selected columns; the independent
// oracle for the Example-1 checks.
std::vector<double> ls_fit(const std::vector<const EnvironmentData*>& envs,
                           const std::vector<int>& cols) {
    const int k = static_cast<int>(cols.size());
    Matrix a(k, k);
    Matrix b(k, 1);
    long n = 0;
    for (const EnvironmentData* d : envs) {
        for (long r = 0; r < d->n(); ++r) {
            const int row = static_cast<int>(r);
            for (int i = 0; i < k; ++i) {
                b(i, 0) += d->x(row, cols[i]) * d->y(row, 0);
                for (int j = 0; j < k; ++j) a(i, j) += d->x(row, cols[i]) * d->x(row, cols[j]);
            }
        }
        n += d->n();
    }
    a *= 1.0 / n;
    b *= 1.0 / n;
    const Matrix w = spd_solve(symmetrized(std::move(a)), b);
    return w.col_vec(0);
}

double ls_mse(const EnvironmentData& d, const std::vector<int>& cols,
              const std::vector<double>& w) {
    double acc = 0.0;
    for (long r = 0; r < d.n(); ++r) {
        const int row = static_cast<int>(r);
        double pred = 0.0;
        for (size_t i = 0; i < cols.size(); ++i) pred += w[i] * d.x(row, cols[i]);
        const double e = pred - d.y(row, 0);
        acc += e * e;
    }
    return acc / d.n();
}

}  // namespace

TEST_CASE("gen_sem degenerate noiseless case") {
    SemSpec spec = default_sem_spec();
    spec.eta = 1.0;
    spec.sigma_c = 1e-12;
    for (SemEnvironment& e : spec.environments) e.sigma_e = 1e-12;
    const EnvironmentData d = gen_sem(spec, 0, 50, 5);
    // every row X = S [mu_c; mu_e], Y = 1
    std::vector<double> mu(spec.mu_c);
    mu.insert(mu.end(), spec.environments[0].mu_e.begin(), spec.environments[0].mu_e.end());
    const Matrix expect = spec.s * Matrix::col(mu);
    for (long i = 0; i < d.n(); ++i) {
        CHECK(d.y(static_cast<int>(i), 0) == 1.0);
        for (int j = 0; j < spec.d; ++j)
            CHECK(d.x(static_cast<int>(i), j) == doctest::Approx(expect(j, 0)).epsilon(1e-6));
    }
}

TEST_CASE("gen_sem label balance at eta 0.5") {
    const SemSpec spec = default_sem_spec();
    const long n = 100000;
    const EnvironmentData d = gen_sem(spec, 0, n, 21);
    CHECK(std::abs(mean_of(d.y.col_vec(0))) <= 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("gen_sem cross moment matches [mu_c; mu_e] for S = I") {
    const SemSpec spec = default_sem_spec();  // S = identity
    const long n = 100000;
    const EnvironmentData d = gen_sem(spec, 2, n, 33);
    std::vector<double> mu(spec.mu_c);
    mu.insert(mu.end(), spec.environments[2].mu_e.begin(), spec.environments[2].mu_e.end());
    const double sigma_max = std::max(spec.sigma_c, spec.environments[2].sigma_e);
    const double tol = 5.0 * (1.0 + sigma_max) / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < spec.d; ++j) {
        double exy = 0.0;
        for (long i = 0; i < n; ++i)
            exy += d.x(static_cast<int>(i), j) * d.y(static_cast<int>(i), 0) / n;
        CHECK(std::abs(exy - mu[j]) <= tol);
    }
}

TEST_CASE("gen_sem determinism and latents") {
    const SemSpec spec = default_sem_spec();
    const EnvironmentData a = gen_sem(spec, 1, 200, 9);
    const EnvironmentData b = gen_sem(spec, 1, 200, 9);
    CHECK(a.x.data() == b.x.data());
    CHECK(a.latents.data() == b.latents.data());
    CHECK(a.has_latents());
    CHECK(a.task == Task::binary_pm1);
}

TEST_CASE("invariant_projection selects z_c") {
    SemSpec spec = default_sem_spec();
    const LinearRepresentation phi = invariant_projection(spec, spec.d_c);
    CHECK(phi.d_phi() == spec.d_c);
    // S = I: selects the first d_c coordinates exactly
    for (int i = 0; i < spec.d_c; ++i)
        for (int j = 0; j < spec.d; ++j)
            CHECK(phi.theta(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));

    CHECK_THROWS_AS(invariant_projection(spec, spec.d_c - 1), ShapeError);

    // General left-invertible S: Phi S [z_c; z_e] = [z_c; 0]
    Rng rng(77);
    spec.d = 8;
    spec.s = rng.normal_matrix(8, 6);
    validate_spec(spec);
    const LinearRepresentation phi8 = invariant_projection(spec, spec.d_c + 1);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> z = rng.normal_vec(6);
        const Matrix x = spec.s * Matrix::col(z);
        const Matrix proj = phi8.theta * x;
        for (int i = 0; i < spec.d_c; ++i)
            CHECK(proj(i, 0) == doctest::Approx(z[i]).epsilon(1e-8));
        CHECK(proj(spec.d_c, 0) == doctest::Approx(0.0).epsilon(1e-8));
    }
}

TEST_CASE("invariant projection gives matching per-env classifiers") {
    const SemSpec spec = default_sem_spec();
    const LinearRepresentation phi = invariant_projection(spec, spec.d_c);
    const long n = 100000;
    std::vector<Classifier> ws;
    for (int e = 0; e < 2; ++e) {
        const EnvironmentMoments m = compute_moments(gen_sem(spec, e, n, 55));
        ws.push_back(lse_classifier(phi, m));
    }
    // identical across environments within sampling tolerance
    CHECK((ws[0].w - ws[1].w).max_abs() <= 5.0 * 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("unit test generators: shapes, labels, spurious indices") {
    UnitTestConfig cfg;
    cfg.n_train = 2000;
    cfg.n_test = 1000;
    for (int example = 1; example <= 3; ++example) {
        const EnvironmentData d = gen_unit_test(example, cfg, 0, Split::train, 3);
        CHECK(d.n() == 2000);
        CHECK(d.d_x() == 10);
        CHECK(d.spurious_indices == std::vector<int>{5, 6, 7, 8, 9});
        if (example == 1) {
            CHECK(d.task == Task::regression);
        } else {
            CHECK(d.task == Task::binary_pm1);
            for (double y : d.y.data()) CHECK((y == 1.0 || y == -1.0));
        }
    }
    CHECK_THROWS_AS(gen_unit_test(4, cfg, 0, Split::train, 3), SpecError);
    CHECK_THROWS_AS(gen_unit_test(1, cfg, 3, Split::train, 3), SpecError);
}

TEST_CASE("example 2 label marginal is balanced") {
    UnitTestConfig cfg;
    const long n = cfg.n_train;
    for (int e = 0; e < cfg.n_env; ++e) {
        const EnvironmentData d = gen_unit_test(2, cfg, e, Split::train, 11);
        CHECK(std::abs(mean_of(d.y.col_vec(0))) <= 3.0 / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("example 1: spurious features help in-distribution, hurt after shuffle") {
    UnitTestConfig cfg;
    std::vector<EnvironmentData> train, test;
    for (int e = 0; e < cfg.n_env; ++e) {
        train.push_back(gen_unit_test(1, cfg, e, Split::train, 17));
        test.push_back(gen_unit_test(1, cfg, e, Split::test, 17));
    }
    std::vector<const EnvironmentData*> tp;
    for (const EnvironmentData& d : train) tp.push_back(&d);

    std::vector<int> all_cols(10), inv_cols(5);
    for (int i = 0; i < 10; ++i) all_cols[i] = i;
    for (int i = 0; i < 5; ++i) inv_cols[i] = i;
    const std::vector<double> w_full = ls_fit(tp, all_cols);
    const std::vector<double> w_inv = ls_fit(tp, inv_cols);

    double mse_full_train = 0.0, mse_inv_train = 0.0;
    double mse_full_test = 0.0, mse_inv_test = 0.0;
    for (int e = 0; e < cfg.n_env; ++e) {
        mse_full_train += ls_mse(train[e], all_cols, w_full) / cfg.n_env;
        mse_inv_train += ls_mse(train[e], inv_cols, w_inv) / cfg.n_env;
        mse_full_test += ls_mse(test[e], all_cols, w_full) / cfg.n_env;
        mse_inv_test += ls_mse(test[e], inv_cols, w_inv) / cfg.n_env;
    }
    CHECK(mse_full_train < mse_inv_train);  // pooled fit exploits the spurious block
    CHECK(mse_inv_test < mse_full_test);    // invariant fit wins once it is shuffled
}

TEST_CASE("scramble is a seed-deterministic isometry") {
    UnitTestConfig cfg;
    cfg.n_train = 500;
    const EnvironmentData d = gen_unit_test(2, cfg, 1, Split::train, 23);
    const EnvironmentData s1 = scramble(d, 99);
    const EnvironmentData s2 = scramble(d, 99);
    CHECK(s1.x.data() == s2.x.data());
    CHECK(s1.spurious_indices.empty());
    CHECK(s1.y.data() == d.y.data());

    const Matrix r = rotation_matrix(d.d_x(), 99);
    // R in SO(d): orthonormal columns
    CHECK((tmul(r, r) - Matrix::identity(d.d_x())).max_abs() < 1e-10);
    const Matrix back = s1.x * r;
    CHECK((back - d.x).max_abs() < 1e-10);
    for (long i = 0; i < d.n(); ++i) {
        const double n0 = norm2(d.x.row_vec(static_cast<int>(i)));
        const double n1 = norm2(s1.x.row_vec(static_cast<int>(i)));
        CHECK(std::abs(n0 - n1) < 1e-10);
    }
}

TEST_CASE("shuffle_spurious properties") {
    UnitTestConfig cfg;
    cfg.n_train = 10000;
    const EnvironmentData d = gen_unit_test(1, cfg, 2, Split::train, 29);
    const EnvironmentData s = shuffle_spurious(d, 31);

    // single row is the identity
    EnvironmentData one;
    one.task = d.task;
    one.x = d.x.block(0, 0, 1, d.d_x());
    one.y = d.y.block(0, 0, 1, 1);
    one.spurious_indices = d.spurious_indices;
    const EnvironmentData sone = shuffle_spurious(one, 31);
    CHECK(sone.x.data() == one.x.data());

    // invariant block and labels untouched
    for (long i = 0; i < d.n(); ++i)
        for (int j = 0; j < 5; ++j)
            CHECK(s.x(static_cast<int>(i), j) == d.x(static_cast<int>(i), j));
    CHECK(s.y.data() == d.y.data());

    // marginals preserved per column
    for (int j : d.spurious_indices) {
        std::vector<double> a = d.x.col_vec(j), b = s.x.col_vec(j);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }

    // correlation with y destroyed
    for (int j : d.spurious_indices) {
        double sxy_after = 0.0, sxx = 0.0, syy = 0.0;
        for (long i = 0; i < d.n(); ++i) {
            const int row = static_cast<int>(i);
            sxy_after += s.x(row, j) * s.y(row, 0) / d.n();
            sxx += s.x(row, j) * s.x(row, j) / d.n();
            syy += s.y(row, 0) * s.y(row, 0) / d.n();
        }
        const double corr = sxy_after / std::sqrt(sxx * syy);
        CHECK(std::abs(corr) <= 3.0 / std::sqrt(static_cast<double>(d.n())));
    }

    // ordering: scramble first makes the block unaddressable
    const EnvironmentData scrambled = scramble(d, 7);
    CHECK_THROWS_AS(shuffle_spurious(scrambled, 3), OrderingError);
}

TEST_CASE("gen_arjovsky moments at sigma=1, c=1") {
    const long n = 1000000;
    const ArjovskyData ad = gen_arjovsky(1.0, 1.0, n, 41);
    const EnvironmentMoments m = compute_moments(ad.data);
    const SymMatrix g = gram(ad.rep, m);
    const double tol = 3.0 * 4.0 / std::sqrt(static_cast<double>(n));
    // closed form [[1,1],[1,3]] at sigma = c = 1
    CHECK(std::abs(g(0, 0) - 1.0) <= tol);
    CHECK(std::abs(g(0, 1) - 1.0) <= tol);
    CHECK(std::abs(g(1, 1) - 3.0) <= tol);
    // E[X2 Y] = 2 sigma^2 = 2
    double exy = 0.0;
    for (long i = 0; i < n; ++i)
        exy += ad.data.x(static_cast<int>(i), 1) * ad.data.y(static_cast<int>(i), 0) / n;
    CHECK(std::abs(exy - 2.0) <= tol);
}

TEST_CASE("gen_arjovsky c=0 kills the second representation coordinate") {
    const ArjovskyData ad = gen_arjovsky(0.0, 1.0, 100, 43);
    for (long i = 0; i < 100; ++i) {
        const double z = ad.rep.theta(1, 0) * ad.data.x(static_cast<int>(i), 0) +
                         ad.rep.theta(1, 1) * ad.data.x(static_cast<int>(i), 1);
        CHECK(z == 0.0);
    }
}

TEST_CASE("masked representation limits") {
    const SemSpec spec = default_sem_spec();
    // the widest environment keeps the escape event observable at this n
    const int env = spec.n_env() - 1;
    const EnvironmentData d = gen_sem(spec, env, 100000, 47);

    // huge radius: spurious block zeroed everywhere
    const MaskedRepresentation big = apply_masked_representation(d, spec, 1e6);
    CHECK(big.mask_frequency == doctest::Approx(1.0));
    for (long i = 0; i < big.data.n(); ++i)
        for (int j = spec.d_c; j < spec.d_c + spec.d_e; ++j)
            CHECK(big.data.x(static_cast<int>(i), j) == 0.0);

    // tiny radius: block passes through almost everywhere
    const MaskedRepresentation small = apply_masked_representation(d, spec, 1e-12);
    CHECK(small.mask_frequency <= 0.01);

    // moderate epsilon: strictly between
    const MaskedRepresentation mid = apply_masked_representation(d, spec, 1.0);
    CHECK(mid.mask_frequency > 0.0);
    CHECK(mid.mask_frequency < 1.0);

    EnvironmentData no_latents = d;
    no_latents.latents = Matrix();
    CHECK_THROWS_AS(apply_masked_representation(no_latents, spec, 1.0), SpecError);
}

TEST_CASE("spec validation") {
    SemSpec spec = default_sem_spec();
    CHECK_NOTHROW(validate_spec(spec));
    spec.s = Matrix(6, 6);  // rank 0
    CHECK_THROWS_AS(validate_spec(spec), SpecError);
    spec = default_sem_spec();
    spec.eta = 1.5;
    CHECK_THROWS_AS(validate_spec(spec), SpecError);
    spec = default_sem_spec();
    spec.environments.clear();
    CHECK_THROWS_AS(validate_spec(spec), SpecError);
}

TEST_CASE("dataset csv format") {
    UnitTestConfig cfg;
    cfg.n_train = 3;
    const EnvironmentData d = gen_unit_test(1, cfg, 0, Split::train, 2);
    const std::string csv = dataset_csv({{"E0", "train", d}});
    CHECK(csv.substr(0, 12) == "env,split,y,");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
    CHECK(csv.find("x9") != std::string::npos);
    CHECK(csv.find("E0,train,") != std::string::npos);
}
