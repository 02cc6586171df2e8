#include "irmbench/envgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

namespace irmbench {

namespace {

constexpr uint64_t kTagSem = 0x53454dULL;       // stream tags for seed derivation
constexpr uint64_t kTagUnit = 0x554e4954ULL;
constexpr uint64_t kTagParams = 0x504152ULL;
constexpr uint64_t kTagShuffle = 0x534846ULL;
constexpr uint64_t kTagArjovsky = 0x41524aULL;
constexpr uint64_t kTagRotation = 0x524f54ULL;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> unit_vector(Rng& rng, int d) {
    std::vector<double> v = rng.normal_vec(d);
    const double n = norm2(v);
    for (double& x : v) x /= (n > 0 ? n : 1.0);
    return v;
}

// Small determinant via in-place Gaussian elimination; only used to orient
// rotation matrices.
double det(Matrix a) {
    const int n = a.rows();
    double d = 1.0;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (a(piv, k) == 0.0) return 0.0;
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(a(piv, j), a(k, j));
            d = -d;
        }
        d *= a(k, k);
        for (int i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            for (int j = k; j < n; ++j) a(i, j) -= f * a(k, j);
        }
    }
    return d;
}

}  // namespace

void validate_data(const EnvironmentData& d) {
    if (d.n() < 1) throw EmptyEnvironmentError("environment data: n < 1");
    if (d.y.rows() != d.x.rows()) throw ShapeError("environment data: x/y row mismatch");
    if (!d.x.all_finite() || !d.y.all_finite())
        throw InvalidMatrixError("environment data: non-finite entry");
    if (d.task == Task::binary_pm1) {
        for (double v : d.y.data())
            if (v != 1.0 && v != -1.0)
                throw SpecError("binary_pm1 data: label not in {-1,+1}");
    } else if (d.task == Task::binary_onehot) {
        for (int i = 0; i < d.y.rows(); ++i) {
            double sum = 0.0;
            for (int j = 0; j < d.y.cols(); ++j) {
                const double v = d.y(i, j);
                if (v != 0.0 && v != 1.0) throw SpecError("one-hot data: entry not in {0,1}");
                sum += v;
            }
            if (sum != 1.0) throw SpecError("one-hot data: row does not sum to 1");
        }
    }
    for (int idx : d.spurious_indices)
        if (idx < 0 || idx >= d.d_x()) throw SpecError("spurious index out of range");
}

void validate_spec(const SemSpec& spec) {
    if (spec.d_c < 1 || spec.d_e < 1) throw SpecError("spec: d_c and d_e must be positive");
    if (spec.d < spec.d_c + spec.d_e) throw SpecError("spec: d < d_c + d_e");
    if (spec.s.rows() != spec.d || spec.s.cols() != spec.d_c + spec.d_e)
        throw SpecError("spec: S shape mismatch");
    if (static_cast<int>(spec.mu_c.size()) != spec.d_c) throw SpecError("spec: mu_c size");
    if (spec.environments.empty()) throw SpecError("spec: no environments");
    for (const SemEnvironment& e : spec.environments) {
        if (static_cast<int>(e.mu_e.size()) != spec.d_e) throw SpecError("spec: mu_e size");
        if (!(e.sigma_e > 0.0)) throw SpecError("spec: sigma_e must be > 0");
    }
    if (!(spec.sigma_c > 0.0)) throw SpecError("spec: sigma_c must be > 0");
    if (!(spec.eta >= 0.0 && spec.eta <= 1.0)) throw SpecError("spec: eta outside [0,1]");

    // Left-invertibility: singular values of S from the spectrum of S^T S.
    const EigDecomp e = sym_eig(SymMatrix(tmul(spec.s, spec.s)));
    const double smax = std::sqrt(std::max(e.eigenvalues.front(), 0.0));
    const double smin = std::sqrt(std::max(e.eigenvalues.back(), 0.0));
    if (!(smin > 1e-10 * smax)) throw SpecError("spec: S is not left-invertible");
}

SemSpec default_sem_spec() {
    SemSpec spec;
    spec.d_c = 3;
    spec.d_e = 3;
    spec.d = 6;
    spec.s = Matrix::identity(6);
    spec.sigma_c = 1.0;
    spec.eta = 0.5;
    Rng rng(mix_seed({fnv1a64("default_sem_spec")}));
    spec.mu_c = rng.normal_vec(spec.d_c);
    const double sigmas[] = {0.5, 1.0, 1.5, 2.0};
    for (double s : sigmas) {
        SemEnvironment env;
        env.mu_e = rng.normal_vec(spec.d_e);
        env.sigma_e = s;
        spec.environments.push_back(env);
    }
    return spec;
}

SemSpec duplicated_sem_spec() {
    SemSpec spec = default_sem_spec();
    spec.environments[1] = spec.environments[0];
    return spec;
}

EnvironmentData gen_sem(const SemSpec& spec, int env_index, long n, uint64_t seed) {
    validate_spec(spec);
    if (env_index < 0 || env_index >= spec.n_env()) throw SpecError("gen_sem: bad env index");
    if (n < 1) throw SpecError("gen_sem: n < 1");
    const SemEnvironment& env = spec.environments[env_index];

    Rng rng(mix_seed({seed, kTagSem, static_cast<uint64_t>(env_index)}));
    const int dz = spec.d_c + spec.d_e;

    EnvironmentData out;
    out.task = Task::binary_pm1;
    out.x = Matrix(static_cast<int>(n), spec.d);
    out.y = Matrix(static_cast<int>(n), 1);
    out.latents = Matrix(static_cast<int>(n), dz);
    for (long i = 0; i < n; ++i) {
        const double y = rng.pm1(spec.eta);
        out.y(static_cast<int>(i), 0) = y;
        for (int j = 0; j < spec.d_c; ++j)
            out.latents(static_cast<int>(i), j) = spec.mu_c[j] * y + spec.sigma_c * rng.normal();
        for (int j = 0; j < spec.d_e; ++j)
            out.latents(static_cast<int>(i), spec.d_c + j) =
                env.mu_e[j] * y + env.sigma_e * rng.normal();
        for (int r = 0; r < spec.d; ++r) {
            double s = 0.0;
            for (int j = 0; j < dz; ++j) s += spec.s(r, j) * out.latents(static_cast<int>(i), j);
            out.x(static_cast<int>(i), r) = s;
        }
    }
    return out;
}

EnvironmentMoments sem_population_moments(const SemSpec& spec, int env_index, Task task) {
    validate_spec(spec);
    if (env_index < 0 || env_index >= spec.n_env())
        throw SpecError("sem_population_moments: bad env index");
    const SemEnvironment& env = spec.environments[env_index];
    const int dz = spec.d_c + spec.d_e;

    std::vector<double> mu(dz);
    for (int j = 0; j < spec.d_c; ++j) mu[j] = spec.mu_c[j];
    for (int j = 0; j < spec.d_e; ++j) mu[spec.d_c + j] = env.mu_e[j];

    Matrix zz(dz, dz);
    for (int i = 0; i < dz; ++i) {
        zz(i, i) = (i < spec.d_c) ? spec.sigma_c * spec.sigma_c : env.sigma_e * env.sigma_e;
        for (int j = 0; j < dz; ++j) zz(i, j) += mu[i] * mu[j];
    }

    EnvironmentMoments m;
    m.sxx = SymMatrix(mult(spec.s * zz, spec.s));
    const Matrix smu = spec.s * Matrix::col(mu);
    if (task == Task::binary_pm1) {
        m.sxy = smu;  // E[ZY] = mu since Y^2 = 1
        m.syy = SymMatrix(Matrix{{1.0}});
    } else if (task == Task::binary_onehot) {
        m.sxy = Matrix(spec.d, 2);
        for (int i = 0; i < spec.d; ++i) {
            m.sxy(i, 0) = spec.eta * smu(i, 0);
            m.sxy(i, 1) = -(1.0 - spec.eta) * smu(i, 0);
        }
        m.syy = SymMatrix::diag({spec.eta, 1.0 - spec.eta});
    } else {
        throw SpecError("sem_population_moments: regression task has no SEM closed form");
    }
    m.n = 1;
    return m;
}

LinearRepresentation invariant_projection(const SemSpec& spec, int d_rep) {
    validate_spec(spec);
    if (d_rep < spec.d_c) throw ShapeError("invariant_projection: d_rep < d_c");
    // Minimum-norm left inverse S^+ = (S^T S)^{-1} S^T.
    const Matrix spinv = spd_solve(SymMatrix(tmul(spec.s, spec.s)), spec.s.transpose());
    Matrix proj(d_rep, spec.d_c + spec.d_e);
    for (int i = 0; i < spec.d_c; ++i) proj(i, i) = 1.0;
    return LinearRepresentation{proj * spinv};
}

namespace {

// Parameters drawn once per experiment seed and shared across environments
// and splits of one unit-test problem.
struct UnitTestParams {
    Matrix w_yx;                 // example 1: d_inv x d_inv
    Matrix w_xy;                 // example 1: d_spu x 1
    std::vector<double> mu_a;    // example 2: unit-norm animal direction, d_inv
    std::vector<std::vector<double>> mu_bg_e;   // example 2: per-env background direction
    std::vector<double> mix_plus;               // example 3: class +1 component mean
    std::vector<double> mix_minus;              // example 3: class -1 component mean
    std::vector<std::vector<double>> mu_spu_e;  // example 3: per-env shortcut direction
};

UnitTestParams unit_test_params(const UnitTestConfig& cfg, uint64_t seed) {
    Rng rng(mix_seed({seed, kTagUnit, kTagParams}));
    UnitTestParams p;
    p.w_yx = rng.normal_matrix(cfg.d_inv, cfg.d_inv, 1.0 / std::sqrt(double(cfg.d_inv)));
    p.w_xy = rng.normal_matrix(cfg.d_spu, 1, 1.0 / std::sqrt(double(cfg.d_spu)));
    p.mu_a = unit_vector(rng, cfg.d_inv);
    // Background directions vary per environment under one shared sign
    // pattern: coordinatewise gradient signs then agree across environments
    // while the least-squares classifiers do not.
    std::vector<double> bg_signs(cfg.d_spu);
    for (double& s : bg_signs) s = rng.pm1(0.5);
    for (int e = 0; e < cfg.n_env; ++e) {
        std::vector<double> v = rng.normal_vec(cfg.d_spu);
        for (int j = 0; j < cfg.d_spu; ++j) v[j] = bg_signs[j] * std::abs(v[j]);
        const double nv = norm2(v);
        for (double& x : v) x /= (nv > 0 ? nv : 1.0);
        p.mu_bg_e.push_back(v);
    }
    // Class-conditional mixture means: all-ones for class +1, alternating
    // signs for class -1, so every coordinate marginal is the same symmetric
    // pair and no single coordinate separates the classes.
    p.mix_plus.assign(cfg.d_inv, 1.0);
    p.mix_minus.resize(cfg.d_inv);
    for (int j = 0; j < cfg.d_inv; ++j) p.mix_minus[j] = (j % 2 == 0) ? 1.0 : -1.0;
    for (int e = 0; e < cfg.n_env; ++e) p.mu_spu_e.push_back(unit_vector(rng, cfg.d_spu));
    return p;
}

}  // namespace

EnvironmentData gen_unit_test(int example, const UnitTestConfig& cfg, int env_index,
                              Split split, uint64_t seed) {
    if (example < 1 || example > 3) throw SpecError("gen_unit_test: example must be 1, 2 or 3");
    if (env_index < 0 || env_index >= cfg.n_env) throw SpecError("gen_unit_test: bad env index");
    if (static_cast<int>(cfg.env_scales.size()) < cfg.n_env ||
        static_cast<int>(cfg.env_bg_probs.size()) < cfg.n_env)
        throw SpecError("gen_unit_test: per-env parameter list shorter than n_env");
    const long n = (split == Split::train) ? cfg.n_train : cfg.n_test;
    if (n < 1) throw SpecError("gen_unit_test: n < 1");

    const UnitTestParams params = unit_test_params(cfg, seed);
    const uint64_t env_seed =
        mix_seed({seed, kTagUnit, static_cast<uint64_t>(example),
                  static_cast<uint64_t>(env_index), split == Split::train ? 0ULL : 1ULL});
    Rng rng(env_seed);

    EnvironmentData out;
    out.x = Matrix(static_cast<int>(n), cfg.d_x());
    out.y = Matrix(static_cast<int>(n), 1);
    out.spurious_indices.resize(cfg.d_spu);
    for (int j = 0; j < cfg.d_spu; ++j) out.spurious_indices[j] = cfg.d_inv + j;

    if (example == 1) {
        out.task = Task::regression;
        const double s = cfg.env_scales[env_index];
        std::vector<double> xinv(cfg.d_inv);
        for (long i = 0; i < n; ++i) {
            const int row = static_cast<int>(i);
            for (int j = 0; j < cfg.d_inv; ++j) {
                xinv[j] = s * rng.normal();
                out.x(row, j) = xinv[j];
            }
            double y = 0.0;
            for (int j = 0; j < cfg.d_inv; ++j) {
                double t = s * rng.normal();
                for (int k = 0; k < cfg.d_inv; ++k) t += params.w_yx(j, k) * xinv[k];
                y += t;
            }
            y /= std::sqrt(double(cfg.d_inv));
            out.y(row, 0) = y;
            for (int j = 0; j < cfg.d_spu; ++j)
                out.x(row, cfg.d_inv + j) = params.w_xy(j, 0) * y + rng.normal();
        }
    } else if (example == 2) {
        out.task = Task::binary_pm1;
        const double p_animal = 0.9;
        const double p_bg = cfg.env_bg_probs[env_index];
        const double noise = 0.1;
        // The background factor points along an environment-specific
        // direction; its agreement rate with the label exceeds the animal
        // factor's, so pooled least squares prefers it.
        const std::vector<double>& mu_bg = params.mu_bg_e[env_index];
        for (long i = 0; i < n; ++i) {
            const int row = static_cast<int>(i);
            const double y = rng.pm1(0.5);
            out.y(row, 0) = y;
            const double u = rng.bernoulli(p_animal) ? y : -y;
            const double v = rng.bernoulli(p_bg) ? y : -y;
            for (int j = 0; j < cfg.d_inv; ++j)
                out.x(row, j) = u * params.mu_a[j] + noise * rng.normal();
            for (int j = 0; j < cfg.d_spu; ++j)
                out.x(row, cfg.d_inv + j) = v * mu_bg[j] + noise * rng.normal();
        }
    } else {
        out.task = Task::binary_pm1;
        const double noise = 0.1;
        const std::vector<double>& mu_spu = params.mu_spu_e[env_index];
        for (long i = 0; i < n; ++i) {
            const int row = static_cast<int>(i);
            const double y = rng.pm1(0.5);
            out.y(row, 0) = y;
            const double comp = rng.pm1(0.5);  // mixture component, symmetric
            const std::vector<double>& mean = (y > 0) ? params.mix_plus : params.mix_minus;
            for (int j = 0; j < cfg.d_inv; ++j)
                out.x(row, j) = comp * mean[j] + noise * rng.normal();
            for (int j = 0; j < cfg.d_spu; ++j)
                out.x(row, cfg.d_inv + j) = y * mu_spu[j] + noise * rng.normal();
        }
    }

    if (split == Split::test)
        return shuffle_spurious(out, mix_seed({env_seed, kTagShuffle}));
    return out;
}

Matrix rotation_matrix(int d, uint64_t seed) {
    Rng rng(mix_seed({seed, kTagRotation, static_cast<uint64_t>(d)}));
    const Matrix g = rng.normal_matrix(d, d);
    // Modified Gram-Schmidt; the R-factor diagonal is a norm, hence positive.
    Matrix q(d, d);
    for (int j = 0; j < d; ++j) {
        std::vector<double> v = g.col_vec(j);
        for (int k = 0; k < j; ++k) {
            double proj = 0.0;
            for (int i = 0; i < d; ++i) proj += q(i, k) * v[i];
            for (int i = 0; i < d; ++i) v[i] -= proj * q(i, k);
        }
        const double nv = norm2(v);
        if (nv < 1e-12) throw DegenerateError("rotation_matrix: rank-deficient draw");
        for (int i = 0; i < d; ++i) q(i, j) = v[i] / nv;
    }
    if (det(q) < 0.0)
        for (int i = 0; i < d; ++i) q(i, d - 1) = -q(i, d - 1);
    return q;
}

EnvironmentData scramble(const EnvironmentData& data, uint64_t seed) {
    const Matrix r = rotation_matrix(data.d_x(), seed);
    EnvironmentData out = data;
    out.x = mult(data.x, r);  // row-wise x_i <- R x_i
    out.spurious_indices.clear();
    return out;
}

EnvironmentData shuffle_spurious(const EnvironmentData& data, uint64_t seed) {
    if (data.spurious_indices.empty())
        throw OrderingError("shuffle_spurious: spurious block not addressable (shuffle before scramble)");
    Rng rng(mix_seed({seed, kTagShuffle}));
    const std::vector<int> perm = rng.permutation(static_cast<int>(data.n()));
    EnvironmentData out = data;
    for (long i = 0; i < data.n(); ++i)
        for (int j : data.spurious_indices)
            out.x(static_cast<int>(i), j) = data.x(perm[i], j);
    // Latent rows no longer correspond sample-wise to the spurious block.
    out.latents = Matrix();
    return out;
}

ArjovskyData gen_arjovsky(double c, double sigma, long n, uint64_t seed) {
    if (!(sigma > 0.0)) throw SpecError("gen_arjovsky: sigma must be > 0");
    if (n < 1) throw SpecError("gen_arjovsky: n < 1");
    Rng rng(mix_seed({seed, kTagArjovsky}));

    ArjovskyData out;
    out.data.task = Task::regression;
    out.data.x = Matrix(static_cast<int>(n), 2);
    out.data.y = Matrix(static_cast<int>(n), 1);
    for (long i = 0; i < n; ++i) {
        const int row = static_cast<int>(i);
        const double x1 = sigma * rng.normal();
        const double y = x1 + sigma * rng.normal();
        const double x2 = y + rng.normal();
        out.data.x(row, 0) = x1;
        out.data.x(row, 1) = x2;
        out.data.y(row, 0) = y;
    }
    out.rep.theta = Matrix{{1.0, 0.0}, {0.0, c}};
    return out;
}

MaskedRepresentation apply_masked_representation(const EnvironmentData& data, const SemSpec& spec,
                                                 double epsilon) {
    if (!data.has_latents())
        throw SpecError("apply_masked_representation: data carries no latents");
    if (!(epsilon >= 0.0)) throw SpecError("apply_masked_representation: epsilon < 0");
    validate_spec(spec);
    const int dz = spec.d_c + spec.d_e;
    if (data.latents.cols() != dz)
        throw ShapeError("apply_masked_representation: latent width != d_c + d_e");

    std::vector<double> radius(spec.n_env());
    for (int e = 0; e < spec.n_env(); ++e)
        radius[e] = std::sqrt(epsilon * spec.environments[e].sigma_e *
                              spec.environments[e].sigma_e * spec.d_e);

    MaskedRepresentation out;
    out.data.task = data.task;
    out.data.y = data.y;
    out.data.x = Matrix(static_cast<int>(data.n()), dz);
    out.data.latents = data.latents;
    out.data.spurious_indices.resize(spec.d_e);
    for (int j = 0; j < spec.d_e; ++j) out.data.spurious_indices[j] = spec.d_c + j;

    long masked = 0;
    for (long i = 0; i < data.n(); ++i) {
        const int row = static_cast<int>(i);
        bool in_zone = false;
        for (int e = 0; e < spec.n_env() && !in_zone; ++e) {
            double dp = 0.0, dm = 0.0;
            for (int j = 0; j < spec.d_e; ++j) {
                const double z = data.latents(row, spec.d_c + j);
                const double mu = spec.environments[e].mu_e[j];
                dp += (z - mu) * (z - mu);
                dm += (z + mu) * (z + mu);
            }
            const double r2 = radius[e] * radius[e];
            in_zone = (dp <= r2) || (dm <= r2);
        }
        if (in_zone) ++masked;
        for (int j = 0; j < spec.d_c; ++j) out.data.x(row, j) = data.latents(row, j);
        for (int j = 0; j < spec.d_e; ++j)
            out.data.x(row, spec.d_c + j) = in_zone ? 0.0 : data.latents(row, spec.d_c + j);
    }
    out.mask_frequency = static_cast<double>(masked) / static_cast<double>(data.n());
    return out;
}

std::string dataset_csv(const std::vector<TaggedData>& rows) {
    if (rows.empty()) return "";
    const int d = rows.front().data.d_x();
    std::string csv = "env,split,y";
    for (int j = 0; j < d; ++j) csv += ",x" + std::to_string(j);
    csv += "\n";
    for (const TaggedData& t : rows) {
        if (t.data.y.cols() != 1) throw SpecError("dataset_csv: scalar targets only");
        if (t.data.d_x() != d) throw ShapeError("dataset_csv: mixed input dimensions");
        for (long i = 0; i < t.data.n(); ++i) {
            const int row = static_cast<int>(i);
            csv += t.env + "," + t.split + "," + fmt_double(t.data.y(row, 0));
            for (int j = 0; j < d; ++j) csv += "," + fmt_double(t.data.x(row, j));
            csv += "\n";
        }
    }
    return csv;
}

}  // namespace irmbench
