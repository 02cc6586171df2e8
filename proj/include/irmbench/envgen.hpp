#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irmbench/invariance.hpp"
#include "irmbench/matrix.hpp"
#include "irmbench/rng.hpp"

namespace irmbench {

enum class Task { regression, binary_pm1, binary_onehot };

enum class Split { train, test };

// Raw samples for one environment. Generators that know the latent
// coordinates keep them in `latents` (n x (d_c + d_e)) so representation
// diagnostics can address the causal/spurious decomposition directly.
struct EnvironmentData {
    Matrix x;  // n x d_x
    Matrix y;  // n x d_y
    Task task = Task::regression;
    // Input coordinates that carry the spurious block, pre-scramble.
    // Empty once scrambling has destroyed coordinate alignment.
    std::vector<int> spurious_indices;
    Matrix latents;  // empty unless produced by a latent-aware generator

    long n() const { return x.rows(); }
    int d_x() const { return x.cols(); }
    bool has_latents() const { return latents.rows() == x.rows() && latents.cols() > 0; }
};

void validate_data(const EnvironmentData& d);

// Linear-SEM data model: X = S [Z_c; Z_e], Y = +1 w.p. eta else -1,
// Z_c = mu_c Y + N(0, sigma_c^2 I), Z_e = mu_e Y + N(0, sigma_e^2 I).
struct SemEnvironment {
    std::vector<double> mu_e;
    double sigma_e = 1.0;
};

struct SemSpec {
    int d_c = 0;
    int d_e = 0;
    int d = 0;                       // ambient dimension, d >= d_c + d_e
    Matrix s;                        // d x (d_c + d_e), left-invertible
    std::vector<double> mu_c;
    std::vector<SemEnvironment> environments;
    double sigma_c = 1.0;
    double eta = 0.5;

    int n_env() const { return static_cast<int>(environments.size()); }
};

// Throws SpecError unless the dimensions are consistent, sigmas positive,
// eta in [0,1], and S has full column rank (smallest singular value
// > 1e-10 x largest).
void validate_spec(const SemSpec& spec);

// Fixed spec used by the theory suites: d_c = d_e = 3, S = I_6, sigma_c = 1,
// eta = 0.5, four environments with sigma_e in {0.5, 1.0, 1.5, 2.0} and
// mu_c / mu_e drawn once from a fixed seeded stream.
SemSpec default_sem_spec();
// Same spec with environment 0 duplicated (a degenerate environment set).
SemSpec duplicated_sem_spec();

// Samples one environment of the SEM. Deterministic given (spec, env_index,
// n, seed); retains latents. Throws SpecError on invalid inputs.
EnvironmentData gen_sem(const SemSpec& spec, int env_index, long n, uint64_t seed);

// Exact population moments of gen_sem output for one environment.
// Task::binary_pm1 gives scalar targets y in {-1,+1}; Task::binary_onehot
// gives targets [1{y=+1}, 1{y=-1}]. The sample count is a nominal 1.
EnvironmentMoments sem_population_moments(const SemSpec& spec, int env_index,
                                          Task task = Task::binary_pm1);

// The projection [I_{d_c} 0; 0 0] S^+ mapping X to [Z_c; 0] (d_rep rows).
// Throws ShapeError when d_rep < d_c.
LinearRepresentation invariant_projection(const SemSpec& spec, int d_rep);

// Synthetic unit-test problems. Shapes follow (d_inv, d_spu, n_env) with
// per-environment nuisance parameters: env_scales drives the regression
// problem, env_bg_probs the background correlation of the classification
// problem.
struct UnitTestConfig {
    int d_inv = 5;
    int d_spu = 5;
    int n_env = 3;
    long n_train = 10000;
    long n_test = 10000;
    std::vector<double> env_scales = {0.1, 1.5, 2.0};
    std::vector<double> env_bg_probs = {0.95, 0.97, 0.99};

    int d_x() const { return d_inv + d_spu; }
};

// Example 1: regression; targets linear in the invariant block, spurious
// block linear in the target, noise scale varying per environment.
// Example 2: classification; an invariant "animal" factor agrees with the
// label 90% of the time, a spurious "background" factor agrees more strongly
// (rate env_bg_probs) but along an environment-specific direction.
// Example 3: classification; the invariant block is a symmetric two-component
// mixture per class (no linear separation), the spurious block is a linear
// shortcut whose direction changes per environment.
// The test split draws fresh samples and applies shuffle_spurious.
EnvironmentData gen_unit_test(int example, const UnitTestConfig& cfg, int env_index,
                              Split split, uint64_t seed);

// Seed-deterministic rotation in SO(d): QR of a seeded Gaussian matrix with
// the R-factor diagonal made positive; one column flipped if det < 0.
Matrix rotation_matrix(int d, uint64_t seed);

// x <- x R^T for the shared experiment rotation; clears spurious_indices
// since coordinates are no longer aligned. Labels untouched.
EnvironmentData scramble(const EnvironmentData& data, uint64_t seed);

// Permutes the rows of the spurious block (jointly, one permutation),
// breaking its dependence on y while preserving its marginal distribution.
// Must run before scramble; throws OrderingError when the spurious block is
// no longer addressable.
EnvironmentData shuffle_spurious(const EnvironmentData& data, uint64_t seed);

// Two-variable SEM: X1 ~ N(0, s^2), Y = X1 + N(0, s^2), X2 = Y + N(0, 1).
// Returns the data (x = [X1, X2], y = Y, regression) together with the
// representation phi_c = diag(1, c).
struct ArjovskyData {
    EnvironmentData data;
    LinearRepresentation rep;
};
ArjovskyData gen_arjovsky(double c, double sigma, long n, uint64_t seed);

// Masked representation [Z_c; Z_e 1{Z_e not in Z_eps}] where Z_eps is the
// union over environments of radius-sqrt(eps sigma_e^2 d_e) balls centered
// at +-mu_e. Requires latents; returns the output as new data (x lives in
// latent coordinates) plus the empirical mask frequency.
struct MaskedRepresentation {
    EnvironmentData data;
    double mask_frequency = 0.0;
};
MaskedRepresentation apply_masked_representation(const EnvironmentData& data, const SemSpec& spec,
                                                 double epsilon);

// CSV dump, header "env,split,y,x0,...,x{d-1}". Scalar targets only.
struct TaggedData {
    std::string env;
    std::string split;
    EnvironmentData data;
};
std::string dataset_csv(const std::vector<TaggedData>& rows);

}  // namespace irmbench
