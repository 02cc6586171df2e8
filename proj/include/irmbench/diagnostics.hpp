#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irmbench/envgen.hpp"
#include "irmbench/invariance.hpp"

namespace irmbench {

// Non-degeneracy report for a training environment set. For each
// environment e, alpha is the minimum-norm least-squares expansion of mu_e
// over the remaining environments' means; the set is non-degenerate when
// every alpha sums away from 1 and every Gamma_e has full rank d_e.
struct NondegeneracyEnv {
    std::vector<double> alpha;
    double alpha_sum = 0.0;
    double alpha_residual = 0.0;
    bool sum_ok = false;
    int gamma_rank = 0;
    bool rank_ok = false;
};

struct NondegeneracyReport {
    std::vector<NondegeneracyEnv> envs;
    bool overall_ok = false;
};

// Requires |environments| > d_e (throws PreconditionError otherwise).
// The alpha-sum test uses tolerance 1e-8; Gamma rank counts eigenvalues
// with |l| > 1e-10 * |l|_max.
NondegeneracyReport check_nondegeneracy(const SemSpec& spec);

// Closed-form optimal classifier for one-hot targets on top of Phi:
//   beta = Sigma^-1 mu / (1 + mu^T Sigma^-1 mu),  w = [eta b, -(1-eta) b]
// with Sigma = Phi S blockdiag(sigma_c^2 I, sigma_e^2 I) S^T Phi^T and
// mu = Phi S [mu_c; mu_e]. The rank-one-update inverse of Sigma + mu mu^T is
// verified against a direct inversion to 1e-9. Throws SingularCovarianceError
// when Sigma is numerically singular.
Classifier closed_form_beta(const LinearRepresentation& phi, const SemSpec& spec, int env_index);

// Gram of the two-variable SEM under phi_c = diag(1, c):
//   [[s^2, c s^2], [c s^2, c^2 (2 s^2 + 1)]]
// with kappa from the 2x2 trace/determinant eigenvalues (+infinity when
// singular).
struct ArjovskyGram {
    SymMatrix gram;
    double kappa = 0.0;
};
ArjovskyGram arjovsky_gram(double c, double sigma);

// Alternative closed-form kappa expression with prefactor 1/(2(s^2+1));
// reported alongside the eigenvalue route, which it exceeds by a constant
// factor at c = 1.
double arjovsky_kappa_alt(double c, double sigma);

// Conditioning profile of the masked representation at one epsilon.
// Both published mask-probability formulas are computed:
//   sec43: exp(-d_e min{e-1,(e-1)^2}/8),  appB2: exp(-min{e-1,(e-1)^2}/8).
// The lower bound is C (1/p - 1) with
//   C = (||mu_c||^2 + d_c s_c^2) /
//       ((d_e+d_c)(||mu_c||^2 + d_c s_c^2 + (||mu_e|| + sqrt(d_e s_e^2))^2)).
struct CounterexampleProfile {
    double epsilon = 1.0;
    double p_mask_sec43 = 1.0;
    double p_mask_appB2 = 1.0;
    double empirical_mask_prob = 0.0;
    double kappa_empirical = 1.0;
    double kappa_stderr = 0.0;
    double bound_constant = 0.0;
    double kappa_lower_bound = 0.0;
};

enum class MaskProbFormula { sec43, appB2 };

// Monte-Carlo kappa of the masked-representation Gram (n samples, batched
// standard error) plus the closed-form bound pieces. Throws
// PreconditionError when epsilon < 1.
CounterexampleProfile rosenfeld_kappa_bound(const SemSpec& spec, int env_index, double epsilon,
                                            MaskProbFormula which_p, long n = 100000,
                                            uint64_t seed = 17);

// Spurious-latent share of the effective predictor through Phi S = [A B]:
//   ||B^T w|| / max(||A^T w|| + ||B^T w||, 1e-12)
// where w is the pooled classifier over the spec's population moments.
double theorem1_leakage(const LinearRepresentation& theta, const SemSpec& spec);

// One point of the penalty-vs-c comparison at w_inv = [1, 0] under
// population moments of the two-variable SEM: squared classifier distance,
// the Gram-weighted (risk-gap) form, the Gram-squared form, and kappa.
struct PenaltyCurvePoint {
    double c = 0.0;
    double distance_sq = 0.0;   // ||w_inv - w*||^2
    double weighted_sq = 0.0;   // (w_inv - w*)^T G (w_inv - w*)
    double gram_sq = 0.0;       // ||G (w_inv - w*)||^2
    double kappa = 0.0;
};
PenaltyCurvePoint penalty_curves_at(double c, double sigma);

std::string nondegeneracy_json(const NondegeneracyReport& report);
std::string counterexample_json(const CounterexampleProfile& p);

}  // namespace irmbench
