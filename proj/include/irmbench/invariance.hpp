#pragma once

#include <vector>

#include "irmbench/linmath.hpp"
#include "irmbench/matrix.hpp"

namespace irmbench {

struct EnvironmentData;  // envgen.hpp

// Sufficient statistics of one environment: second moments of inputs and
// targets plus their cross moment, each averaged over n samples. Every risk
// and penalty in this module is a function of these alone, so a training
// step costs O(d^3) regardless of sample count.
struct EnvironmentMoments {
    SymMatrix sxx;  // d_x x d_x, E[x x^T]
    Matrix sxy;     // d_x x d_y, E[x y^T]
    SymMatrix syy;  // d_y x d_y, E[y y^T]
    long n = 0;

    int dx() const { return sxx.dim(); }
    int dy() const { return syy.dim(); }
};

// Validates PSD-ness of sxx, syy and of the stacked block
// [[sxx, sxy], [sxy^T, syy]] (Cauchy-Schwarz consistency), n >= 1.
// Throws InvalidMatrixError / EmptyEnvironmentError.
void validate_moments(const EnvironmentMoments& m);

// Trainable linear representation phi(x) = theta * x.
struct LinearRepresentation {
    Matrix theta;  // d_phi x d_x

    int d_phi() const { return theta.rows(); }
    int d_x() const { return theta.cols(); }
};

struct Classifier {
    Matrix w;  // d_phi x d_y
    bool singular_gram = false;
};

// Sample moments (divide by n). Throws EmptyEnvironmentError on n = 0.
EnvironmentMoments compute_moments(const EnvironmentData& data);

// Environment Gram of the represented features: theta * sxx * theta^T.
SymMatrix gram(const LinearRepresentation& rep, const EnvironmentMoments& m);

// Per-environment least-squares classifier w_e = G_e^+ (theta sxy).
// singular_gram is set when the Gram needed eigenvalue truncation, in which
// case this is the minimum-norm least-squares classifier.
Classifier lse_classifier(const LinearRepresentation& rep, const EnvironmentMoments& m);

// Squared-loss risk of the predictor w^T theta x:
//   tr(w^T G w) - 2 tr(w^T theta sxy) + tr(syy).
double risk(const LinearRepresentation& rep, const Classifier& w, const EnvironmentMoments& m);

// Gram-weighted squared distance to the per-environment optimum,
//   sum_cols (w - w_e)^T G_e (w - w_e),
// computed as a quadratic form; no matrix square root is formed. Equals the
// exact risk sub-optimality gap at these moments.
double penalty_irmv2(const LinearRepresentation& rep, const Classifier& w,
                     const EnvironmentMoments& m);

// Squared risk-gradient penalty 4 ||G_e w - theta sxy||_F^2; the gradient
// form stays defined for singular Grams.
double penalty_irmv1(const LinearRepresentation& rep, const Classifier& w,
                     const EnvironmentMoments& m);

// Closed-form minimizer of the pooled penalized objective,
//   (sum_e G_e)^+ (sum_e theta sxy_e).
// The penalty coefficient cancels, so `lambda` does not enter the formula;
// the parameter is kept to mirror the objective being minimized.
Classifier pooled_classifier(const LinearRepresentation& rep,
                             const std::vector<EnvironmentMoments>& moments, double lambda = 0.0);

// Penalty-coefficient rule 1 / (lambda0 + lambda_min(G_e)).
// Throws DegenerateCoefficientError when the denominator is <= 1e-14.
double adaptive_lambda(const LinearRepresentation& rep, const EnvironmentMoments& m,
                       double lambda0);

// One environment summarized: risk, both penalties, Gram spectrum extremes.
struct PenaltyReport {
    double risk = 0.0;
    double rho_v1 = 0.0;
    double rho_v2 = 0.0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double kappa = 0.0;
};

PenaltyReport penalty_report(const LinearRepresentation& rep, const Classifier& w,
                             const EnvironmentMoments& m);

}  // namespace irmbench
