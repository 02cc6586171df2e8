#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irmbench/envgen.hpp"
#include "irmbench/invariance.hpp"

namespace irmbench {

enum class Method { ERM, IRMv1, IRMv1A, IRMv2, IGA, ANDMask, Oracle };
enum class Optimizer { gd, momentum, adamlike };

std::string method_name(Method m);
bool parse_method(const std::string& s, Method* out);

// Full-batch training configuration. All methods train linear maps over
// moment statistics; IRMv1/IRMv1A/IRMv2 train a representation theta
// (d_phi x d_x), the baselines train a joint predictor beta (theta = I).
struct TrainConfig {
    Method method = Method::ERM;
    double lambda = 1.0;       // penalty coefficient
    double lambda0 = 1.0;      // IRMv1A offset in 1/(lambda0 + lambda_min)
    int d_phi = 0;             // 0 = method default (1 for IRMv1/IRMv1A, d_x otherwise)
    int steps = 2000;
    double learning_rate = 1e-2;
    Optimizer optimizer = Optimizer::gd;
    uint64_t seed = 0;
    int grad_check_every = 0;  // >0: finite-difference self-check every k steps
    int warmup_steps = 0;      // penalty disabled for the first steps
    bool halve_on_increase = false;  // gd only: retake the step at half rate
};

struct StepRecord {
    double loss = 0.0;
    std::vector<double> env_risk;
    std::vector<double> env_penalty;
    std::vector<double> env_kappa;
    std::vector<double> env_lambda_min;
};

struct TrainResult {
    LinearRepresentation theta;
    Classifier w;
    std::vector<StepRecord> trace;  // one record per step
    double wall_time_sec = 0.0;
    bool pooled_singular = false;
};

// Loss value, gradient in the trained parameter, and per-environment terms.
struct LossGrad {
    double loss = 0.0;
    Matrix grad;
    std::vector<double> env_risk;
    std::vector<double> env_penalty;
    std::vector<double> env_kappa;
    std::vector<double> env_lambda_min;
    bool pooled_singular = false;
};

// sum_e R_e(w*^T phi) + lambda rho_v2_e(phi, w*) with w* the pooled
// classifier. The gradient holds w* fixed (it exactly minimizes the
// penalized objective, so its sensitivity term vanishes) and differentiates
// the per-environment optima analytically.
LossGrad irmv2_loss_and_grad(const LinearRepresentation& theta,
                             const std::vector<EnvironmentMoments>& moments, double lambda,
                             Classifier* pooled = nullptr);

// sum_e R_e(1^T phi) + lambda_e rho_v1_e(phi, 1) with the classifier fixed
// to all ones. adaptive=false: lambda_e = lambda; adaptive=true: lambda_e =
// 1/(lambda0 + lambda_min(G_e)), treated as a constant within the step.
// lambda_override pins the per-environment coefficients explicitly (used by
// the finite-difference checks, which must differentiate at frozen
// coefficients to match the constant-within-step semantics).
LossGrad irmv1_loss_and_grad(const LinearRepresentation& theta,
                             const std::vector<EnvironmentMoments>& moments, double lambda,
                             bool adaptive, double lambda0,
                             const std::vector<double>* lambda_override = nullptr);

// The adaptive coefficients 1/(lambda0 + lambda_min(G_e)) at this theta.
std::vector<double> irmv1_adaptive_coefficients(const LinearRepresentation& theta,
                                                const std::vector<EnvironmentMoments>& moments,
                                                double lambda0);

// Baselines over the joint predictor beta (d_x x d_y).
// ERM: mean_e R_e.  IGA: mean_e R_e + lambda Var_e(R_e) (population
// variance).  ANDMask: loss is mean_e R_e; grad is the sign-agreement-masked
// mean of the per-environment risk gradients.
LossGrad erm_loss_and_grad(const Matrix& beta, const std::vector<EnvironmentMoments>& moments);
LossGrad iga_loss_and_grad(const Matrix& beta, const std::vector<EnvironmentMoments>& moments,
                           double lambda);
LossGrad andmask_loss_and_direction(const Matrix& beta,
                                    const std::vector<EnvironmentMoments>& moments);

// Loss/gradient for cfg.method at the given parameter (theta for the IRM
// family, beta otherwise). penalty_scale multiplies the penalty coefficient
// (used for warmup).
LossGrad method_loss_and_grad(const TrainConfig& cfg, const Matrix& param,
                              const std::vector<EnvironmentMoments>& moments,
                              double penalty_scale = 1.0);

// Runs cfg.steps optimizer steps from a seeded N(0, 1/d_x) init.
// Deterministic given (cfg, data). Throws DivergedError (with the step
// index) when the loss stops being finite, and Error if an enabled
// finite-difference self-check disagrees with the analytic gradient.
TrainResult train(const TrainConfig& cfg, const std::vector<EnvironmentData>& envs);
TrainResult train_on_moments(const TrainConfig& cfg,
                             const std::vector<EnvironmentMoments>& moments);

// Test metric: mean squared error for regression, classification error for
// binary_pm1 labels (sign(0) resolves to +1).
double evaluate(const LinearRepresentation& theta, const Classifier& w,
                const EnvironmentData& test_env);

// TrainResult as JSON (config echo, final parameters, trace arrays).
std::string train_result_json(const TrainConfig& cfg, const TrainResult& result);

}  // namespace irmbench
