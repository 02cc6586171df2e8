#include "irmbench/trainers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace irmbench {

std::string method_name(Method m) {
    switch (m) {
        case Method::ERM: return "ERM";
        case Method::IRMv1: return "IRMv1";
        case Method::IRMv1A: return "IRMv1A";
        case Method::IRMv2: return "IRMv2";
        case Method::IGA: return "IGA";
        case Method::ANDMask: return "ANDMask";
        case Method::Oracle: return "Oracle";
    }
    return "?";
}

bool parse_method(const std::string& s, Method* out) {
    const Method all[] = {Method::ERM,  Method::IRMv1,   Method::IRMv1A, Method::IRMv2,
                          Method::IGA,  Method::ANDMask, Method::Oracle};
    for (Method m : all)
        if (s == method_name(m)) {
            *out = m;
            return true;
        }
    return false;
}

namespace {

double trace_of(const SymMatrix& s) {
    double t = 0.0;
    for (int i = 0; i < s.dim(); ++i) t += s(i, i);
    return t;
}

void spectrum_stats(const EigDecomp& e, double* kappa, double* lmin) {
    *lmin = e.eigenvalues.empty() ? 0.0 : e.eigenvalues.back();
    double amax = 0.0, amin = std::numeric_limits<double>::infinity();
    for (double l : e.eigenvalues) {
        amax = std::max(amax, std::abs(l));
        amin = std::min(amin, std::abs(l));
    }
    *kappa = (amax == 0.0 || amin <= lintol::kCondSingular * amax)
                 ? std::numeric_limits<double>::infinity()
                 : amax / amin;
}

}  // namespace

LossGrad irmv2_loss_and_grad(const LinearRepresentation& theta,
                             const std::vector<EnvironmentMoments>& moments, double lambda,
                             Classifier* pooled) {
    if (moments.empty()) throw EmptyEnvironmentError("irmv2: no environments");
    const int ne = static_cast<int>(moments.size());
    const int dphi = theta.d_phi();
    const int dy = moments.front().dy();

    std::vector<Matrix> txx(ne), b(ne);
    std::vector<SymMatrix> g(ne);
    std::vector<EigDecomp> eig(ne);
    std::vector<Classifier> we(ne);
    Matrix gsum(dphi, dphi), bsum(dphi, dy);
    LossGrad out;
    out.env_kappa.resize(ne);
    out.env_lambda_min.resize(ne);
    for (int e = 0; e < ne; ++e) {
        txx[e] = theta.theta * moments[e].sxx.mat();  // d_phi x d_x
        g[e] = symmetrized(mult(txx[e], theta.theta));
        b[e] = theta.theta * moments[e].sxy;
        eig[e] = sym_eig(g[e]);
        we[e].w = spd_solve(eig[e], b[e], &we[e].singular_gram);
        gsum += g[e].mat();
        bsum += b[e];
        spectrum_stats(eig[e], &out.env_kappa[e], &out.env_lambda_min[e]);
    }

    Classifier wstar;
    wstar.w = spd_solve(SymMatrix(gsum), bsum, &wstar.singular_gram);
    out.pooled_singular = wstar.singular_gram;
    if (pooled) *pooled = wstar;

    out.grad = Matrix(dphi, theta.d_x());
    out.env_risk.resize(ne);
    out.env_penalty.resize(ne);
    for (int e = 0; e < ne; ++e) {
        const Matrix gw = g[e].mat() * wstar.w;
        const double risk_e =
            frob_inner(wstar.w, gw) - 2.0 * frob_inner(wstar.w, b[e]) + trace_of(moments[e].syy);
        const Matrix u = wstar.w - we[e].w;
        const double rho_e = frob_inner(u, g[e].mat() * u);
        out.env_risk[e] = risk_e;
        out.env_penalty[e] = rho_e;
        out.loss += risk_e + lambda * rho_e;

        // d/dTheta of (1+l) R_e(w fixed) - l R_e(w_e), with w = w*:
        //   (1+l)(2 w w^T Theta sxx - 2 w sxy^T) + l (2 w_e sxy^T - 2 w_e w_e^T Theta sxx)
        const Matrix wt_txx = tmul(wstar.w, txx[e]);     // d_y x d_x
        const Matrix wet_txx = tmul(we[e].w, txx[e]);    // d_y x d_x
        const double c1 = 2.0 * (1.0 + lambda);
        const double c2 = 2.0 * lambda;
        for (int i = 0; i < dphi; ++i)
            for (int j = 0; j < theta.d_x(); ++j) {
                double acc = 0.0;
                for (int k = 0; k < dy; ++k) {
                    acc += c1 * (wstar.w(i, k) * wt_txx(k, j) -
                                 wstar.w(i, k) * moments[e].sxy(j, k));
                    acc += c2 * (we[e].w(i, k) * moments[e].sxy(j, k) -
                                 we[e].w(i, k) * wet_txx(k, j));
                }
                out.grad(i, j) += acc;
            }
    }
    return out;
}

std::vector<double> irmv1_adaptive_coefficients(const LinearRepresentation& theta,
                                                const std::vector<EnvironmentMoments>& moments,
                                                double lambda0) {
    std::vector<double> out;
    out.reserve(moments.size());
    for (const EnvironmentMoments& m : moments) out.push_back(adaptive_lambda(theta, m, lambda0));
    return out;
}

LossGrad irmv1_loss_and_grad(const LinearRepresentation& theta,
                             const std::vector<EnvironmentMoments>& moments, double lambda,
                             bool adaptive, double lambda0,
                             const std::vector<double>* lambda_override) {
    if (moments.empty()) throw EmptyEnvironmentError("irmv1: no environments");
    const int ne = static_cast<int>(moments.size());
    const int dphi = theta.d_phi();
    const int dy = moments.front().dy();
    const Matrix ones(dphi, dy, 1.0);

    LossGrad out;
    out.grad = Matrix(dphi, theta.d_x());
    out.env_risk.resize(ne);
    out.env_penalty.resize(ne);
    out.env_kappa.resize(ne);
    out.env_lambda_min.resize(ne);

    for (int e = 0; e < ne; ++e) {
        const Matrix txx = theta.theta * moments[e].sxx.mat();
        const SymMatrix gsym = symmetrized(mult(txx, theta.theta));
        const Matrix& ge = gsym.mat();
        const Matrix b = theta.theta * moments[e].sxy;
        const EigDecomp eig = sym_eig(gsym);
        spectrum_stats(eig, &out.env_kappa[e], &out.env_lambda_min[e]);

        double lam_e = lambda;
        if (lambda_override) {
            lam_e = lambda_override->at(e);
        } else if (adaptive) {
            const double denom = lambda0 + eig.eigenvalues.back();
            if (denom <= 1e-14)
                throw DegenerateCoefficientError("irmv1 adaptive: lambda0 + lambda_min <= 1e-14");
            lam_e = 1.0 / denom;  // held constant within the step
        }

        const Matrix gw = ge * ones;
        const double risk_e =
            frob_inner(ones, gw) - 2.0 * frob_inner(ones, b) + trace_of(moments[e].syy);
        const Matrix gvec = gw - b;  // (1/2) grad_w risk
        const double gn = gvec.frobenius_norm();
        const double rho_e = 4.0 * gn * gn;
        out.env_risk[e] = risk_e;
        out.env_penalty[e] = rho_e;
        out.loss += risk_e + lam_e * rho_e;

        // d/dTheta R_e(1^T phi) = 2 (1 1^T) Theta sxx - 2 (1) sxy^T
        // d/dTheta rho_v1 = 8 [ gvec 1^T Theta sxx + 1 gvec^T Theta sxx - gvec sxy^T ]
        const Matrix ones_txx = tmul(ones, txx);  // d_y x d_x
        const Matrix gvec_txx = tmul(gvec, txx);  // d_y x d_x
        for (int i = 0; i < dphi; ++i)
            for (int j = 0; j < theta.d_x(); ++j) {
                double acc = 0.0;
                for (int k = 0; k < dy; ++k) {
                    acc += 2.0 * (ones(i, k) * ones_txx(k, j) - ones(i, k) * moments[e].sxy(j, k));
                    acc += 8.0 * lam_e *
                           (gvec(i, k) * ones_txx(k, j) + ones(i, k) * gvec_txx(k, j) -
                            gvec(i, k) * moments[e].sxy(j, k));
                }
                out.grad(i, j) += acc;
            }
    }
    return out;
}

namespace {

double joint_risk(const Matrix& beta, const EnvironmentMoments& m, Matrix* grad) {
    const Matrix sb = m.sxx.mat() * beta;
    const double r = frob_inner(beta, sb) - 2.0 * frob_inner(beta, m.sxy) + trace_of(m.syy);
    if (grad) *grad = 2.0 * (sb - m.sxy);
    return r;
}

void fill_joint_spectrum(const std::vector<EnvironmentMoments>& moments, LossGrad* out) {
    const int ne = static_cast<int>(moments.size());
    out->env_kappa.resize(ne);
    out->env_lambda_min.resize(ne);
    for (int e = 0; e < ne; ++e) {
        const EigDecomp eig = sym_eig(moments[e].sxx);
        spectrum_stats(eig, &out->env_kappa[e], &out->env_lambda_min[e]);
    }
}

}  // namespace

LossGrad erm_loss_and_grad(const Matrix& beta, const std::vector<EnvironmentMoments>& moments) {
    if (moments.empty()) throw EmptyEnvironmentError("erm: no environments");
    const int ne = static_cast<int>(moments.size());
    LossGrad out;
    out.grad = Matrix(beta.rows(), beta.cols());
    out.env_risk.resize(ne);
    out.env_penalty.assign(ne, 0.0);
    for (int e = 0; e < ne; ++e) {
        Matrix g;
        out.env_risk[e] = joint_risk(beta, moments[e], &g);
        out.loss += out.env_risk[e] / ne;
        out.grad += g * (1.0 / ne);
    }
    return out;
}

LossGrad iga_loss_and_grad(const Matrix& beta, const std::vector<EnvironmentMoments>& moments,
                           double lambda) {
    if (moments.empty()) throw EmptyEnvironmentError("iga: no environments");
    const int ne = static_cast<int>(moments.size());
    std::vector<Matrix> grads(ne);
    LossGrad out;
    out.env_risk.resize(ne);
    double mean = 0.0;
    for (int e = 0; e < ne; ++e) {
        out.env_risk[e] = joint_risk(beta, moments[e], &grads[e]);
        mean += out.env_risk[e] / ne;
    }
    double var = 0.0;
    for (int e = 0; e < ne; ++e) {
        const double d = out.env_risk[e] - mean;
        var += d * d / ne;
    }
    out.loss = mean + lambda * var;
    out.env_penalty.resize(ne);
    out.grad = Matrix(beta.rows(), beta.cols());
    for (int e = 0; e < ne; ++e) {
        const double d = out.env_risk[e] - mean;
        out.env_penalty[e] = d * d;
        // d Var / d beta = (2/ne) sum_e (R_e - mean) dR_e  (mean term cancels)
        out.grad += grads[e] * (1.0 / ne + lambda * 2.0 * d / ne);
    }
    return out;
}

LossGrad andmask_loss_and_direction(const Matrix& beta,
                                    const std::vector<EnvironmentMoments>& moments) {
    if (moments.empty()) throw EmptyEnvironmentError("andmask: no environments");
    const int ne = static_cast<int>(moments.size());
    std::vector<Matrix> grads(ne);
    LossGrad out;
    out.env_risk.resize(ne);
    out.env_penalty.assign(ne, 0.0);
    for (int e = 0; e < ne; ++e) {
        out.env_risk[e] = joint_risk(beta, moments[e], &grads[e]);
        out.loss += out.env_risk[e] / ne;
    }
    out.grad = Matrix(beta.rows(), beta.cols());
    for (int i = 0; i < beta.rows(); ++i)
        for (int j = 0; j < beta.cols(); ++j) {
            const double s0 = grads[0](i, j);
            bool agree = s0 != 0.0;
            for (int e = 1; e < ne && agree; ++e)
                agree = grads[e](i, j) != 0.0 && std::signbit(grads[e](i, j)) == std::signbit(s0);
            if (!agree) continue;
            double m = 0.0;
            for (int e = 0; e < ne; ++e) m += grads[e](i, j) / ne;
            out.grad(i, j) = m;
        }
    return out;
}

LossGrad method_loss_and_grad(const TrainConfig& cfg, const Matrix& param,
                              const std::vector<EnvironmentMoments>& moments,
                              double penalty_scale) {
    const double lam = cfg.lambda * penalty_scale;
    switch (cfg.method) {
        case Method::IRMv2:
            return irmv2_loss_and_grad(LinearRepresentation{param}, moments, lam);
        case Method::IRMv1:
            return irmv1_loss_and_grad(LinearRepresentation{param}, moments, lam, false,
                                       cfg.lambda0);
        case Method::IRMv1A:
            if (penalty_scale == 0.0)  // warmup: penalty off
                return irmv1_loss_and_grad(LinearRepresentation{param}, moments, 0.0, false,
                                           cfg.lambda0);
            return irmv1_loss_and_grad(LinearRepresentation{param}, moments, cfg.lambda, true,
                                       cfg.lambda0);
        case Method::IGA:
            return iga_loss_and_grad(param, moments, lam);
        case Method::ANDMask:
            return andmask_loss_and_direction(param, moments);
        case Method::ERM:
        case Method::Oracle:
            return erm_loss_and_grad(param, moments);
    }
    throw Error("method_loss_and_grad: unknown method");
}

namespace {

bool is_representation_method(Method m) {
    return m == Method::IRMv1 || m == Method::IRMv1A || m == Method::IRMv2;
}

void self_check_gradient(const TrainConfig& cfg, const Matrix& param,
                         const std::vector<EnvironmentMoments>& moments, const LossGrad& lg,
                         double penalty_scale, int step) {
    if (cfg.method == Method::ANDMask) return;  // masked direction is not a gradient
    // IRMv1A differentiates at frozen per-environment coefficients, so the
    // finite-difference evaluation must pin them at the center point.
    std::vector<double> frozen;
    const bool freeze = cfg.method == Method::IRMv1A && penalty_scale != 0.0;
    if (freeze)
        frozen = irmv1_adaptive_coefficients(LinearRepresentation{param}, moments, cfg.lambda0);
    auto loss_at = [&](const Matrix& p) {
        if (freeze)
            return irmv1_loss_and_grad(LinearRepresentation{p}, moments, 0.0, false, cfg.lambda0,
                                       &frozen)
                .loss;
        return method_loss_and_grad(cfg, p, moments, penalty_scale).loss;
    };

    Matrix fd(param.rows(), param.cols());
    Matrix p = param;
    for (int i = 0; i < param.rows(); ++i)
        for (int j = 0; j < param.cols(); ++j) {
            const double h = 1e-5 * (1.0 + std::abs(param(i, j)));
            p(i, j) = param(i, j) + h;
            const double fp = loss_at(p);
            p(i, j) = param(i, j) - h;
            const double fm = loss_at(p);
            p(i, j) = param(i, j);
            fd(i, j) = (fp - fm) / (2.0 * h);
        }
    // Floor the denominator at the loss scale. Square invertible theta makes
    // the IRMv2 objective constant, where central differences carry only
    // cancellation noise; the floor keeps the guard meaningful there while
    // still catching derivation errors of gradient magnitude.
    const double denom = std::max(fd.frobenius_norm(), 1e-2 * (1.0 + std::abs(lg.loss)));
    const double rel = (lg.grad - fd).frobenius_norm() / denom;
    if (rel > 1e-4)
        throw Error("gradient self-check failed at step " + std::to_string(step) +
                    " (rel err " + std::to_string(rel) + ")");
}

}  // namespace

TrainResult train_on_moments(const TrainConfig& cfg,
                             const std::vector<EnvironmentMoments>& moments) {
    if (moments.empty()) throw EmptyEnvironmentError("train: no environments");
    if (cfg.steps < 1) throw SpecError("train: steps < 1");
    if (!(cfg.learning_rate > 0.0)) throw SpecError("train: learning rate must be > 0");
    const auto t0 = std::chrono::steady_clock::now();

    const int dx = moments.front().dx();
    const int dy = moments.front().dy();
    const bool rep_method = is_representation_method(cfg.method);
    int dphi = cfg.d_phi;
    if (dphi <= 0) dphi = (cfg.method == Method::IRMv1 || cfg.method == Method::IRMv1A) ? 1 : dx;

    Rng rng(mix_seed({cfg.seed, fnv1a64("train_init")}));
    const double init_sd = 1.0 / std::sqrt(static_cast<double>(dx));
    Matrix param = rep_method ? rng.normal_matrix(dphi, dx, init_sd)
                              : rng.normal_matrix(dx, dy, init_sd);

    Matrix momentum(param.rows(), param.cols());
    Matrix adam_m(param.rows(), param.cols());
    Matrix adam_v(param.rows(), param.cols());
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    TrainResult result;
    result.trace.reserve(cfg.steps);
    double lr = cfg.learning_rate;
    Matrix prev_param = param;
    double prev_loss = std::numeric_limits<double>::infinity();
    LossGrad lg;

    for (int t = 1; t <= cfg.steps; ++t) {
        const double penalty_scale = (t <= cfg.warmup_steps) ? 0.0 : 1.0;
        lg = method_loss_and_grad(cfg, param, moments, penalty_scale);
        if (!std::isfinite(lg.loss) || !lg.grad.all_finite())
            throw DivergedError("train: non-finite loss at step " + std::to_string(t), t);
        if (cfg.grad_check_every > 0 && (t - 1) % cfg.grad_check_every == 0)
            self_check_gradient(cfg, param, moments, lg, penalty_scale, t);

        if (cfg.halve_on_increase && cfg.optimizer == Optimizer::gd &&
            lg.loss > prev_loss * (1.0 + 1e-15)) {
            param = prev_param;
            lr *= 0.5;
            lg = method_loss_and_grad(cfg, param, moments, penalty_scale);
        }

        StepRecord rec;
        rec.loss = lg.loss;
        rec.env_risk = lg.env_risk;
        rec.env_penalty = lg.env_penalty;
        rec.env_kappa = lg.env_kappa;
        rec.env_lambda_min = lg.env_lambda_min;
        if (rec.env_kappa.empty()) {
            LossGrad spec_only;
            fill_joint_spectrum(moments, &spec_only);
            rec.env_kappa = spec_only.env_kappa;
            rec.env_lambda_min = spec_only.env_lambda_min;
        }
        result.trace.push_back(std::move(rec));
        result.pooled_singular = result.pooled_singular || lg.pooled_singular;

        prev_param = param;
        prev_loss = lg.loss;
        switch (cfg.optimizer) {
            case Optimizer::gd:
                param -= lg.grad * lr;
                break;
            case Optimizer::momentum:
                momentum = momentum * 0.9 + lg.grad;
                param -= momentum * lr;
                break;
            case Optimizer::adamlike: {
                const double bc1 = 1.0 - std::pow(beta1, t);
                const double bc2 = 1.0 - std::pow(beta2, t);
                for (int i = 0; i < param.rows(); ++i)
                    for (int j = 0; j < param.cols(); ++j) {
                        const double g = lg.grad(i, j);
                        adam_m(i, j) = beta1 * adam_m(i, j) + (1.0 - beta1) * g;
                        adam_v(i, j) = beta2 * adam_v(i, j) + (1.0 - beta2) * g * g;
                        param(i, j) -= lr * (adam_m(i, j) / bc1) /
                                       (std::sqrt(adam_v(i, j) / bc2) + adam_eps);
                    }
                break;
            }
        }
        if (!param.all_finite())
            throw DivergedError("train: non-finite parameters at step " + std::to_string(t), t);
    }

    if (rep_method) {
        result.theta = LinearRepresentation{param};
        if (cfg.method == Method::IRMv2) {
            Classifier pooled;
            irmv2_loss_and_grad(result.theta, moments, cfg.lambda, &pooled);
            result.w = pooled;
        } else {
            result.w.w = Matrix(dphi, dy, 1.0);
        }
    } else {
        result.theta = LinearRepresentation{Matrix::identity(dx)};
        result.w.w = param;
    }
    result.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

TrainResult train(const TrainConfig& cfg, const std::vector<EnvironmentData>& envs) {
    std::vector<EnvironmentMoments> moments;
    moments.reserve(envs.size());
    for (const EnvironmentData& e : envs) moments.push_back(compute_moments(e));
    return train_on_moments(cfg, moments);
}

double evaluate(const LinearRepresentation& theta, const Classifier& w,
                const EnvironmentData& env) {
    if (theta.d_x() != env.d_x()) throw ShapeError("evaluate: input dimension mismatch");
    if (w.w.rows() != theta.d_phi()) throw ShapeError("evaluate: classifier/representation mismatch");
    if (w.w.cols() != env.y.cols()) throw ShapeError("evaluate: output dimension mismatch");
    const long n = env.n();
    const int dy = env.y.cols();
    double acc = 0.0;
    std::vector<double> phi(theta.d_phi()), pred(dy);
    for (long i = 0; i < n; ++i) {
        const int row = static_cast<int>(i);
        for (int p = 0; p < theta.d_phi(); ++p) {
            double s = 0.0;
            for (int j = 0; j < env.d_x(); ++j) s += theta.theta(p, j) * env.x(row, j);
            phi[p] = s;
        }
        for (int k = 0; k < dy; ++k) {
            double s = 0.0;
            for (int p = 0; p < theta.d_phi(); ++p) s += w.w(p, k) * phi[p];
            pred[k] = s;
        }
        if (env.task == Task::regression) {
            for (int k = 0; k < dy; ++k) {
                const double d = pred[k] - env.y(row, k);
                acc += d * d;
            }
        } else if (env.task == Task::binary_pm1) {
            const double sign = (pred[0] >= 0.0) ? 1.0 : -1.0;  // sign(0) -> +1
            acc += (sign != env.y(row, 0)) ? 1.0 : 0.0;
        } else {
            throw SpecError("evaluate: unsupported task");
        }
    }
    return acc / static_cast<double>(n);
}

std::string train_result_json(const TrainConfig& cfg, const TrainResult& result) {
    nlohmann::json j;
    j["config"] = {{"method", method_name(cfg.method)},
                   {"lambda", cfg.lambda},
                   {"lambda0", cfg.lambda0},
                   {"d_phi", cfg.d_phi},
                   {"steps", cfg.steps},
                   {"learning_rate", cfg.learning_rate},
                   {"optimizer", cfg.optimizer == Optimizer::gd
                                     ? "gd"
                                     : (cfg.optimizer == Optimizer::momentum ? "momentum"
                                                                             : "adamlike")},
                   {"seed", cfg.seed},
                   {"warmup_steps", cfg.warmup_steps}};
    j["theta"] = nlohmann::json::array();
    for (int i = 0; i < result.theta.theta.rows(); ++i)
        j["theta"].push_back(result.theta.theta.row_vec(i));
    j["w"] = nlohmann::json::array();
    for (int i = 0; i < result.w.w.rows(); ++i) j["w"].push_back(result.w.w.row_vec(i));
    j["pooled_singular"] = result.pooled_singular;
    j["wall_time_sec"] = result.wall_time_sec;

    nlohmann::json trace;
    trace["loss"] = nlohmann::json::array();
    trace["env_risk"] = nlohmann::json::array();
    trace["env_penalty"] = nlohmann::json::array();
    trace["env_kappa"] = nlohmann::json::array();
    trace["env_lambda_min"] = nlohmann::json::array();
    for (const StepRecord& r : result.trace) {
        trace["loss"].push_back(r.loss);
        trace["env_risk"].push_back(r.env_risk);
        trace["env_penalty"].push_back(r.env_penalty);
        trace["env_kappa"].push_back(r.env_kappa);
        trace["env_lambda_min"].push_back(r.env_lambda_min);
    }
    j["trace"] = std::move(trace);
    return j.dump(2);
}

}  // namespace irmbench
