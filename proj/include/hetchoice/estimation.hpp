#pragma once

#include <functional>

#include <Eigen/Dense>

#include "hetchoice/likelihood.hpp"

namespace hetchoice {

struct OptimizerConfig {
    double grad_tol = 1e-5;    // infinity norm of the score at the optimum
    int max_iterations = 500;
    int restarts = 1;          // 5 by default for LCM/LCML (set by the caller)
    std::uint64_t restart_seed = 0;
    int threads = 1;
    bool use_numeric_gradient = false;
};

struct ConvergenceRecord {
    bool converged = false;
    int iterations = 0;
    double grad_inf_norm = 0.0;
    int restart_index = 0;
    int n_restarts = 1;
    long long n_evaluations = 0;
    std::string message;
};

/// Central differences with step 1e-6 * max(1, |theta_j|); errors if the
/// function is not finite at any evaluation point.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& theta);

struct FitMetricsValues {
    double aic = 0.0;
    double bic = 0.0;
    double rho_sq_bar = 0.0;
};

/// AIC = 2k - 2LL, BIC = k ln(n) - 2LL, rho-square-bar = 1 - (LL - k)/LL0.
FitMetricsValues fit_metrics(int k, double ll, double ll0, long long n);

/// Multiplicative odds factor exp(beta).
double odds_ratio(double beta);

struct EstimationResult {
    Family family = Family::BL;
    std::vector<std::string> names;
    Eigen::VectorXd estimates;

    bool have_hessian_cov = false;
    Eigen::MatrixXd cov_hessian;
    Eigen::VectorXd hessian_se;

    bool have_robust_cov = false;
    Eigen::MatrixXd cov_robust;  // clustered by individual: H^-1 B H^-1
    Eigen::VectorXd robust_se;
    Eigen::VectorXd robust_t;

    double loglik = 0.0;
    double ll0_equal_share = 0.0;     // n * ln(1/J) for J outcome categories
    double ll0_observed_share = 0.0;  // intercept-only (market share) null
    long long n_observations = 0;
    long long n_individuals = 0;

    ConvergenceRecord convergence;
    std::vector<std::string> excluded_deltas;

    int n_free_params() const { return static_cast<int>(names.size()); }
};

/// Quasi-Newton (BFGS) ascent with backtracking line search and optional
/// random restarts. Covariances come from the finite-difference Hessian of
/// the score and the individual-clustered sandwich.
EstimationResult maximize_loglik(const LikelihoodEvaluator& evaluator,
                                 const Eigen::VectorXd& init, const OptimizerConfig& config);

/// Family-specific starting values: BL at zero, MIXL means from a converged
/// BL fit with sds at 0.1, LCM/LCML class utilities from a BL fit perturbed
/// by +-0.5 with membership at zero, OL thresholds from category shares.
Eigen::VectorXd starting_values(const BoundModel& bound, const DrawSet* draws, int threads);

/// Base variables of sd parameters with |robust t| >= threshold, ordered by
/// |t| descending; candidates for a follow-up latent class membership
/// function. Errors when the spec carries no sd parameters.
std::vector<std::string> heterogeneity_workflow(const EstimationResult& mixl_result,
                                                const ModelSpec& spec, double t_threshold);

/// Null log-likelihoods for the fit metrics: equal-share and observed-share.
std::pair<double, double> null_logliks(const BoundModel& bound);

}  // namespace hetchoice
