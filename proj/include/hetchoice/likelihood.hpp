#pragma once

#include <Eigen/Dense>

#include "hetchoice/draws.hpp"
#include "hetchoice/model_spec.hpp"

namespace hetchoice {

/// P(giveAway) = 1 / (1 + exp(-V)); saturation-safe for any finite V.
double binary_logit_prob(double v_give);

/// ln of the logistic CDF, computed through log1p to avoid overflow.
double log_logistic(double v);

/// Softmax class probabilities from non-reference class scores; the reference
/// class contributes score zero and comes last in the returned vector.
Eigen::VectorXd membership_probs(const Eigen::VectorXd& nonref_scores);

/// Category probabilities of the ordered logit: thresholds are
/// tau_1 = tau1, tau_k = tau_{k-1} + delta_k with all increments positive, and
/// P(k) = F(tau_k - u) - F(tau_{k-1} - u) for the logistic CDF F.
/// Returns deltas.size() + 2 probabilities summing to one.
Eigen::VectorXd ordinal_probs(double utility, double tau1, const Eigen::VectorXd& deltas);

/// Ordinary least squares with heteroskedasticity-consistent (HC1) errors.
struct OlsResult {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd robust_se;
    Eigen::VectorXd robust_t;
    double residual_variance = 0.0;
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    double loglik = 0.0;  // Gaussian log-likelihood at the fit
    int n = 0;
    int k = 0;
};
OlsResult ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<std::string>& names);

/// Evaluates log-likelihood and analytic scores for one bound model. All
/// methods are pure functions of (theta, draws); cross-individual sums run in
/// a fixed order so results are identical for any thread count.
class LikelihoodEvaluator {
  public:
    LikelihoodEvaluator(const BoundModel& bound, const DrawSet* draws = nullptr, int threads = 1);

    /// Per-individual log-likelihood contributions (panel products in log space).
    Eigen::VectorXd loglik_by_individual(const Eigen::VectorXd& theta) const;

    /// Fixed-order sum of loglik_by_individual.
    double loglik(const Eigen::VectorXd& theta) const;

    /// Analytic per-individual score rows (n_individuals x p).
    Eigen::MatrixXd score_by_individual(const Eigen::VectorXd& theta) const;

    Eigen::VectorXd score(const Eigen::VectorXd& theta) const;

    /// Like loglik but returns -inf for infeasible parameters (non-positive
    /// threshold increments, non-finite utilities) instead of throwing; used
    /// by the line search.
    double guarded_loglik(const Eigen::VectorXd& theta) const;

    const BoundModel& bound() const { return bound_; }
    const DrawSet* draws_ptr() const { return draws_; }
    int n_params() const { return bound_.layout.size(); }
    int threads() const { return threads_; }

  private:
    const BoundModel& bound_;
    const DrawSet* draws_;
    int threads_;

    void individual_ll(const Eigen::VectorXd& theta, int i, double* ll,
                       Eigen::VectorXd* score_row) const;
    void check_draws() const;
};

/// Simulated panel choice probability of one individual:
/// (1/R) sum_r prod_t P(y_it | beta with random coefficients at mean + sd*xi_r).
double mixl_simulated_prob(const BoundModel& bound, const Eigen::VectorXd& theta,
                           const DrawSet& draws, int individual);

// Whole-sample log-likelihood entry points per family.
double panel_loglik_binary(const Eigen::VectorXd& theta, const BoundModel& bound, int threads = 1);
double lcm_loglik(const Eigen::VectorXd& theta, const BoundModel& bound, int threads = 1);
double lcml_loglik(const Eigen::VectorXd& theta, const BoundModel& bound, const DrawSet& draws,
                   int threads = 1);

}  // namespace hetchoice
