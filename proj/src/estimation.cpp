#include "hetchoice/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hetchoice {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct SingleRun {
    Eigen::VectorXd theta;
    double loglik = kNegInf;
    bool converged = false;
    int iterations = 0;
    double grad_inf_norm = std::numeric_limits<double>::quiet_NaN();
    long long n_evaluations = 0;
    std::string message;
};

Eigen::VectorXd gradient_of(const LikelihoodEvaluator& ev, const Eigen::VectorXd& theta,
                            bool numeric, long long* evals) {
    if (!numeric) return ev.score(theta);
    *evals += 2 * theta.size();
    return numeric_gradient([&](const Eigen::VectorXd& t) { return ev.guarded_loglik(t); }, theta);
}

SingleRun bfgs_maximize(const LikelihoodEvaluator& ev, const Eigen::VectorXd& init,
                        const OptimizerConfig& config) {
    const int p = static_cast<int>(init.size());
    SingleRun run;
    run.theta = init;

    double f = ev.guarded_loglik(run.theta);
    ++run.n_evaluations;
    if (!std::isfinite(f)) {
        run.message = "log-likelihood not finite at the starting point";
        return run;
    }
    Eigen::VectorXd g = gradient_of(ev, run.theta, config.use_numeric_gradient, &run.n_evaluations);
    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(p, p);
    bool have_curvature = false;

    const double c1 = 1e-4;
    for (int it = 0; it < config.max_iterations; ++it) {
        run.iterations = it;
        run.grad_inf_norm = g.lpNorm<Eigen::Infinity>();
        if (run.grad_inf_norm <= config.grad_tol) {
            run.converged = true;
            run.loglik = f;
            return run;
        }

        Eigen::VectorXd direction = h_inv * g;  // ascent direction
        double slope = g.dot(direction);
        if (!(slope > 0.0) || !direction.allFinite()) {
            h_inv.setIdentity();
            have_curvature = false;
            direction = g;
            slope = g.squaredNorm();
        }

        // Without curvature information the natural step length is unknown;
        // cap the first trial so the line search starts at a unit-sized move.
        double step =
            have_curvature ? 1.0 : 1.0 / std::max(1.0, direction.lpNorm<Eigen::Infinity>());
        double f_new = kNegInf;
        Eigen::VectorXd theta_new;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            theta_new = run.theta + step * direction;
            f_new = ev.guarded_loglik(theta_new);
            ++run.n_evaluations;
            if (std::isfinite(f_new) && f_new >= f + c1 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // Retry once from a fresh Hessian before giving up.
            if (have_curvature) {
                h_inv.setIdentity();
                have_curvature = false;
                continue;
            }
            run.loglik = f;
            run.message = "line search failed";
            return run;
        }

        Eigen::VectorXd g_new =
            gradient_of(ev, theta_new, config.use_numeric_gradient, &run.n_evaluations);
        Eigen::VectorXd s = theta_new - run.theta;
        Eigen::VectorXd yv = g_new - g;  // gradient difference (note: ascent)
        double sy = -s.dot(yv);          // positive near a maximum
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            if (!have_curvature) {
                // Scale the seed matrix to the first observed curvature
                // before applying the update (Nocedal & Wright eq. 6.20).
                h_inv = (sy / yv.squaredNorm()) * Eigen::MatrixXd::Identity(p, p);
            }
            // Inverse BFGS update on the negative log-likelihood.
            Eigen::VectorXd hy = h_inv * (-yv);
            double yhy = (-yv).dot(hy);
            h_inv += ((sy + yhy) / (sy * sy)) * (s * s.transpose());
            Eigen::MatrixXd cross = hy * s.transpose();
            h_inv -= (cross + cross.transpose()) / sy;
            have_curvature = true;
        }
        run.theta = theta_new;
        f = f_new;
        g = g_new;
    }
    run.iterations = config.max_iterations;
    run.grad_inf_norm = g.lpNorm<Eigen::Infinity>();
    run.loglik = f;
    run.converged = run.grad_inf_norm <= config.grad_tol;
    if (!run.converged) run.message = "maximum iterations reached";
    return run;
}

// Finite-difference Jacobian of the score, symmetrised.
Eigen::MatrixXd hessian_of(const LikelihoodEvaluator& ev, const Eigen::VectorXd& theta,
                           bool numeric_gradient_mode) {
    const int p = static_cast<int>(theta.size());
    Eigen::MatrixXd h(p, p);
    long long dummy = 0;
    for (int j = 0; j < p; ++j) {
        double step = (numeric_gradient_mode ? 1e-4 : 1e-5) * std::max(1.0, std::abs(theta(j)));
        Eigen::VectorXd hi = theta, lo = theta;
        hi(j) += step;
        lo(j) -= step;
        Eigen::VectorXd ghi = gradient_of(ev, hi, numeric_gradient_mode, &dummy);
        Eigen::VectorXd glo = gradient_of(ev, lo, numeric_gradient_mode, &dummy);
        h.col(j) = (ghi - glo) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

// Swap the two class blocks of an exchangeable 2-class model and flip the
// membership signs; the likelihood is invariant under this relabeling.
Eigen::VectorXd swap_classes(const BoundModel& bound, const Eigen::VectorXd& theta) {
    Eigen::VectorXd out = theta;
    const auto& layout = bound.layout;
    auto [off0, k0] = layout.class_utilities[0];
    auto [off1, k1] = layout.class_utilities[1];
    for (int j = 0; j < k0; ++j) std::swap(out(off0 + j), out(off1 + j));
    const auto& sd0 = layout.sd_params[0];
    const auto& sd1 = layout.sd_params[1];
    for (std::size_t d = 0; d < sd0.size(); ++d) std::swap(out(sd0[d]), out(sd1[d]));
    auto [moff, mk] = layout.membership_params[0];
    for (int j = 0; j < mk; ++j) out(moff + j) = -out(moff + j);
    return out;
}

// Reported class order is canonical: for exchangeable 2-class specs the class
// whose membership coefficient on the first non-constant membership covariate
// is positive comes first.
Eigen::VectorXd canonicalize(const BoundModel& bound, const Eigen::VectorXd& theta) {
    if (bound.spec.n_classes() != 2 || !bound.spec.classes_exchangeable()) return theta;
    const auto& terms = bound.spec.membership[0];
    int pivot = -1;
    for (std::size_t j = 0; j < terms.size(); ++j) {
        if (terms[j].variable != kConstantVariable) {
            pivot = static_cast<int>(j);
            break;
        }
    }
    if (pivot < 0) return theta;
    auto [moff, mk] = bound.layout.membership_params[0];
    (void)mk;
    if (theta(moff + pivot) < 0.0) return swap_classes(bound, theta);
    return theta;
}

}  // namespace

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& theta) {
    const int p = static_cast<int>(theta.size());
    Eigen::VectorXd grad(p);
    for (int j = 0; j < p; ++j) {
        double h = 1e-6 * std::max(1.0, std::abs(theta(j)));
        Eigen::VectorXd hi = theta, lo = theta;
        hi(j) += h;
        lo(j) -= h;
        double fh = f(hi), fl = f(lo);
        if (!std::isfinite(fh) || !std::isfinite(fl))
            throw NumericError("numeric_gradient: function not finite at a perturbed point");
        grad(j) = (fh - fl) / (2.0 * h);
    }
    return grad;
}

FitMetricsValues fit_metrics(int k, double ll, double ll0, long long n) {
    if (k < 0) throw NumericError("fit_metrics needs k >= 0");
    if (n < 1) throw NumericError("fit_metrics needs n >= 1");
    if (!(ll0 < 0.0)) throw NumericError("fit_metrics needs LL0 < 0");
    FitMetricsValues m;
    m.aic = 2.0 * k - 2.0 * ll;
    m.bic = k * std::log(static_cast<double>(n)) - 2.0 * ll;
    m.rho_sq_bar = 1.0 - (ll - k) / ll0;
    return m;
}

double odds_ratio(double beta) {
    if (!std::isfinite(beta)) throw NumericError("odds_ratio needs a finite coefficient");
    return std::exp(beta);
}

std::pair<double, double> null_logliks(const BoundModel& bound) {
    const double n = static_cast<double>(bound.n_obs);
    if (bound.family == Family::OL) {
        const int K = bound.n_categories;
        double equal = n * std::log(1.0 / K);
        std::vector<double> counts(static_cast<std::size_t>(K), 0.0);
        for (int i = 0; i < bound.y_ordinal.size(); ++i)
            counts[static_cast<std::size_t>(bound.y_ordinal(i)) - 1] += 1.0;
        double observed = 0.0;
        for (double c : counts)
            if (c > 0.0) observed += c * std::log(c / n);
        return {equal, observed};
    }
    double equal = n * std::log(0.5);
    double ones = 0.0;
    for (int i = 0; i < bound.y.size(); ++i) ones += bound.y(i);
    double observed = 0.0;
    if (ones > 0.0) observed += ones * std::log(ones / n);
    if (n - ones > 0.0) observed += (n - ones) * std::log((n - ones) / n);
    return {equal, observed};
}

EstimationResult maximize_loglik(const LikelihoodEvaluator& evaluator, const Eigen::VectorXd& init,
                                 const OptimizerConfig& config) {
    const BoundModel& bound = evaluator.bound();
    const int p = bound.layout.size();
    if (init.size() != p)
        throw NumericError("initial point length does not match the parameter layout");
    const int restarts = std::max(1, config.restarts);

    std::vector<SingleRun> runs(static_cast<std::size_t>(restarts));
    // Restarts are independent, so they may run concurrently; the winner is
    // picked by (loglik, index), which does not depend on scheduling.
    int outer_threads = restarts > 1 ? std::min(config.threads, restarts) : 1;
    int inner_threads = restarts > 1 ? std::max(1, config.threads / std::max(1, outer_threads))
                                     : config.threads;

    parallel_for_deterministic(static_cast<std::size_t>(restarts), outer_threads,
                               [&](std::size_t r) {
        Eigen::VectorXd start = init;
        if (r > 0) {
            RngStream stream(config.restart_seed, r);
            for (int j = 0; j < p; ++j) start(j) += stream.next_u01() - 0.5;
            for (int idx : bound.layout.deltas) start(idx) = std::max(start(idx), 0.05);
        }
        OptimizerConfig local = config;
        local.threads = inner_threads;
        if (restarts == 1) {
            runs[r] = bfgs_maximize(evaluator, start, local);
        } else {
            LikelihoodEvaluator per_restart(bound, evaluator.draws_ptr(), inner_threads);
            runs[r] = bfgs_maximize(per_restart, start, local);
        }
    });

    int best = 0;
    for (int r = 1; r < restarts; ++r) {
        bool better = (runs[r].converged && !runs[best].converged) ||
                      ((runs[r].converged == runs[best].converged) &&
                       runs[r].loglik > runs[best].loglik);
        if (better) best = r;
    }
    SingleRun& win = runs[static_cast<std::size_t>(best)];

    EstimationResult result;
    result.family = bound.family;
    result.names = bound.layout.names;
    result.estimates = canonicalize(bound, win.theta);
    result.loglik = win.loglik;
    result.n_observations = bound.n_obs;
    result.n_individuals = bound.n_ind;
    result.excluded_deltas = bound.layout.excluded_deltas;
    result.convergence.converged = win.converged;
    result.convergence.iterations = win.iterations;
    result.convergence.grad_inf_norm = win.grad_inf_norm;
    result.convergence.restart_index = best;
    result.convergence.n_restarts = restarts;
    result.convergence.message = win.message;
    for (const auto& r : runs) result.convergence.n_evaluations += r.n_evaluations;

    auto [ll0_equal, ll0_observed] = null_logliks(bound);
    result.ll0_equal_share = ll0_equal;
    result.ll0_observed_share = ll0_observed;

    if (!win.converged) return result;  // diagnostics only, covariance omitted

    Eigen::MatrixXd hessian = hessian_of(evaluator, result.estimates, config.use_numeric_gradient);
    Eigen::MatrixXd neg_hessian = -hessian;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigs(neg_hessian);
    double min_eig = eigs.eigenvalues().minCoeff();
    double max_eig = eigs.eigenvalues().maxCoeff();
    if (min_eig > 1e-10 * std::max(1.0, max_eig)) {
        result.cov_hessian =
            neg_hessian.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
        result.cov_hessian = 0.5 * (result.cov_hessian + result.cov_hessian.transpose());
        result.have_hessian_cov = true;
        result.hessian_se = result.cov_hessian.diagonal().array().max(0.0).sqrt();

        Eigen::MatrixXd scores = evaluator.score_by_individual(result.estimates);
        Eigen::MatrixXd meat = scores.transpose() * scores;
        result.cov_robust = result.cov_hessian * meat * result.cov_hessian;
        result.cov_robust = 0.5 * (result.cov_robust + result.cov_robust.transpose());
        result.have_robust_cov = true;
        result.robust_se = result.cov_robust.diagonal().array().max(0.0).sqrt();
        result.robust_t.resize(p);
        for (int j = 0; j < p; ++j)
            result.robust_t(j) =
                result.robust_se(j) > 0.0 ? result.estimates(j) / result.robust_se(j) : 0.0;
    } else {
        result.convergence.message = "Hessian not negative definite at the optimum";
    }
    return result;
}

Eigen::VectorXd starting_values(const BoundModel& bound, const DrawSet* draws, int threads) {
    const auto& layout = bound.layout;
    Eigen::VectorXd init = Eigen::VectorXd::Zero(layout.size());

    auto bl_fit_for_class = [&](std::size_t z) -> Eigen::VectorXd {
        ModelSpec bl;
        bl.family = Family::BL;
        ClassSpec cls;
        cls.utilities = bound.spec.classes[z].utilities;
        bl.classes.push_back(cls);
        bl.source = nlohmann::ordered_json::object();
        // Rebuild a design over the same data through the stored matrices.
        BoundModel sub;
        sub.family = Family::BL;
        sub.spec = bl;
        sub.layout = make_layout(bl, 0);
        sub.class_X.push_back(bound.class_X[z]);
        sub.rc_col.push_back({});
        sub.rc_dim.push_back({});
        sub.y = bound.y;
        sub.individuals = bound.individuals;
        sub.n_obs = bound.n_obs;
        sub.n_ind = bound.n_ind;
        LikelihoodEvaluator ev(sub, nullptr, threads);
        OptimizerConfig cfg;
        cfg.threads = threads;
        EstimationResult r = maximize_loglik(ev, Eigen::VectorXd::Zero(sub.layout.size()), cfg);
        return r.estimates;
    };

    switch (bound.family) {
        case Family::BL:
            break;  // zeros
        case Family::MIXL: {
            Eigen::VectorXd bl = bl_fit_for_class(0);
            auto [off, k] = layout.class_utilities[0];
            init.segment(off, k) = bl;
            for (int idx : layout.sd_params[0]) init(idx) = 0.1;
            break;
        }
        case Family::LCM:
        case Family::LCML: {
            for (std::size_t z = 0; z < bound.spec.classes.size(); ++z) {
                Eigen::VectorXd bl = bl_fit_for_class(z);
                auto [off, k] = layout.class_utilities[z];
                double shift = z % 2 == 0 ? 0.5 : -0.5;
                init.segment(off, k) = bl.array() + shift;
                for (int idx : layout.sd_params[z]) init(idx) = 0.1;
            }
            break;  // membership stays at zero
        }
        case Family::OL: {
            // Thresholds from the observed cumulative shares, coefficients at zero.
            const int K = bound.n_categories;
            std::vector<double> counts(static_cast<std::size_t>(K), 0.0);
            for (int i = 0; i < bound.y_ordinal.size(); ++i)
                counts[static_cast<std::size_t>(bound.y_ordinal(i)) - 1] += 1.0;
            double n = static_cast<double>(bound.n_obs);
            double cum = 0.0;
            std::vector<double> tau;
            for (int k = 0; k + 1 < K; ++k) {
                cum += counts[static_cast<std::size_t>(k)];
                double share = std::min(std::max(cum / n, 1e-3), 1.0 - 1e-3);
                tau.push_back(std::log(share / (1.0 - share)));
            }
            init(layout.tau1) = tau[0];
            for (std::size_t d = 0; d < layout.deltas.size(); ++d)
                init(layout.deltas[d]) = std::max(tau[d + 1] - tau[d], 0.1);
            break;
        }
        case Family::LR:
            throw SpecError("LR has no likelihood starting values; use ols_fit");
    }
    (void)draws;
    return init;
}

std::vector<std::string> heterogeneity_workflow(const EstimationResult& mixl_result,
                                                const ModelSpec& spec, double t_threshold) {
    struct Candidate {
        std::string variable;
        double abs_t;
    };
    std::vector<Candidate> candidates;
    bool any_sd = false;
    for (const auto& cls : spec.classes) {
        for (const auto& rc : cls.random_coefs) {
            any_sd = true;
            int idx = -1;
            for (std::size_t j = 0; j < mixl_result.names.size(); ++j)
                if (mixl_result.names[j] == rc.sd_coef) idx = static_cast<int>(j);
            if (idx < 0 || !mixl_result.have_robust_cov) continue;
            double abs_t = std::abs(mixl_result.robust_t(idx));
            if (abs_t >= t_threshold) {
                std::string base;
                for (const auto& term : cls.utilities)
                    if (term.coef == rc.coef) base = term.variable;
                candidates.push_back({base, abs_t});
            }
        }
    }
    if (!any_sd)
        throw SpecError("heterogeneity_workflow needs a result with sd parameters (MIXL/LCML)");
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.abs_t > b.abs_t; });
    std::vector<std::string> out;
    for (auto& c : candidates) out.push_back(std::move(c.variable));
    return out;
}

}  // namespace hetchoice
