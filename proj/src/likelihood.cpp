#include "hetchoice/likelihood.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace hetchoice {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp(const double* v, int n) {
    double m = v[0];
    for (int i = 1; i < n; ++i) m = std::max(m, v[i]);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(v[i] - m);
    return m + std::log(s);
}

// ln(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct Scratch {
    std::vector<double> lp;      // per draw panel log-probability
    std::vector<double> resid;   // per (obs, draw) residual y - P
    std::vector<double> base;    // per obs fixed-part utility
    std::vector<double> wres;    // per obs draw-weighted residual
    std::vector<double> class_lp;
    std::vector<double> class_post;
    Eigen::VectorXd class_grad;
};

Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

}  // namespace

double binary_logit_prob(double v_give) {
    if (!std::isfinite(v_give)) throw NumericError("binary_logit_prob needs a finite utility");
    if (v_give >= 0.0) return 1.0 / (1.0 + std::exp(-v_give));
    double e = std::exp(v_give);
    return e / (1.0 + e);
}

double log_logistic(double v) {
    return v >= 0.0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
}

Eigen::VectorXd membership_probs(const Eigen::VectorXd& nonref_scores) {
    int z = static_cast<int>(nonref_scores.size()) + 1;
    Eigen::VectorXd probs(z);
    for (int i = 0; i < z - 1; ++i) {
        if (!std::isfinite(nonref_scores(i)))
            throw NumericError("membership score is not finite");
    }
    std::vector<double> scores(nonref_scores.data(), nonref_scores.data() + z - 1);
    scores.push_back(0.0);
    double lse = logsumexp(scores.data(), z);
    for (int i = 0; i < z; ++i) probs(i) = std::exp(scores[i] - lse);
    return probs;
}

Eigen::VectorXd ordinal_probs(double utility, double tau1, const Eigen::VectorXd& deltas) {
    for (int i = 0; i < deltas.size(); ++i)
        if (!(deltas(i) > 0.0))
            throw NumericError("ordinal threshold increments must be positive");
    int K = static_cast<int>(deltas.size()) + 2;
    Eigen::VectorXd tau(K - 1);
    tau(0) = tau1;
    for (int j = 1; j < K - 1; ++j) tau(j) = tau(j - 1) + deltas(j - 1);

    Eigen::VectorXd probs(K);
    probs(0) = binary_logit_prob(tau(0) - utility);
    for (int k = 1; k < K - 1; ++k) {
        double a = tau(k - 1) - utility, b = tau(k) - utility;
        // ln(F(b) - F(a)) for b > a, free of cancellation.
        double lnp = -a + std::log1p(-std::exp(a - b)) - softplus(-b) - softplus(-a);
        probs(k) = std::exp(lnp);
    }
    probs(K - 1) = binary_logit_prob(utility - tau(K - 2));
    return probs;
}

OlsResult ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<std::string>& names) {
    const int n = static_cast<int>(X.rows());
    const int k = static_cast<int>(X.cols());
    if (n < k) throw NumericError("ols_fit needs at least as many rows as columns");
    if (y.size() != n) throw NumericError("ols_fit outcome length does not match design rows");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) {
        const auto& perm = qr.colsPermutation().indices();
        std::string offending;
        for (int j = qr.rank(); j < k; ++j) {
            if (!offending.empty()) offending += ", ";
            offending += names.empty() ? ("column " + std::to_string(perm(j)))
                                       : names[static_cast<std::size_t>(perm(j))];
        }
        throw NumericError("design matrix is rank deficient; offending columns: " + offending);
    }

    OlsResult res;
    res.names = names;
    res.n = n;
    res.k = k;
    res.coefficients = qr.solve(y);
    Eigen::VectorXd resid = y - X * res.coefficients;
    double rss = resid.squaredNorm();
    double mean = y.mean();
    double tss = (y.array() - mean).square().sum();
    res.residual_variance = n > k ? rss / static_cast<double>(n - k) : 0.0;
    res.r_squared = tss > 0.0 ? 1.0 - rss / tss : 0.0;
    res.adj_r_squared =
        tss > 0.0 && n > k
            ? 1.0 - (rss / static_cast<double>(n - k)) / (tss / static_cast<double>(n - 1))
            : 0.0;

    // HC1 sandwich: (X'X)^-1 X' diag(e^2) X (X'X)^-1 scaled by n/(n-k).
    Eigen::MatrixXd xtx_inv = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < n; ++i)
        meat.noalias() += resid(i) * resid(i) * X.row(i).transpose() * X.row(i);
    double correction = n > k ? static_cast<double>(n) / static_cast<double>(n - k) : 1.0;
    Eigen::MatrixXd cov = correction * xtx_inv * meat * xtx_inv;
    res.robust_se = cov.diagonal().array().sqrt();
    res.robust_t.resize(k);
    for (int j = 0; j < k; ++j)
        res.robust_t(j) = res.robust_se(j) > 0.0 ? res.coefficients(j) / res.robust_se(j) : 0.0;

    double sigma2 = rss / static_cast<double>(n);
    res.loglik = sigma2 > 0.0
                     ? -0.5 * n * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0)
                     : std::numeric_limits<double>::infinity();
    return res;
}

LikelihoodEvaluator::LikelihoodEvaluator(const BoundModel& bound, const DrawSet* draws, int threads)
    : bound_(bound), draws_(draws), threads_(std::max(1, threads)) {
    if (bound_.family == Family::LR)
        throw SpecError("LR is estimated in closed form; the likelihood evaluator covers the "
                        "logit families only");
    if (bound_.n_random_dims > 0) check_draws();
}

void LikelihoodEvaluator::check_draws() const {
    if (draws_ == nullptr)
        throw NumericError("model has random coefficients but no draws were supplied");
    if (draws_->R < 1) throw NumericError("draw count R must be at least 1");
    if (draws_->n_dims != bound_.n_random_dims)
        throw NumericError("draw set has " + std::to_string(draws_->n_dims) +
                           " dimensions, model needs " + std::to_string(bound_.n_random_dims));
    if (draws_->n_individuals < bound_.n_ind)
        throw NumericError("draw set covers fewer individuals than the dataset");
}

// Panel log-probability of individual i under class z, plus (optionally) the
// gradient with respect to that class's utility and sd parameters.
// grad layout inside `grad`: [k_z utilities][n_rc sd params].
namespace {

double class_panel_loglik(const BoundModel& bound, const DrawSet* draws,
                          const Eigen::VectorXd& theta, int z, int ind, Eigen::VectorXd* grad) {
    const auto& block = bound.individuals[ind];
    const auto& X = bound.class_X[z];
    auto [off, kz] = bound.layout.class_utilities[z];
    const int T = static_cast<int>(block.count);
    const auto& rc_cols = bound.rc_col[z];
    const auto& rc_dims = bound.rc_dim[z];
    const int n_rc = static_cast<int>(rc_cols.size());

    if (grad) grad->setZero(kz + n_rc);

    if (n_rc == 0) {
        double lp = 0.0;
        for (int t = 0; t < T; ++t) {
            int row = static_cast<int>(block.first) + t;
            double v = 0.0;
            for (int j = 0; j < kz; ++j) v += X(row, j) * theta(off + j);
            int y = bound.y(row);
            lp += y == 1 ? log_logistic(v) : log_logistic(-v);
            if (grad) {
                double p = binary_logit_prob(v);
                double resid = static_cast<double>(y) - p;
                for (int j = 0; j < kz; ++j) (*grad)(j) += resid * X(row, j);
            }
        }
        return lp;
    }

    const int R = draws->R;
    auto& s = scratch();
    s.lp.assign(R, 0.0);
    s.base.assign(T, 0.0);
    if (grad) s.resid.assign(static_cast<std::size_t>(T) * R, 0.0);

    for (int t = 0; t < T; ++t) {
        int row = static_cast<int>(block.first) + t;
        double v = 0.0;
        for (int j = 0; j < kz; ++j) v += X(row, j) * theta(off + j);
        s.base[t] = v;
    }
    for (int r = 0; r < R; ++r) {
        double lp = 0.0;
        for (int t = 0; t < T; ++t) {
            int row = static_cast<int>(block.first) + t;
            double v = s.base[t];
            for (int d = 0; d < n_rc; ++d) {
                double sd = theta(bound.layout.sd_params[z][d]);
                v += sd * draws->at(ind, r, rc_dims[d]) * X(row, rc_cols[d]);
            }
            int y = bound.y(row);
            // One exp serves the log-probability and the residual: with
            // e = exp(-|v|), log F(+-v) and F(v) are both cheap functions of e.
            double e = std::exp(-std::abs(v));
            double l1p = std::log1p(e);
            double chosen_v = y == 1 ? v : -v;
            lp += chosen_v >= 0.0 ? -l1p : chosen_v - l1p;
            if (grad) {
                double p = v >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
                s.resid[static_cast<std::size_t>(t) * R + r] = static_cast<double>(y) - p;
            }
        }
        s.lp[r] = lp;
    }
    double lse = logsumexp(s.lp.data(), R);
    double log_r = std::log(static_cast<double>(R));
    if (grad) {
        // Draw weights w_r = exp(lp_r - lse) sum to one; fold them into
        // per-observation weighted residuals before touching the design.
        s.class_post.assign(static_cast<std::size_t>(R), 0.0);
        for (int r = 0; r < R; ++r) s.class_post[static_cast<std::size_t>(r)] = std::exp(s.lp[r] - lse);
        s.wres.assign(T, 0.0);
        for (int r = 0; r < R; ++r) {
            double w = s.class_post[static_cast<std::size_t>(r)];
            for (int t = 0; t < T; ++t) s.wres[t] += w * s.resid[static_cast<std::size_t>(t) * R + r];
        }
        for (int t = 0; t < T; ++t) {
            int row = static_cast<int>(block.first) + t;
            for (int j = 0; j < kz; ++j) (*grad)(j) += s.wres[t] * X(row, j);
        }
        for (int d = 0; d < n_rc; ++d) {
            double acc = 0.0;
            for (int r = 0; r < R; ++r) {
                double inner = 0.0;
                for (int t = 0; t < T; ++t) {
                    int row = static_cast<int>(block.first) + t;
                    inner += s.resid[static_cast<std::size_t>(t) * R + r] * X(row, rc_cols[d]);
                }
                acc += s.class_post[static_cast<std::size_t>(r)] * inner * draws->at(ind, r, rc_dims[d]);
            }
            (*grad)(kz + d) = acc;
        }
    }
    return lse - log_r;
}

}  // namespace

void LikelihoodEvaluator::individual_ll(const Eigen::VectorXd& theta, int i, double* ll,
                                        Eigen::VectorXd* score_row) const {
    const auto& layout = bound_.layout;
    if (score_row) score_row->setZero(layout.size());

    if (bound_.family == Family::OL) {
        const auto& block = bound_.individuals[i];
        const auto& X = bound_.class_X[0];
        auto [off, kz] = layout.class_utilities[0];
        const int K = bound_.n_categories;
        double tau1 = theta(layout.tau1);
        std::vector<double> tau(static_cast<std::size_t>(K) - 1);
        tau[0] = tau1;
        for (std::size_t j = 1; j < tau.size(); ++j)
            tau[j] = tau[j - 1] + theta(layout.deltas[j - 1]);
        for (std::size_t j = 0; j + 1 < tau.size(); ++j)
            if (!(tau[j] < tau[j + 1])) throw NumericError("ordinal thresholds must be increasing");

        double total = 0.0;
        std::vector<double> grad_tau(tau.size(), 0.0);
        for (std::size_t t = 0; t < block.count; ++t) {
            int row = static_cast<int>(block.first + t);
            double u = 0.0;
            for (int j = 0; j < kz; ++j) u += X(row, j) * theta(off + j);
            int k = bound_.y_ordinal(row);
            double dll_du = 0.0;
            double d_lo = 0.0, d_hi = 0.0;  // dlnP / dtau_{k-1}, dlnP / dtau_k
            if (k == 1) {
                double b = tau[0] - u;
                total += log_logistic(b);
                double one_minus = binary_logit_prob(-b);
                dll_du = -one_minus;
                d_hi = one_minus;
            } else if (k == K) {
                double a = tau[K - 2] - u;
                total += log_logistic(-a);
                double fa = binary_logit_prob(a);
                dll_du = fa;
                d_lo = -fa;
            } else {
                double a = tau[k - 2] - u, b = tau[k - 1] - u;
                double lnp = -a + std::log1p(-std::exp(a - b)) - softplus(-b) - softplus(-a);
                total += lnp;
                if (score_row) {
                    double p = std::exp(lnp);
                    double fa = binary_logit_prob(a) * binary_logit_prob(-a);
                    double fb = binary_logit_prob(b) * binary_logit_prob(-b);
                    dll_du = (fa - fb) / p;
                    d_lo = -fa / p;
                    d_hi = fb / p;
                }
            }
            if (score_row) {
                for (int j = 0; j < kz; ++j) (*score_row)(off + j) += dll_du * X(row, j);
                if (k >= 2) grad_tau[static_cast<std::size_t>(k) - 2] += d_lo;
                if (k <= K - 1) grad_tau[static_cast<std::size_t>(k) - 1] += d_hi;
            }
        }
        if (score_row) {
            double sum = 0.0;
            for (double g : grad_tau) sum += g;
            (*score_row)(layout.tau1) += sum;
            for (std::size_t d = 0; d < layout.deltas.size(); ++d) {
                double acc = 0.0;
                for (std::size_t j = d + 1; j < grad_tau.size(); ++j) acc += grad_tau[j];
                (*score_row)(layout.deltas[d]) += acc;
            }
        }
        *ll = total;
        return;
    }

    // Binary logit mixture machinery; BL and MIXL are the single-class case.
    const int Z = bound_.spec.n_classes();
    auto& s = scratch();
    s.class_lp.assign(Z, 0.0);

    std::vector<Eigen::VectorXd> class_grads;
    if (score_row) class_grads.resize(Z);

    std::vector<double> log_pi(Z, 0.0);
    std::vector<double> pi(Z, 1.0);
    if (Z > 1) {
        Eigen::VectorXd scores(Z - 1);
        for (int z = 0; z < Z - 1; ++z) {
            auto [moff, mk] = bound_.layout.membership_params[z];
            double v = 0.0;
            for (int j = 0; j < mk; ++j) v += bound_.membership_W[z](i, j) * theta(moff + j);
            scores(z) = v;
        }
        std::vector<double> all(scores.data(), scores.data() + Z - 1);
        all.push_back(0.0);
        double lse = logsumexp(all.data(), Z);
        for (int z = 0; z < Z; ++z) {
            log_pi[z] = all[z] - lse;
            pi[z] = std::exp(log_pi[z]);
        }
    }

    for (int z = 0; z < Z; ++z) {
        Eigen::VectorXd* g = score_row ? &class_grads[z] : nullptr;
        double lp = class_panel_loglik(bound_, draws_, theta, z, i, g);
        s.class_lp[z] = log_pi[z] + lp;
    }
    double li = logsumexp(s.class_lp.data(), Z);
    *ll = li;

    if (score_row) {
        for (int z = 0; z < Z; ++z) {
            double post = std::exp(s.class_lp[z] - li);
            auto [off, kz] = bound_.layout.class_utilities[z];
            for (int j = 0; j < kz; ++j) (*score_row)(off + j) += post * class_grads[z](j);
            const auto& sd_idx = bound_.layout.sd_params[z];
            for (std::size_t d = 0; d < sd_idx.size(); ++d)
                (*score_row)(sd_idx[d]) += post * class_grads[z](kz + static_cast<int>(d));
        }
        for (int z = 0; z < Z - 1; ++z) {
            double post = std::exp(s.class_lp[z] - li);
            auto [moff, mk] = bound_.layout.membership_params[z];
            for (int j = 0; j < mk; ++j)
                (*score_row)(moff + j) += (post - pi[z]) * bound_.membership_W[z](i, j);
        }
    }
}

Eigen::VectorXd LikelihoodEvaluator::loglik_by_individual(const Eigen::VectorXd& theta) const {
    if (theta.size() != bound_.layout.size())
        throw NumericError("parameter vector length " + std::to_string(theta.size()) +
                           " does not match layout size " + std::to_string(bound_.layout.size()));
    Eigen::VectorXd out(bound_.n_ind);
    parallel_for_deterministic(static_cast<std::size_t>(bound_.n_ind), threads_,
                               [&](std::size_t i) {
                                   double ll = 0.0;
                                   individual_ll(theta, static_cast<int>(i), &ll, nullptr);
                                   out(static_cast<Eigen::Index>(i)) = ll;
                               });
    return out;
}

double LikelihoodEvaluator::loglik(const Eigen::VectorXd& theta) const {
    if (bound_.n_ind == 0) return 0.0;  // empty-sum convention
    Eigen::VectorXd by_ind = loglik_by_individual(theta);
    double total = 0.0;
    for (int i = 0; i < by_ind.size(); ++i) total += by_ind(i);
    return total;
}

Eigen::MatrixXd LikelihoodEvaluator::score_by_individual(const Eigen::VectorXd& theta) const {
    Eigen::MatrixXd out(bound_.n_ind, bound_.layout.size());
    parallel_for_deterministic(static_cast<std::size_t>(bound_.n_ind), threads_,
                               [&](std::size_t i) {
                                   double ll = 0.0;
                                   Eigen::VectorXd row;
                                   individual_ll(theta, static_cast<int>(i), &ll, &row);
                                   out.row(static_cast<Eigen::Index>(i)) = row.transpose();
                               });
    return out;
}

Eigen::VectorXd LikelihoodEvaluator::score(const Eigen::VectorXd& theta) const {
    Eigen::MatrixXd rows = score_by_individual(theta);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(bound_.layout.size());
    for (int i = 0; i < rows.rows(); ++i) total += rows.row(i).transpose();
    return total;
}

double LikelihoodEvaluator::guarded_loglik(const Eigen::VectorXd& theta) const {
    if (theta.size() != bound_.layout.size()) return kNegInf;
    for (int j = 0; j < theta.size(); ++j)
        if (!std::isfinite(theta(j))) return kNegInf;
    for (int idx : bound_.layout.deltas)
        if (!(theta(idx) > 0.0)) return kNegInf;
    double ll = loglik(theta);
    return std::isfinite(ll) ? ll : kNegInf;
}

double mixl_simulated_prob(const BoundModel& bound, const Eigen::VectorXd& theta,
                           const DrawSet& draws, int individual) {
    if (bound.spec.n_classes() != 1)
        throw NumericError("mixl_simulated_prob applies to single-class models");
    if (draws.R < 1) throw NumericError("R must be at least 1");
    double lp = class_panel_loglik(bound, &draws, theta, 0, individual, nullptr);
    return std::exp(lp);
}

double panel_loglik_binary(const Eigen::VectorXd& theta, const BoundModel& bound, int threads) {
    LikelihoodEvaluator ev(bound, nullptr, threads);
    return ev.loglik(theta);
}

double lcm_loglik(const Eigen::VectorXd& theta, const BoundModel& bound, int threads) {
    if (bound.n_random_dims > 0)
        throw NumericError("lcm_loglik applies to models without random coefficients");
    LikelihoodEvaluator ev(bound, nullptr, threads);
    return ev.loglik(theta);
}

double lcml_loglik(const Eigen::VectorXd& theta, const BoundModel& bound, const DrawSet& draws,
                   int threads) {
    LikelihoodEvaluator ev(bound, &draws, threads);
    return ev.loglik(theta);
}

}  // namespace hetchoice
