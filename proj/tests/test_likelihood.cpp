#include <doctest.h>

#include <cmath>

#include "hetchoice/likelihood.hpp"
#include "oracles.hpp"

using namespace hetchoice;

namespace {

// A one-class model over (CONSTANT [, x]) with the requested panel shape.
BoundModel binary_bound(const std::vector<int>& y, const std::vector<double>& x,
                        const std::vector<int>& obs_per_ind, bool with_rc) {
    std::string spec_text = with_rc
                                ? R"({"family":"MIXL","classes":[{"utilities":[
                                      {"coef":"asc","variable":"CONSTANT"},
                                      {"coef":"b","variable":"x"}],
                                      "random_coefs":[{"coef":"b","sd_coef":"s"}]}]})"
                                : R"({"family":"BL","classes":[{"utilities":[
                                      {"coef":"asc","variable":"CONSTANT"},
                                      {"coef":"b","variable":"x"}]}]})";
    ModelSpec spec = parse_model_spec(spec_text);
    std::vector<VariableDef> defs = {{"x", VarKind::ContinuousScore, {}, "dimensionless", {}}};
    std::vector<Observation> rows;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < obs_per_ind.size(); ++i) {
        for (int t = 0; t < obs_per_ind[i]; ++t) {
            Observation o;
            o.individual_id = static_cast<long long>(i) + 1;
            o.scenario_id = 1;
            o.choice_y = y[pos];
            o.covariates = {x[pos]};
            ++pos;
            rows.push_back(o);
        }
    }
    REQUIRE(pos == y.size());
    return bind_spec(spec, Dataset::from_observations(defs, rows));
}

DrawSet fixed_draws(int n_ind, std::vector<double> values_per_draw, int n_dims = 1) {
    DrawSet set;
    set.n_individuals = n_ind;
    set.R = static_cast<int>(values_per_draw.size()) / n_dims;
    set.n_dims = n_dims;
    for (int i = 0; i < n_ind; ++i)
        for (double v : values_per_draw) set.values.push_back(v);
    return set;
}

}  // namespace

TEST_CASE("binary logit probability") {
    CHECK(binary_logit_prob(0.0) == 0.5);
    // CDF oracle (50-digit evaluation): logistic(2.33) = 0.9113313367452667.
    CHECK(binary_logit_prob(2.33) == doctest::Approx(0.9113313367452667).epsilon(1e-12));
    SUBCASE("saturates without overflow") {
        double p = binary_logit_prob(50.0);
        CHECK(p <= 1.0);
        CHECK(1.0 - p < 1e-20);
        CHECK(std::isfinite(binary_logit_prob(800.0)));
        CHECK(binary_logit_prob(-800.0) >= 0.0);
        CHECK(log_logistic(50.0) < 0.0);  // stays strictly inside the unit interval in log space
    }
    SUBCASE("complement identity") {
        for (double v : {-31.4, -2.0, -0.3, 0.0, 0.7, 5.0, 44.0})
            CHECK(std::abs(binary_logit_prob(v) + binary_logit_prob(-v) - 1.0) <= 1e-15);
    }
    CHECK_THROWS_AS(binary_logit_prob(std::nan("")), NumericError);
}

TEST_CASE("panel binary log-likelihood") {
    SUBCASE("intercept-only closed form on the 129/43 aggregate") {
        std::vector<int> y(172, 1);
        std::fill(y.begin() + 129, y.end(), 0);
        std::vector<double> x(172, 0.0);
        std::vector<int> opi(172, 1);
        BoundModel bound = binary_bound(y, x, opi, false);
        Eigen::VectorXd theta(2);
        theta << std::log(3.0), 0.0;
        // Enumeration oracle: 129*ln(0.75) + 43*ln(0.25) = -96.72164487443504.
        CHECK(panel_loglik_binary(theta, bound) ==
              doctest::Approx(-96.72164487443504).epsilon(1e-12));
    }
    SUBCASE("zero parameters give n*ln(0.5)") {
        std::vector<int> y(172, 1);
        std::vector<double> x(172, 0.0);
        std::vector<int> opi(172, 1);
        BoundModel bound = binary_bound(y, x, opi, false);
        CHECK(panel_loglik_binary(Eigen::VectorXd::Zero(2), bound) ==
              doctest::Approx(172.0 * std::log(0.5)).epsilon(1e-14));
    }
    SUBCASE("thread count does not change the bits") {
        std::vector<int> y, opi;
        std::vector<double> x;
        RngStream stream(3);
        for (int i = 0; i < 37; ++i) {
            opi.push_back(1 + static_cast<int>(stream.next_below(3)));
            for (int t = 0; t < opi.back(); ++t) {
                y.push_back(static_cast<int>(stream.next_below(2)));
                x.push_back(stream.next_u01() * 2 - 1);
            }
        }
        BoundModel bound = binary_bound(y, x, opi, false);
        Eigen::VectorXd theta(2);
        theta << 0.3, -0.8;
        LikelihoodEvaluator one(bound, nullptr, 1);
        LikelihoodEvaluator eight(bound, nullptr, 8);
        CHECK(one.loglik(theta) == eight.loglik(theta));
        CHECK(one.score(theta) == eight.score(theta));
    }
}

TEST_CASE("mixl simulated probability") {
    SUBCASE("sd = 0 collapses to the product of logit probabilities") {
        BoundModel bound = binary_bound({1, 0, 1}, {0.5, -1.0, 2.0}, {3}, true);
        Eigen::VectorXd theta(3);
        theta << 0.4, 0.9, 0.0;
        DrawSet draws = fixed_draws(1, {0.3, -1.7, 0.9, 2.2, -0.4});
        double expected = binary_logit_prob(0.4 + 0.9 * 0.5) *
                          (1.0 - binary_logit_prob(0.4 - 0.9)) *
                          binary_logit_prob(0.4 + 0.9 * 2.0);
        CHECK(mixl_simulated_prob(bound, theta, draws, 0) ==
              doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("R = 1 with xi = 0 equals the probability at the mean") {
        BoundModel bound = binary_bound({1}, {1.0}, {1}, true);
        Eigen::VectorXd theta(3);
        theta << 0.0, 1.0, 0.7;
        DrawSet draws = fixed_draws(1, {0.0});
        CHECK(mixl_simulated_prob(bound, theta, draws, 0) ==
              doctest::Approx(binary_logit_prob(1.0)).epsilon(1e-15));
    }
    SUBCASE("matches the 64-node Gauss-Hermite oracle") {
        // Single observation, utility beta with beta ~ N(1,1), y = 1;
        // oracle value 0.6967346701436833.
        BoundModel bound = binary_bound({1}, {1.0}, {1}, true);
        Eigen::VectorXd theta(3);
        theta << 0.0, 1.0, 1.0;
        DrawConfig config;
        config.count = 10000;
        config.burn_in = 0;
        DrawSet draws = standard_normal_draws(1, config, 1);
        double sim = mixl_simulated_prob(bound, theta, draws, 0);
        oracles::GaussHermite gh(64);
        double quad = gh.normal_mean([](double b) { return oracles::logistic(b); }, 1.0, 1.0);
        CHECK(quad == doctest::Approx(0.6967346701436833).epsilon(1e-10));
        CHECK(std::abs(sim - quad) <= 1e-3);
    }
}

TEST_CASE("membership probabilities") {
    SUBCASE("all-zero scores split evenly") {
        Eigen::VectorXd probs = membership_probs(Eigen::VectorXd::Zero(1));
        CHECK(probs(0) == 0.5);
        CHECK(probs(1) == 0.5);
    }
    SUBCASE("reference-table crossover at LCI = 27.7/9.77") {
        double lci = 2.8352;
        Eigen::VectorXd score(1);
        score(0) = -27.7 + 9.77 * lci;
        Eigen::VectorXd probs = membership_probs(score);
        CHECK(probs(0) == doctest::Approx(0.5).epsilon(1e-3));
        CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("score 11.38 saturates the first class") {
        Eigen::VectorXd score(1);
        score(0) = -27.7 + 9.77 * 4.0;
        CHECK(membership_probs(score)(0) > 0.9999);
    }
}

TEST_CASE("latent class log-likelihood") {
    std::vector<int> y = {1, 0, 1, 1};
    std::vector<double> x = {0.2, -0.4, 1.1, 0.0};
    std::vector<int> opi = {2, 2};

    SUBCASE("single class equals the plain binary panel exactly") {
        BoundModel bound = binary_bound(y, x, opi, false);
        Eigen::VectorXd theta(2);
        theta << 0.25, -0.75;
        CHECK(lcm_loglik(theta, bound) == panel_loglik_binary(theta, bound));
    }

    SUBCASE("two identical classes equal one class for any membership") {
        std::string text = R"({"family":"LCM","classes":[
            {"utilities":[{"coef":"a1","variable":"CONSTANT"},{"coef":"b1","variable":"x"}]},
            {"utilities":[{"coef":"a2","variable":"CONSTANT"},{"coef":"b2","variable":"x"}]}],
            "membership":[[{"coef":"m0","variable":"CONSTANT"}]]})";
        ModelSpec spec = parse_model_spec(text);
        std::vector<VariableDef> defs = {{"x", VarKind::ContinuousScore, {}, "dimensionless", {}}};
        std::vector<Observation> rows;
        std::size_t pos = 0;
        for (std::size_t i = 0; i < opi.size(); ++i)
            for (int t = 0; t < opi[i]; ++t) {
                Observation o;
                o.individual_id = static_cast<long long>(i) + 1;
                o.scenario_id = 1;
                o.choice_y = y[pos];
                o.covariates = {x[pos]};
                ++pos;
                rows.push_back(o);
            }
        BoundModel bound = bind_spec(spec, Dataset::from_observations(defs, rows));
        BoundModel plain = binary_bound(y, x, opi, false);
        Eigen::VectorXd beta(2);
        beta << 0.25, -0.75;
        for (double alpha : {-3.0, 0.0, 1.7}) {
            Eigen::VectorXd theta(5);
            theta << beta(0), beta(1), beta(0), beta(1), alpha;
            CHECK(lcm_loglik(theta, bound) ==
                  doctest::Approx(panel_loglik_binary(beta, plain)).epsilon(1e-14));
        }
    }

    SUBCASE("direct mixture arithmetic: ln(0.55)") {
        // One individual, one observation; class probabilities 0.9 and 0.2
        // under a 50/50 membership give a mixture likelihood of 0.55.
        std::string text = R"({"family":"LCM","classes":[
            {"utilities":[{"coef":"a1","variable":"CONSTANT"}]},
            {"utilities":[{"coef":"a2","variable":"CONSTANT"}]}],
            "membership":[[{"coef":"m0","variable":"CONSTANT"}]]})";
        ModelSpec spec = parse_model_spec(text);
        std::vector<Observation> rows(1);
        rows[0].individual_id = 1;
        rows[0].scenario_id = 1;
        rows[0].choice_y = 1;
        BoundModel bound = bind_spec(spec, Dataset::from_observations({}, rows));
        Eigen::VectorXd theta(3);
        theta << std::log(9.0), std::log(0.25), 0.0;  // P1 = 0.9, P2 = 0.2, pi = (0.5, 0.5)
        CHECK(lcm_loglik(theta, bound) == doctest::Approx(std::log(0.55)).epsilon(1e-12));
    }
}

TEST_CASE("latent class mixed logit reductions and enumeration oracle") {
    std::string text = R"({"family":"LCML","classes":[
        {"utilities":[{"coef":"a1","variable":"CONSTANT"},{"coef":"b1","variable":"x"}],
         "random_coefs":[{"coef":"b1","sd_coef":"s1"}]},
        {"utilities":[{"coef":"a2","variable":"CONSTANT"},{"coef":"b2","variable":"x"}]}],
        "membership":[[{"coef":"m0","variable":"CONSTANT"}]]})";
    ModelSpec spec = parse_model_spec(text);
    std::vector<VariableDef> defs = {{"x", VarKind::ContinuousScore, {}, "dimensionless", {}}};
    std::vector<int> y = {1, 0, 1, 1};
    std::vector<double> x = {0.2, -0.4, 1.1, 0.0};
    std::vector<Observation> rows;
    std::size_t pos = 0;
    for (int i = 0; i < 2; ++i)
        for (int t = 0; t < 2; ++t) {
            Observation o;
            o.individual_id = i + 1;
            o.scenario_id = 1;
            o.choice_y = y[pos];
            o.covariates = {x[pos]};
            ++pos;
            rows.push_back(o);
        }
    BoundModel bound = bind_spec(spec, Dataset::from_observations(defs, rows));

    SUBCASE("sd = 0 reduces to the latent class model within 1e-12") {
        ModelSpec lcm_spec = parse_model_spec(R"({"family":"LCM","classes":[
            {"utilities":[{"coef":"a1","variable":"CONSTANT"},{"coef":"b1","variable":"x"}]},
            {"utilities":[{"coef":"a2","variable":"CONSTANT"},{"coef":"b2","variable":"x"}]}],
            "membership":[[{"coef":"m0","variable":"CONSTANT"}]]})");
        BoundModel lcm_bound = bind_spec(lcm_spec, Dataset::from_observations(defs, rows));
        Eigen::VectorXd lcml_theta(6), lcm_theta(5);
        lcml_theta << 0.3, 0.8, -0.2, -0.6, 0.0, 0.4;  // s1 = 0
        lcm_theta << 0.3, 0.8, -0.2, -0.6, 0.4;
        DrawSet draws = fixed_draws(2, {-0.77, 0.31, 1.42});
        CHECK(std::abs(lcml_loglik(lcml_theta, bound, draws) - lcm_loglik(lcm_theta, lcm_bound)) <=
              1e-12);
    }

    SUBCASE("two draws, two classes match full enumeration") {
        Eigen::VectorXd theta(6);
        theta << 0.3, 0.8, -0.2, -0.6, 0.5, 0.4;  // a1 b1 a2 b2 s1 m0
        DrawSet draws = fixed_draws(2, {-1.0, 1.0});
        double pi1 = oracles::logistic(0.4);  // softmax over (m0, 0)
        double total = 0.0;
        pos = 0;
        for (int i = 0; i < 2; ++i) {
            double class1 = 0.0;
            for (double xi : {-1.0, 1.0}) {
                double prod = 1.0;
                for (int t = 0; t < 2; ++t) {
                    double v = 0.3 + (0.8 + 0.5 * xi) * x[pos + t];
                    double p = oracles::logistic(v);
                    prod *= y[pos + t] == 1 ? p : 1.0 - p;
                }
                class1 += 0.5 * prod;
            }
            double class2 = 1.0;
            for (int t = 0; t < 2; ++t) {
                double v = -0.2 - 0.6 * x[pos + t];
                double p = oracles::logistic(v);
                class2 *= y[pos + t] == 1 ? p : 1.0 - p;
            }
            total += std::log(pi1 * class1 + (1.0 - pi1) * class2);
            pos += 2;
        }
        CHECK(lcml_loglik(theta, bound, draws) == doctest::Approx(total).epsilon(1e-12));
    }
}

TEST_CASE("ordinal category probabilities") {
    SUBCASE("distributions sum to one") {
        RngStream stream(11);
        for (int trial = 0; trial < 200; ++trial) {
            double u = 4.0 * stream.next_u01() - 2.0;
            double tau1 = 3.0 * stream.next_u01() - 1.5;
            int extra = static_cast<int>(stream.next_below(3));
            Eigen::VectorXd deltas(1 + extra);
            for (int j = 0; j < deltas.size(); ++j) deltas(j) = 0.1 + 2.0 * stream.next_u01();
            Eigen::VectorXd p = ordinal_probs(u, tau1, deltas);
            CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
            for (int k = 0; k < p.size(); ++k) CHECK(p(k) >= 0.0);
        }
    }
    SUBCASE("utility at the first threshold puts half the mass below") {
        Eigen::VectorXd deltas(1);
        deltas << 1.3;
        Eigen::VectorXd p = ordinal_probs(0.7, 0.7, deltas);
        CHECK(p(0) == 0.5);
    }
    SUBCASE("logistic CDF oracle for the middle category") {
        Eigen::VectorXd deltas(1);
        deltas << 2.0;
        Eigen::VectorXd p = ordinal_probs(0.0, -1.0, deltas);
        // F(1) - F(-1) = 0.46211715726000976 (CDF oracle).
        CHECK(p(1) == doctest::Approx(0.46211715726000976).epsilon(1e-12));
    }
    SUBCASE("non-positive increments are an error") {
        Eigen::VectorXd deltas(1);
        deltas << 0.0;
        CHECK_THROWS_AS(ordinal_probs(0.0, 0.0, deltas), NumericError);
        deltas << -1.0;
        CHECK_THROWS_AS(ordinal_probs(0.0, 0.0, deltas), NumericError);
    }
}

TEST_CASE("ordinary least squares") {
    SUBCASE("exact line") {
        Eigen::MatrixXd x(3, 2);
        x << 1, 0, 1, 1, 1, 2;
        Eigen::VectorXd y(3);
        y << 1, 3, 5;
        OlsResult fit = ols_fit(x, y, {"intercept", "slope"});
        CHECK(fit.coefficients(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.coefficients(1) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant outcome explains nothing") {
        Eigen::MatrixXd x(4, 2);
        x << 1, 0, 1, 1, 1, 2, 1, 3;
        Eigen::VectorXd y = Eigen::VectorXd::Constant(4, 2.5);
        OlsResult fit = ols_fit(x, y, {"intercept", "slope"});
        CHECK(fit.coefficients(1) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(fit.r_squared == 0.0);
    }
    SUBCASE("random system matches the extended-precision normal equations") {
        RngStream stream(5);
        Eigen::MatrixXd x(50, 4);
        Eigen::VectorXd y(50);
        for (int i = 0; i < 50; ++i) {
            x(i, 0) = 1.0;
            for (int j = 1; j < 4; ++j) x(i, j) = 2.0 * stream.next_u01() - 1.0;
            y(i) = 3.0 * stream.next_u01();
        }
        OlsResult fit = ols_fit(x, y, {"c", "x1", "x2", "x3"});
        Eigen::VectorXd oracle = oracles::long_double_ols(x, y);
        for (int j = 0; j < 4; ++j) CHECK(std::abs(fit.coefficients(j) - oracle(j)) <= 1e-8);
    }
    SUBCASE("rank deficiency names the offending column") {
        Eigen::MatrixXd x(5, 3);
        for (int i = 0; i < 5; ++i) {
            x(i, 0) = 1.0;
            x(i, 1) = i;
            x(i, 2) = 2.0 * i;  // collinear with column 1
        }
        Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(5, 0, 1);
        CHECK_THROWS_WITH_AS(ols_fit(x, y, {"c", "a", "twice_a"}),
                             doctest::Contains("rank deficient"), NumericError);
    }
}

TEST_CASE("log-sum-exp keeps mixtures finite under extreme underflow") {
    // One class's panel probability underflows double precision; the mixture
    // log-likelihood must stay finite.
    std::string text = R"({"family":"LCM","classes":[
        {"utilities":[{"coef":"a1","variable":"CONSTANT"}]},
        {"utilities":[{"coef":"a2","variable":"CONSTANT"}]}],
        "membership":[[{"coef":"m0","variable":"CONSTANT"}]]})";
    ModelSpec spec = parse_model_spec(text);
    std::vector<Observation> rows;
    for (int t = 0; t < 20; ++t) {
        Observation o;
        o.individual_id = 1;
        o.scenario_id = 1;
        o.choice_y = 1;
        rows.push_back(o);
    }
    BoundModel bound = bind_spec(spec, Dataset::from_observations({}, rows));
    Eigen::VectorXd theta(3);
    theta << -60.0, 2.0, 0.0;  // class 1 panel probability ~ exp(-1200)
    double ll = lcm_loglik(theta, bound);
    CHECK(std::isfinite(ll));
}
