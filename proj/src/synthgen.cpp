#include "hetchoice/synthgen.hpp"

#include <array>
#include <cmath>
#include <numeric>

#include "hetchoice/draws.hpp"
#include "hetchoice/jenks.hpp"
#include "hetchoice/likelihood.hpp"

namespace hetchoice {

namespace {

// Default individual-level marginals (shares out of 172 observations).
std::vector<MarginalSpec> default_marginals() {
    auto cat = [](std::string name, std::vector<std::string> levels, std::vector<double> counts) {
        double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        for (double& c : counts) c /= total;
        return MarginalSpec{std::move(name), VarKind::OrdinalCategory, std::move(levels),
                            std::move(counts)};
    };
    auto bin = [](std::string name, double share) {
        return MarginalSpec{std::move(name), VarKind::BinaryIndicator, {}, {share}};
    };
    std::vector<MarginalSpec> m;
    m.push_back(cat("gender", {"gender_male", "gender_female"}, {117, 55}));
    m.push_back(cat("age_group", {"AGE_ONE", "AGE_TWO", "AGE_THREE", "AGE_FOUR"}, {36, 64, 57, 15}));
    m.push_back(cat("job", {"JOB_1", "JOB_2"}, {53, 119}));
    m.push_back(cat("education", {"EDU_ONE", "EDU_TWO", "EDU_THREE", "EDU_FOUR"}, {32, 28, 55, 57}));
    m.push_back(cat("license", {"DRIVE_ONE", "DRIVE_TWO", "DRIVE_THREE", "DRIVE_FOUR"},
                    {15, 26, 87, 44}));
    m.push_back(cat("driving_exp",
                    {"DRIVE_EXP_ONE", "DRIVE_EXP_TWO", "DRIVE_EXP_THREE", "DRIVE_EXP_FOUR"},
                    {31, 26, 49, 66}));
    m.push_back(bin("exp_give_before", 86.0 / 172.0));
    m.push_back(bin("famAV", 139.0 / 172.0));
    return m;
}

int draw_categorical(RngStream& stream, const std::vector<double>& shares) {
    double u = stream.next_u01();
    double cum = 0.0;
    for (std::size_t l = 0; l < shares.size(); ++l) {
        cum += shares[l];
        if (u <= cum) return static_cast<int>(l) + 1;
    }
    return static_cast<int>(shares.size());
}

}  // namespace

PopulationSpec PopulationSpec::defaults() {
    PopulationSpec spec;
    spec.n_individuals = 68;
    spec.total_observations = 172;
    spec.marginals = default_marginals();
    return spec;
}

PopulationSpec population_spec_from_json(const nlohmann::json& j) {
    PopulationSpec spec = PopulationSpec::defaults();
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "n_individuals")
            spec.n_individuals = it->get<int>();
        else if (key == "obs_per_individual") {
            spec.obs_per_individual = it->get<int>();
            spec.total_observations.reset();
        } else if (key == "total_observations")
            spec.total_observations = it->get<long long>();
        else if (key == "seed")
            spec.seed = it->get<std::uint64_t>();
        else if (key == "marginals") {
            spec.marginals.clear();
            for (const auto& m : *it) {
                MarginalSpec ms;
                ms.variable = m.at("variable").get<std::string>();
                ms.kind = var_kind_from_string(m.at("kind").get<std::string>());
                if (m.contains("levels")) ms.levels = m["levels"].get<std::vector<std::string>>();
                ms.shares = m.at("shares").get<std::vector<double>>();
                spec.marginals.push_back(std::move(ms));
            }
        } else
            throw SpecError("unknown key '" + key + "' in population spec");
    }
    for (const auto& m : spec.marginals) {
        double total = std::accumulate(m.shares.begin(), m.shares.end(), 0.0);
        if (m.kind == VarKind::OrdinalCategory && std::abs(total - 1.0) > 1e-9)
            throw SpecError("marginal shares of '" + m.variable + "' must sum to 1");
        if (m.kind == VarKind::BinaryIndicator &&
            (m.shares.size() != 1 || m.shares[0] < 0.0 || m.shares[0] > 1.0))
            throw SpecError("binary marginal '" + m.variable + "' needs one share in [0,1]");
    }
    return spec;
}

std::array<int, 4> scenario_cell(int scenario_id) {
    if (scenario_id < 1 || scenario_id > 16)
        throw NumericError("scenario_id must lie in 1..16");
    // (weather_rainy, night, multitasking, congestion_heavy); two blocks of
    // eight covering the full 2^4 factorial. Night multitasking sits at
    // scenarios 3, 7, 11, 15; rainy light-traffic cells at 13..16.
    static constexpr std::array<std::array<int, 4>, 16> kCells = {{
        {0, 0, 1, 1}, {0, 0, 0, 0}, {0, 1, 1, 0}, {0, 1, 0, 0},
        {0, 0, 1, 0}, {0, 0, 0, 1}, {0, 1, 1, 1}, {0, 1, 0, 1},
        {1, 0, 1, 1}, {1, 0, 0, 1}, {1, 1, 1, 1}, {1, 1, 0, 1},
        {1, 0, 1, 0}, {1, 0, 0, 0}, {1, 1, 1, 0}, {1, 1, 0, 0},
    }};
    return kCells[static_cast<std::size_t>(scenario_id - 1)];
}

Dataset generate_population(const PopulationSpec& spec_in) {
    PopulationSpec spec = spec_in;
    if (spec.marginals.empty()) spec.marginals = default_marginals();
    if (spec.n_individuals < 1) throw SpecError("population needs at least one individual");

    std::vector<VariableDef> defs;
    for (const auto& m : spec.marginals) {
        if (m.kind == VarKind::OrdinalCategory)
            defs.push_back({m.variable, VarKind::OrdinalCategory, m.levels, "dimensionless", {}});
        else
            defs.push_back({m.variable, VarKind::BinaryIndicator, {}, "dimensionless", {}});
    }
    defs.push_back({"LCI", VarKind::ContinuousScore, {}, "rotter-score", {{0.0, 13.0}}});
    defs.push_back({"manual_acceleration", VarKind::ContinuousScore, {}, "standardised", {}});
    defs.push_back({"dexp_lt5yr", VarKind::BinaryIndicator, {}, "dimensionless", {}});
    std::size_t lci_col = spec.marginals.size();
    std::size_t acc_col = lci_col + 1;
    std::size_t lt5_col = lci_col + 2;
    // scenario indicators
    std::size_t scen0 = defs.size();
    for (const char* name :
         {"weather_rainy", "weather_clear", "night", "day", "multitasking", "congestion_heavy"})
        defs.push_back({name, VarKind::BinaryIndicator, {}, "dimensionless", {}});

    // Observation counts per individual.
    long long total = spec.total_observations
                          ? *spec.total_observations
                          : static_cast<long long>(spec.n_individuals) * spec.obs_per_individual;
    if (total < spec.n_individuals)
        throw SpecError("total observations must cover every individual at least once");
    std::vector<int> obs_count(static_cast<std::size_t>(spec.n_individuals),
                               static_cast<int>(total / spec.n_individuals));
    for (long long i = 0; i < total % spec.n_individuals; ++i) obs_count[static_cast<std::size_t>(i)] += 1;

    // Balanced scenario pool: repeat 1..16 and shuffle, so the factorial is
    // exhausted and replication stays near-equal.
    std::vector<int> scenario_pool(static_cast<std::size_t>(total));
    for (long long i = 0; i < total; ++i) scenario_pool[static_cast<std::size_t>(i)] =
        static_cast<int>(i % 16) + 1;
    RngStream shuffle_stream(spec.seed, 0, 3);
    for (std::size_t i = scenario_pool.size(); i > 1; --i)
        std::swap(scenario_pool[i - 1], scenario_pool[shuffle_stream.next_below(i)]);

    std::vector<Observation> rows;
    rows.reserve(static_cast<std::size_t>(total));
    std::size_t pool_pos = 0;
    for (int i = 0; i < spec.n_individuals; ++i) {
        RngStream person(spec.seed, static_cast<std::uint64_t>(i) + 1, 1);
        std::vector<double> base(defs.size(), 0.0);
        std::size_t exp_group = 0;
        for (std::size_t v = 0; v < spec.marginals.size(); ++v) {
            const auto& m = spec.marginals[v];
            if (m.kind == VarKind::OrdinalCategory) {
                int level = draw_categorical(person, m.shares);
                base[v] = static_cast<double>(level);
                if (m.variable == "driving_exp") exp_group = static_cast<std::size_t>(level);
            } else {
                base[v] = person.next_u01() < m.shares[0] ? 1.0 : 0.0;
            }
        }
        base[lci_col] = static_cast<double>(person.next_below(14));  // integer score 0..13
        base[lt5_col] = (exp_group == 1 || exp_group == 2) ? 1.0 : 0.0;

        RngStream traits(spec.seed, static_cast<std::uint64_t>(i) + 1, 2);
        for (int t = 0; t < obs_count[static_cast<std::size_t>(i)]; ++t) {
            Observation o;
            o.individual_id = i + 1;
            o.scenario_id = scenario_pool[pool_pos++];
            o.covariates = base;
            o.covariates[acc_col] = inverse_normal_cdf(traits.next_u01());
            auto cell = scenario_cell(o.scenario_id);
            o.covariates[scen0 + 0] = cell[0];
            o.covariates[scen0 + 1] = 1.0 - cell[0];
            o.covariates[scen0 + 2] = cell[1];
            o.covariates[scen0 + 3] = 1.0 - cell[1];
            o.covariates[scen0 + 4] = cell[2];
            o.covariates[scen0 + 5] = cell[3];
            rows.push_back(std::move(o));
        }
    }
    return Dataset::from_observations(std::move(defs), std::move(rows));
}

std::vector<CodingRule> default_coding_rules() {
    std::vector<CodingRule> rules;
    auto dummy = [&](const std::string& var, const std::string& ref) {
        CodingRule r;
        r.type = CodingRule::Type::Dummy;
        r.variable = var;
        r.reference_level = ref;
        rules.push_back(r);
    };
    auto compound = [&](const std::string& name, std::vector<std::string> of) {
        CodingRule r;
        r.type = CodingRule::Type::Compound;
        r.name = name;
        r.operands = std::move(of);
        rules.push_back(r);
    };
    dummy("gender", "gender_female");  // adds gender_male
    dummy("gender", "gender_male");    // adds gender_female
    dummy("age_group", "AGE_ONE");
    dummy("job", "JOB_1");
    dummy("education", "EDU_FOUR");
    dummy("license", "DRIVE_ONE");
    dummy("driving_exp", "DRIVE_EXP_FOUR");
    compound("multitasking_night", {"multitasking", "night"});
    compound("night_rain_highcongestion", {"night", "weather_rainy", "congestion_heavy"});
    compound("male_with_Glicense", {"gender_male", "DRIVE_THREE"});
    compound("exp_give_before_college_education", {"exp_give_before", "EDU_ONE"});
    compound("lt5yr_dexp_day_sun", {"dexp_lt5yr", "day", "weather_clear"});
    return rules;
}

Dataset simulate_binary_choices(const Dataset& population, const ModelSpec& truth_spec,
                                const Eigen::VectorXd& truth_params, std::uint64_t seed) {
    BoundModel bound;
    {
        // Outcomes are being generated, so bind against a copy that carries a
        // placeholder choice column.
        std::vector<Observation> rows = population.observations();
        for (auto& o : rows) o.choice_y = 0;
        Dataset with_y = Dataset::from_observations(population.variable_defs(), std::move(rows));
        bound = bind_spec(truth_spec, with_y);
    }
    if (truth_params.size() != bound.layout.size())
        throw SpecError("truth parameter vector does not match the spec layout");

    const int Z = truth_spec.n_classes();
    std::vector<Observation> rows = population.observations();

    for (std::size_t i = 0; i < bound.individuals.size(); ++i) {
        const auto& block = bound.individuals[i];
        RngStream structural(seed, i + 1, 10);  // class + coefficient draws
        RngStream choices(seed, i + 1, 11);     // Bernoulli outcomes

        int z = 0;
        if (Z > 1) {
            Eigen::VectorXd scores(Z - 1);
            for (int c = 0; c < Z - 1; ++c) {
                auto [moff, mk] = bound.layout.membership_params[c];
                double v = 0.0;
                for (int j = 0; j < mk; ++j)
                    v += bound.membership_W[c](static_cast<int>(i), j) * truth_params(moff + j);
                scores(c) = v;
            }
            Eigen::VectorXd probs = membership_probs(scores);
            double u = structural.next_u01();
            double cum = 0.0;
            z = Z - 1;
            for (int c = 0; c < Z; ++c) {
                cum += probs(c);
                if (u <= cum) {
                    z = c;
                    break;
                }
            }
        }

        // One realisation of the class's random coefficients per individual.
        const auto& rc_cols = bound.rc_col[static_cast<std::size_t>(z)];
        std::vector<double> coef_shift(rc_cols.size(), 0.0);
        for (std::size_t d = 0; d < rc_cols.size(); ++d) {
            double sd = truth_params(bound.layout.sd_params[static_cast<std::size_t>(z)][d]);
            coef_shift[d] = sd * inverse_normal_cdf(structural.next_u01());
        }

        auto [off, kz] = bound.layout.class_utilities[static_cast<std::size_t>(z)];
        const auto& X = bound.class_X[static_cast<std::size_t>(z)];
        for (std::size_t t = 0; t < block.count; ++t) {
            int row = static_cast<int>(block.first + t);
            double v = 0.0;
            for (int j = 0; j < kz; ++j) v += X(row, j) * truth_params(off + j);
            for (std::size_t d = 0; d < rc_cols.size(); ++d)
                v += coef_shift[d] * X(row, rc_cols[d]);
            rows[static_cast<std::size_t>(row)].choice_y =
                choices.next_u01() < binary_logit_prob(v) ? 1 : 0;
        }
    }
    return Dataset::from_observations(population.variable_defs(), std::move(rows));
}

Dataset simulate_proportions(const Dataset& population, const ModelSpec& truth_spec,
                             const Eigen::VectorXd& truth_params, double noise_sd,
                             std::uint64_t seed, const std::vector<double>& breaks) {
    if (truth_spec.family != Family::LR)
        throw SpecError("simulate_proportions needs an LR truth spec");
    if (noise_sd < 0.0) throw SpecError("noise sd must be non-negative");

    // Bind through a placeholder outcome to materialise the design.
    BoundModel bound;
    {
        std::vector<Observation> rows = population.observations();
        for (auto& o : rows) o.auto_proportion = 0.0;
        Dataset tmp = Dataset::from_observations(population.variable_defs(), std::move(rows));
        bound = bind_spec(truth_spec, tmp);
    }
    if (truth_params.size() != bound.layout.size())
        throw SpecError("truth parameter vector does not match the spec layout");

    std::vector<Observation> rows = population.observations();
    const auto& X = bound.class_X[0];
    auto [off, kz] = bound.layout.class_utilities[0];
    for (std::size_t i = 0; i < bound.individuals.size(); ++i) {
        const auto& block = bound.individuals[i];
        RngStream noise(seed, i + 1, 12);
        for (std::size_t t = 0; t < block.count; ++t) {
            int row = static_cast<int>(block.first + t);
            double v = 0.0;
            for (int j = 0; j < kz; ++j) v += X(row, j) * truth_params(off + j);
            if (noise_sd > 0.0) v += noise_sd * inverse_normal_cdf(noise.next_u01());
            double prop = std::min(1.0, std::max(0.0, v));
            rows[static_cast<std::size_t>(row)].auto_proportion = prop;
            rows[static_cast<std::size_t>(row)].ordinal_category = classify_value(prop, breaks);
        }
    }
    return Dataset::from_observations(population.variable_defs(), std::move(rows));
}

Dataset simulate_ordinal_choices(const Dataset& population, const ModelSpec& truth_spec,
                                 const Eigen::VectorXd& truth_params, std::uint64_t seed) {
    if (truth_spec.family != Family::OL)
        throw SpecError("simulate_ordinal_choices needs an OL truth spec");
    BoundModel bound;
    {
        std::vector<Observation> rows = population.observations();
        for (auto& o : rows) o.ordinal_category = 1;
        Dataset tmp = Dataset::from_observations(population.variable_defs(), std::move(rows));
        bound = bind_spec(truth_spec, tmp);
    }
    if (truth_params.size() != bound.layout.size())
        throw SpecError("truth parameter vector does not match the spec layout");

    double tau1 = truth_params(bound.layout.tau1);
    Eigen::VectorXd deltas(static_cast<Eigen::Index>(bound.layout.deltas.size()));
    for (std::size_t d = 0; d < bound.layout.deltas.size(); ++d)
        deltas(static_cast<Eigen::Index>(d)) = truth_params(bound.layout.deltas[d]);

    std::vector<Observation> rows = population.observations();
    const auto& X = bound.class_X[0];
    auto [off, kz] = bound.layout.class_utilities[0];
    for (std::size_t i = 0; i < bound.individuals.size(); ++i) {
        const auto& block = bound.individuals[i];
        RngStream stream(seed, i + 1, 13);
        for (std::size_t t = 0; t < block.count; ++t) {
            int row = static_cast<int>(block.first + t);
            double u = 0.0;
            for (int j = 0; j < kz; ++j) u += X(row, j) * truth_params(off + j);
            Eigen::VectorXd probs = ordinal_probs(u, tau1, deltas);
            double x = stream.next_u01();
            double cum = 0.0;
            int category = static_cast<int>(probs.size());
            for (int k = 0; k < probs.size(); ++k) {
                cum += probs(k);
                if (x <= cum) {
                    category = k + 1;
                    break;
                }
            }
            rows[static_cast<std::size_t>(row)].ordinal_category = category;
        }
    }
    return Dataset::from_observations(population.variable_defs(), std::move(rows));
}

}  // namespace hetchoice
