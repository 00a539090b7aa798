#pragma once

#include <array>
#include <optional>

#include "hetchoice/dataset.hpp"
#include "hetchoice/model_spec.hpp"

namespace hetchoice {

/// Marginal distribution of one generated individual-level variable.
struct MarginalSpec {
    std::string variable;
    VarKind kind = VarKind::OrdinalCategory;
    std::vector<std::string> levels;  // categorical levels, or {p1} for binary share
    std::vector<double> shares;       // must sum to 1
};

/// Design of a synthetic population: covariate marginals, the 16-cell scenario
/// factorial, and panel shape.
struct PopulationSpec {
    int n_individuals = 68;
    int obs_per_individual = 3;
    // When set, observations are spread as evenly as possible instead; the
    /// shape n=68 / total=172 mirrors the reference descriptive statistics.
    std::optional<long long> total_observations;
    std::uint64_t seed = 1;
    std::vector<MarginalSpec> marginals;  // empty = built-in defaults

    static PopulationSpec defaults();
};

PopulationSpec population_spec_from_json(const nlohmann::json& j);

/// Scenario factorial: id 1..16 -> (weather_rainy, night, multitasking,
/// congestion_heavy). Scenarios 3, 7, 11, 15 combine night with multitasking.
std::array<int, 4> scenario_cell(int scenario_id);

/// Covariates only; scenarios are assigned by a balanced shuffle over the
/// 16-cell factorial, so every cell appears once the sample is large enough.
/// Fully deterministic given the seed.
Dataset generate_population(const PopulationSpec& spec);

/// Default coding rules deriving the dummy and compound columns the shipped
/// model specs reference (multitasking_night, male_with_Glicense, ...).
std::vector<CodingRule> default_coding_rules();

/// Draws binary choices from the family's own probability kernel. Latent
/// class and random-coefficient realisations are drawn once per individual.
Dataset simulate_binary_choices(const Dataset& population, const ModelSpec& truth_spec,
                                const Eigen::VectorXd& truth_params, std::uint64_t seed);

/// Linear predictor plus Gaussian noise, clamped to [0,1]; the ordinal
/// category comes from classify_value against the supplied bounds.
Dataset simulate_proportions(const Dataset& population, const ModelSpec& truth_spec,
                             const Eigen::VectorXd& truth_params, double noise_sd,
                             std::uint64_t seed,
                             const std::vector<double>& breaks = {0.39, 0.66, 1.0});

/// Ordinal categories drawn from the ordered-logit kernel itself; used for
/// OL parameter-recovery runs.
Dataset simulate_ordinal_choices(const Dataset& population, const ModelSpec& truth_spec,
                                 const Eigen::VectorXd& truth_params, std::uint64_t seed);

}  // namespace hetchoice
