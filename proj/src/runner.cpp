#include "hetchoice/runner.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hetchoice/jenks.hpp"
#include "hetchoice/synthgen.hpp"

namespace hetchoice {

namespace {

std::filesystem::path sidecar_schema(const std::filesystem::path& data) {
    std::filesystem::path p = data;
    p.replace_extension(".vars.json");
    return p;
}

std::vector<VariableDef> load_schema_for(const std::filesystem::path& data,
                                         const std::optional<std::filesystem::path>& schema) {
    std::filesystem::path path = schema ? *schema : sidecar_schema(data);
    if (!std::filesystem::exists(path))
        throw SpecError("no variable schema found at '" + path.string() +
                        "' (pass --schema or ship a .vars.json sidecar)");
    return load_variable_defs(path);
}

nlohmann::ordered_json draws_config_json(const DrawConfig& d) {
    nlohmann::ordered_json j;
    j["count"] = d.count;
    j["method"] = d.method == DrawConfig::Method::Halton ? "halton" : "pseudo";
    j["seed"] = d.seed;
    j["burn_in"] = d.burn_in;
    if (!d.bases.empty()) j["bases"] = d.bases;
    return j;
}

nlohmann::ordered_json optimizer_config_json(const OptimizerConfig& c) {
    // Thread count is deliberately not echoed: results are identical for any
    // thread count, and manifests must be too.
    nlohmann::ordered_json j;
    j["grad_tol"] = c.grad_tol;
    j["max_iterations"] = c.max_iterations;
    j["restarts"] = c.restarts;
    j["restart_seed"] = c.restart_seed;
    return j;
}

struct TruthFile {
    ModelSpec spec;
    Eigen::VectorXd params;
    double noise_sd = 0.25;
    PopulationSpec population;
};

TruthFile load_truth(const std::filesystem::path& path) {
    nlohmann::ordered_json j = read_json_file(path);
    TruthFile truth;
    if (!j.contains("spec")) throw SpecError("truth file needs a 'spec' entry");
    if (j["spec"].is_string()) {
        std::filesystem::path spec_path = j["spec"].get<std::string>();
        if (spec_path.is_relative()) spec_path = path.parent_path() / spec_path;
        truth.spec = load_model_spec(spec_path);
    } else {
        truth.spec = parse_model_spec(j["spec"].dump());
    }
    truth.population = PopulationSpec::defaults();
    if (j.contains("population")) truth.population = population_spec_from_json(j["population"]);
    if (j.contains("noise_sd")) truth.noise_sd = j["noise_sd"].get<double>();

    ParameterLayout layout = make_layout(truth.spec, truth.spec.family == Family::OL ? 3 : 0);
    if (!j.contains("params")) throw SpecError("truth file needs a 'params' map");
    const auto& params = j["params"];
    truth.params = Eigen::VectorXd::Zero(layout.size());
    for (auto it = params.begin(); it != params.end(); ++it) {
        int idx = layout.index_of(it.key());
        if (idx < 0)
            throw SpecError("truth parameter '" + it.key() + "' does not appear in the spec");
        truth.params(idx) = it.value().get<double>();
    }
    for (const auto& name : layout.names) {
        if (!params.contains(name))
            throw SpecError("truth file is missing a value for parameter '" + name + "'");
    }
    return truth;
}

Dataset simulate_for_family(const TruthFile& truth, const PopulationSpec& pop,
                            std::uint64_t seed) {
    Dataset population = generate_population(pop);
    population = apply_coding(population, default_coding_rules());
    switch (truth.spec.family) {
        case Family::OL:
            return simulate_ordinal_choices(population, truth.spec, truth.params, seed);
        case Family::LR:
            return simulate_proportions(population, truth.spec, truth.params, truth.noise_sd, seed);
        default:
            return simulate_binary_choices(population, truth.spec, truth.params, seed);
    }
}

struct FitOutput {
    EstimationResult result;
    BoundModel bound;
    OptimizerConfig config;
    DrawConfig resolved_draws;
    bool used_draws = false;
};

FitOutput fit_model(const ModelSpec& spec_in, const Dataset& data, int threads,
                    std::optional<int> draws_override, std::optional<std::uint64_t> seed_override,
                    std::optional<int> max_iter, std::optional<double> tol,
                    std::optional<int> restarts) {
    FitOutput out;
    ModelSpec spec = spec_in;
    if (draws_override) spec.draws.count = *draws_override;
    if (seed_override) spec.draws.seed = *seed_override;
    out.resolved_draws = spec.draws;
    out.bound = bind_spec(spec, data);

    out.config.threads = threads;
    out.config.restarts =
        spec.family == Family::LCM || spec.family == Family::LCML ? 5 : 1;
    if (restarts) out.config.restarts = *restarts;
    if (max_iter) out.config.max_iterations = *max_iter;
    if (tol) out.config.grad_tol = *tol;
    out.config.restart_seed = spec.draws.seed;

    DrawSet draws;
    const DrawSet* draws_ptr = nullptr;
    if (out.bound.n_random_dims > 0) {
        draws = standard_normal_draws(out.bound.n_ind, spec.draws, out.bound.n_random_dims,
                                      threads);
        draws_ptr = &draws;
        out.used_draws = true;
    }
    LikelihoodEvaluator evaluator(out.bound, draws_ptr, threads);
    Eigen::VectorXd init = starting_values(out.bound, draws_ptr, threads);
    out.result = maximize_loglik(evaluator, init, out.config);
    return out;
}

}  // namespace

std::filesystem::path resolve_out_dir(const std::filesystem::path& requested) {
    if (requested != ".") return requested;
    if (const char* env = std::getenv("HETCHOICE_OUT_DIR")) return env;
    return requested;
}

int run_estimate(const EstimateArgs& args) {
    Family family = family_from_string(args.model);
    ModelSpec spec = load_model_spec(args.spec_path);
    if (spec.family != family)
        throw SpecError("--model " + args.model + " does not match the spec family " +
                        to_string(spec.family));
    auto schema = load_schema_for(args.data_path, args.schema_path);
    Dataset data = load_csv(args.data_path, schema);

    std::filesystem::path out_dir = resolve_out_dir(args.out_dir);
    std::filesystem::create_directories(out_dir);

    std::vector<std::filesystem::path> inputs = {args.spec_path, args.data_path};

    if (family == Family::LR) {
        BoundModel bound = bind_spec(spec, data);
        OlsResult ols = ols_fit(bound.class_X[0], bound.y_prop, bound.layout.names);
        nlohmann::ordered_json config;
        config["model"] = args.model;
        nlohmann::ordered_json manifest = make_manifest("estimate", config, inputs);
        nlohmann::ordered_json result_json = ols_result_to_json(ols, manifest);
        result_json["spec"] = spec.source;
        write_json_file(out_dir / "result.json", result_json);
        write_text_file(out_dir / "result.txt", render_parameter_table(result_json));
        return kExitOk;
    }

    FitOutput fit = fit_model(spec, data, args.threads, args.draws, args.seed,
                              args.max_iterations, args.grad_tol, args.restarts);

    nlohmann::ordered_json config;
    config["model"] = args.model;
    config["bic_n"] = args.bic_n;
    config["draws"] = draws_config_json(fit.resolved_draws);
    config["optimizer"] = optimizer_config_json(fit.config);
    nlohmann::ordered_json manifest = make_manifest("estimate", config, inputs);
    nlohmann::ordered_json result_json =
        estimation_result_to_json(fit.result, fit.bound, manifest, args.bic_n);
    write_json_file(out_dir / "result.json", result_json);
    write_text_file(out_dir / "result.txt", render_parameter_table(result_json));

    return fit.result.convergence.converged ? kExitOk : kExitNotConverged;
}

int run_recover(const RecoverArgs& args) {
    Family family = family_from_string(args.model);
    TruthFile truth = load_truth(args.truth_path);
    if (truth.spec.family != family)
        throw SpecError("--model " + args.model + " does not match the truth spec family " +
                        to_string(truth.spec.family));
    if (args.seeds < 1) throw SpecError("--seeds must be at least 1");

    PopulationSpec pop = truth.population;
    pop.n_individuals = args.n_individuals;
    pop.obs_per_individual = args.obs_per_individual;
    pop.total_observations.reset();

    const int p = static_cast<int>(truth.params.size());
    Eigen::MatrixXd estimates(args.seeds, p);
    Eigen::MatrixXd covered = Eigen::MatrixXd::Zero(args.seeds, p);
    std::vector<bool> seed_converged(static_cast<std::size_t>(args.seeds), false);
    std::vector<bool> thresholds_ordered(static_cast<std::size_t>(args.seeds), true);
    int converged_count = 0;

    for (int s = 0; s < args.seeds; ++s) {
        std::uint64_t seed = args.base_seed + static_cast<std::uint64_t>(s);
        PopulationSpec pop_s = pop;
        pop_s.seed = seed;
        Dataset data = simulate_for_family(truth, pop_s, seed);

        if (family == Family::LR) {
            BoundModel bound = bind_spec(truth.spec, data);
            OlsResult ols = ols_fit(bound.class_X[0], bound.y_prop, bound.layout.names);
            seed_converged[static_cast<std::size_t>(s)] = true;
            ++converged_count;
            for (int j = 0; j < p; ++j) {
                estimates(s, j) = ols.coefficients(j);
                covered(s, j) = std::abs(ols.coefficients(j) - truth.params(j)) <=
                                        2.0 * ols.robust_se(j)
                                    ? 1.0
                                    : 0.0;
            }
            continue;
        }

        FitOutput fit = fit_model(truth.spec, data, args.threads, args.draws, {}, {}, {},
                                  args.restarts);
        seed_converged[static_cast<std::size_t>(s)] = fit.result.convergence.converged;
        if (fit.result.convergence.converged) ++converged_count;
        for (int j = 0; j < p; ++j) {
            estimates(s, j) = fit.result.estimates(j);
            bool ok = fit.result.have_robust_cov &&
                      std::abs(fit.result.estimates(j) - truth.params(j)) <=
                          2.0 * fit.result.robust_se(j);
            covered(s, j) = ok ? 1.0 : 0.0;
        }
        for (int idx : fit.bound.layout.deltas)
            if (!(fit.result.estimates(idx) > 0.0))
                thresholds_ordered[static_cast<std::size_t>(s)] = false;
    }

    nlohmann::ordered_json config;
    config["model"] = args.model;
    config["n_individuals"] = args.n_individuals;
    config["obs_per_individual"] = args.obs_per_individual;
    config["seeds"] = args.seeds;
    config["base_seed"] = args.base_seed;
    nlohmann::ordered_json manifest = make_manifest("recover", config, {args.truth_path});

    nlohmann::ordered_json report;
    report["model"] = args.model;
    report["seeds"] = args.seeds;
    report["converged_seeds"] = converged_count;
    bool all_pass = true;
    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    ParameterLayout layout = make_layout(truth.spec, truth.spec.family == Family::OL ? 3 : 0);
    for (int j = 0; j < p; ++j) {
        double coverage = covered.col(j).mean();
        std::vector<double> biases;
        for (int s = 0; s < args.seeds; ++s) biases.push_back(estimates(s, j) - truth.params(j));
        std::sort(biases.begin(), biases.end());
        double median_bias = args.seeds % 2 == 1
                                 ? biases[static_cast<std::size_t>(args.seeds / 2)]
                                 : 0.5 * (biases[static_cast<std::size_t>(args.seeds / 2 - 1)] +
                                          biases[static_cast<std::size_t>(args.seeds / 2)]);
        nlohmann::ordered_json row;
        row["name"] = layout.names[static_cast<std::size_t>(j)];
        row["truth"] = truth.params(j);
        row["coverage"] = coverage;
        row["median_bias"] = median_bias;
        params.push_back(std::move(row));
        if (coverage < 0.9) all_pass = false;
    }
    report["parameters"] = std::move(params);
    bool ordered_all = std::all_of(thresholds_ordered.begin(), thresholds_ordered.end(),
                                   [](bool b) { return b; });
    if (family == Family::OL) report["thresholds_ordered_every_seed"] = ordered_all;
    report["pass"] = all_pass;
    report["manifest"] = manifest;

    std::filesystem::path out_dir = resolve_out_dir(args.out_dir);
    std::filesystem::create_directories(out_dir);
    write_json_file(out_dir / "recover_report.json", report);
    return all_pass ? kExitOk : kExitInputError;
}

int run_simulate(const SimulateArgs& args) {
    TruthFile truth = load_truth(args.truth_path);
    PopulationSpec pop = truth.population;
    if (args.n_individuals) {
        pop.n_individuals = *args.n_individuals;
        pop.total_observations.reset();  // panel shape follows obs_per_individual again
    }
    if (args.obs_per_individual) {
        pop.obs_per_individual = *args.obs_per_individual;
        pop.total_observations.reset();
    }
    if (args.total_observations) pop.total_observations = *args.total_observations;
    pop.seed = args.seed;

    Dataset data = simulate_for_family(truth, pop, args.seed);

    std::filesystem::path out_dir = resolve_out_dir(args.out_dir);
    std::filesystem::create_directories(out_dir);
    save_csv(data, out_dir / "data.csv");
    save_variable_defs(data.variable_defs(), out_dir / "data.vars.json");

    nlohmann::ordered_json config;
    config["family"] = to_string(truth.spec.family);
    config["n_individuals"] = pop.n_individuals;
    if (pop.total_observations) config["total_observations"] = *pop.total_observations;
    else config["obs_per_individual"] = pop.obs_per_individual;
    config["seed"] = args.seed;
    nlohmann::ordered_json truth_echo;
    ParameterLayout layout = make_layout(truth.spec, truth.spec.family == Family::OL ? 3 : 0);
    for (int j = 0; j < truth.params.size(); ++j)
        truth_echo[layout.names[static_cast<std::size_t>(j)]] = truth.params(j);
    config["truth_params"] = truth_echo;
    if (truth.spec.family == Family::LR) config["noise_sd"] = truth.noise_sd;
    config["notes"] = nlohmann::ordered_json::array(
        {"LCI is drawn as a uniform integer score 0..13 (distribution not reported in the "
         "reference tables)",
         "manual_acceleration is a standardised normal deviate; units are unreported"});
    nlohmann::ordered_json manifest = make_manifest("simulate", config, {args.truth_path});
    write_json_file(out_dir / "manifest.json", manifest);
    return kExitOk;
}

int run_classify(const ClassifyArgs& args) {
    std::ifstream in(args.data_path);
    if (!in) throw CsvError("cannot open '" + args.data_path.string() + "'");
    std::vector<double> values;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            std::size_t pos = 0;
            double v = std::stod(line, &pos);
            if (pos != line.size()) throw std::invalid_argument(line);
            values.push_back(v);
        } catch (const std::exception&) {
            if (first) {
                first = false;
                continue;  // header row
            }
            throw CsvError("cannot parse value '" + line + "' in '" + args.data_path.string() +
                           "'");
        }
        first = false;
    }
    if (values.empty()) throw CsvError("no values in '" + args.data_path.string() + "'");

    BreaksResult breaks = jenks_breaks(values, args.k);

    std::filesystem::path out_dir = resolve_out_dir(args.out_dir);
    std::filesystem::create_directories(out_dir);

    nlohmann::ordered_json config;
    config["k"] = args.k;
    nlohmann::ordered_json manifest = make_manifest("classify", config, {args.data_path});
    nlohmann::ordered_json out;
    out["breakpoints"] = breaks.breakpoints;
    out["class_counts"] = breaks.class_counts;
    out["gvf"] = breaks.gvf;
    out["sdam"] = breaks.sdam;
    out["sdcm"] = breaks.sdcm;
    out["manifest"] = manifest;
    write_json_file(out_dir / "breaks.json", out);

    std::ofstream csv(out_dir / "classified.csv");
    csv << "value,category\n";
    for (std::size_t i = 0; i < values.size(); ++i)
        csv << values[i] << ',' << breaks.assignment[i] << '\n';
    std::cout << "k = " << args.k << ", GVF = " << breaks.gvf << '\n';
    return kExitOk;
}

int run_compare(const CompareArgs& args) {
    if (args.results.empty()) throw SpecError("compare needs at least one result file");
    struct Row {
        std::string path, family;
        int k = 0;
        double ll = 0.0, aic = 0.0, bic = 0.0;
        bool converged = false;
    };
    std::vector<Row> rows;
    for (const auto& path : args.results) {
        nlohmann::ordered_json j = read_json_file(path);
        Row r;
        r.path = path.filename().string();
        r.family = j.at("family").get<std::string>();
        r.k = j.at("fit").at("k").get<int>();
        r.converged = j.at("convergence").at("converged").get<bool>();
        r.ll = j.contains("loglik") ? j["loglik"].get<double>() : 0.0;
        if (j.at("fit").contains("aic")) {
            r.aic = j["fit"]["aic"].get<double>();
            r.bic = j["fit"]["bic"].get<double>();
        }
        rows.push_back(std::move(r));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.bic < b.bic; });

    std::ostringstream os;
    os << std::left << std::setw(28) << "Result" << std::setw(8) << "Family" << std::right
       << std::setw(6) << "k" << std::setw(14) << "LL" << std::setw(12) << "AIC" << std::setw(12)
       << "BIC" << "  Converged\n";
    os << std::string(82, '-') << '\n';
    for (const auto& r : rows) {
        std::ostringstream ll, aic, bic;
        ll << std::fixed << std::setprecision(3) << r.ll;
        aic << std::fixed << std::setprecision(3) << r.aic;
        bic << std::fixed << std::setprecision(3) << r.bic;
        os << std::left << std::setw(28) << r.path << std::setw(8) << r.family << std::right
           << std::setw(6) << r.k << std::setw(14) << ll.str() << std::setw(12) << aic.str()
           << std::setw(12) << bic.str() << "  " << (r.converged ? "yes" : "no") << '\n';
    }
    os << "(sorted by BIC, lower is better)\n";
    std::cout << os.str();
    if (args.out_path) write_text_file(*args.out_path, os.str());
    return kExitOk;
}

int run_validate(const ValidateArgs& args) {
    auto schema = load_schema_for(args.data_path, args.schema_path);
    Dataset data = load_csv(args.data_path, schema);
    nlohmann::ordered_json report = validate_dataset(data);
    if (args.out_path) {
        write_json_file(*args.out_path, report);
    } else {
        std::cout << report.dump(2) << '\n';
    }
    return kExitOk;
}

}  // namespace hetchoice
