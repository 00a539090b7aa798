#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hetchoice/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hetchoice: heterogeneous discrete-choice model estimation, natural-breaks "
                 "classification and synthetic data generation"};
    app.require_subcommand(1);

    hetchoice::EstimateArgs est;
    std::string est_schema, est_out = ".";
    int est_draws = -1;
    long long est_seed = -1;
    int est_max_iter = -1, est_restarts = -1;
    double est_tol = -1.0;
    auto* estimate = app.add_subcommand("estimate", "fit a model by (simulated) maximum likelihood");
    estimate->add_option("--model", est.model, "bl|mixl|lcm|lcml|ol|lr")->required();
    estimate->add_option("--spec", est.spec_path, "model spec JSON")->required();
    estimate->add_option("--data", est.data_path, "dataset CSV")->required();
    estimate->add_option("--schema", est_schema, "variable schema JSON (default <data>.vars.json)");
    estimate->add_option("--out", est_out, "output directory");
    estimate->add_option("--draws", est_draws, "override the spec's draw count R");
    estimate->add_option("--seed", est_seed, "override the spec's draw seed");
    estimate->add_option("--bic-n", est.bic_n, "BIC sample size: observations|individuals")
        ->check(CLI::IsMember({"observations", "individuals"}));
    estimate->add_option("--threads", est.threads, "worker threads (results are thread-invariant)");
    estimate->add_option("--max-iter", est_max_iter, "optimizer iteration cap");
    estimate->add_option("--tol", est_tol, "gradient infinity-norm tolerance");
    estimate->add_option("--restarts", est_restarts, "random restarts (default 5 for lcm/lcml)");

    hetchoice::RecoverArgs rec;
    std::string rec_out = ".";
    int rec_draws = -1, rec_restarts = -1;
    auto* recover = app.add_subcommand("recover", "parameter-recovery study against a truth file");
    recover->add_option("--truth", rec.truth_path, "truth JSON (spec + params)")->required();
    recover->add_option("--model", rec.model, "bl|mixl|lcm|lcml|ol|lr")->required();
    recover->add_option("--n", rec.n_individuals, "individuals per seed")->required();
    recover->add_option("--seeds", rec.seeds, "number of seeds")->required();
    recover->add_option("--obs-per-ind", rec.obs_per_individual, "observations per individual");
    recover->add_option("--seed", rec.base_seed, "base seed");
    recover->add_option("--out", rec_out, "output directory");
    recover->add_option("--threads", rec.threads, "worker threads");
    recover->add_option("--draws", rec_draws, "override the spec's draw count R");
    recover->add_option("--restarts", rec_restarts, "random restarts");

    hetchoice::SimulateArgs sim;
    std::string sim_out = ".";
    int sim_n = -1, sim_opi = -1;
    long long sim_total = -1;
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset from a truth file");
    simulate->add_option("--truth", sim.truth_path, "truth JSON (spec + params)")->required();
    simulate->add_option("--out", sim_out, "output directory");
    simulate->add_option("--n", sim_n, "individuals");
    simulate->add_option("--obs-per-ind", sim_opi, "observations per individual");
    simulate->add_option("--total-obs", sim_total, "total observations (spread evenly)");
    simulate->add_option("--seed", sim.seed, "seed");

    hetchoice::ClassifyArgs cls;
    std::string cls_out = ".";
    auto* classify = app.add_subcommand("classify", "Jenks natural breaks of a one-column CSV");
    classify->add_option("--data", cls.data_path, "one-column CSV")->required();
    classify->add_option("--k", cls.k, "number of classes (default 3)");
    classify->add_option("--out", cls_out, "output directory");

    hetchoice::CompareArgs cmp;
    std::string cmp_out;
    auto* compare = app.add_subcommand("compare", "side-by-side fit table of result JSONs");
    compare->add_option("--results", cmp.results, "estimation result JSON files")
        ->required()
        ->expected(-1);
    compare->add_option("--out", cmp_out, "write the table to a file as well");

    hetchoice::ValidateArgs val;
    std::string val_schema, val_out;
    auto* validate = app.add_subcommand("validate", "dataset validation report (JSON)");
    validate->add_option("--data", val.data_path, "dataset CSV")->required();
    validate->add_option("--schema", val_schema, "variable schema JSON");
    validate->add_option("--out", val_out, "write the report to a file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return hetchoice::kExitInputError;
    }

    try {
        if (estimate->parsed()) {
            if (!est_schema.empty()) est.schema_path = est_schema;
            est.out_dir = est_out;
            if (est_draws > 0) est.draws = est_draws;
            if (est_seed >= 0) est.seed = static_cast<std::uint64_t>(est_seed);
            if (est_max_iter > 0) est.max_iterations = est_max_iter;
            if (est_tol > 0) est.grad_tol = est_tol;
            if (est_restarts > 0) est.restarts = est_restarts;
            return hetchoice::run_estimate(est);
        }
        if (recover->parsed()) {
            rec.out_dir = rec_out;
            if (rec_draws > 0) rec.draws = rec_draws;
            if (rec_restarts > 0) rec.restarts = rec_restarts;
            return hetchoice::run_recover(rec);
        }
        if (simulate->parsed()) {
            sim.out_dir = sim_out;
            if (sim_n > 0) sim.n_individuals = sim_n;
            if (sim_opi > 0) sim.obs_per_individual = sim_opi;
            if (sim_total > 0) sim.total_observations = sim_total;
            return hetchoice::run_simulate(sim);
        }
        if (classify->parsed()) {
            cls.out_dir = cls_out;
            return hetchoice::run_classify(cls);
        }
        if (compare->parsed()) {
            if (!cmp_out.empty()) cmp.out_path = cmp_out;
            return hetchoice::run_compare(cmp);
        }
        if (validate->parsed()) {
            if (!val_schema.empty()) val.schema_path = val_schema;
            if (!val_out.empty()) val.out_path = val_out;
            return hetchoice::run_validate(val);
        }
    } catch (const hetchoice::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return hetchoice::kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return hetchoice::kExitInputError;
    }
    return hetchoice::kExitInputError;
}
