#include "hetchoice/report.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

namespace hetchoice {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for hashing");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw Error("cannot allocate hash context");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[65536];
    while (in.good()) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        if (got > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(got));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

nlohmann::ordered_json make_manifest(const std::string& subcommand,
                                     const nlohmann::ordered_json& resolved_config,
                                     const std::vector<std::filesystem::path>& inputs) {
    nlohmann::ordered_json m;
    m["subcommand"] = subcommand;
    m["artifact_version"] = kArtifactVersion;
    m["config"] = resolved_config;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& p : inputs) {
        nlohmann::ordered_json f;
        f["path"] = p.string();
        f["sha256"] = sha256_file(p);
        files.push_back(std::move(f));
    }
    m["inputs"] = std::move(files);
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    m["timestamp"] = stamp;
    return m;
}

std::string significance_star(double t_stat) {
    double at = std::abs(t_stat);
    if (at >= 1.96) return "";
    if (at >= 1.645) return "*";
    return "**";
}

nlohmann::ordered_json estimation_result_to_json(const EstimationResult& result,
                                                 const BoundModel& bound,
                                                 const nlohmann::ordered_json& manifest,
                                                 const std::string& bic_n_kind) {
    nlohmann::ordered_json out;
    out["family"] = to_string(result.family);

    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    for (int j = 0; j < result.n_free_params(); ++j) {
        nlohmann::ordered_json p;
        p["name"] = result.names[static_cast<std::size_t>(j)];
        p["estimate"] = result.estimates(j);
        if (result.have_robust_cov) {
            p["robust_se"] = result.robust_se(j);
            p["robust_t"] = result.robust_t(j);
            p["hessian_se"] = result.hessian_se(j);
            p["significant_95"] = std::abs(result.robust_t(j)) >= 1.96;
            p["significant_90"] = std::abs(result.robust_t(j)) >= 1.645;
            p["star"] = significance_star(result.robust_t(j));
        }
        params.push_back(std::move(p));
    }
    out["parameters"] = std::move(params);

    out["loglik"] = result.loglik;
    nlohmann::ordered_json nulls;
    nulls["equal_share"] = result.ll0_equal_share;
    nulls["observed_share"] = result.ll0_observed_share;
    out["null_loglik"] = std::move(nulls);

    long long bic_n = bic_n_kind == "individuals" ? result.n_individuals : result.n_observations;
    nlohmann::ordered_json fit;
    fit["k"] = result.n_free_params();
    fit["n_observations"] = result.n_observations;
    fit["n_individuals"] = result.n_individuals;
    fit["bic_n"] = bic_n;
    fit["bic_n_kind"] = bic_n_kind;
    if (result.convergence.converged) {
        FitMetricsValues equal =
            fit_metrics(result.n_free_params(), result.loglik, result.ll0_equal_share, bic_n);
        fit["aic"] = equal.aic;
        fit["bic"] = equal.bic;
        // The null model behind the reference rho-square-bar values is not
        // reconstructible, so both candidates are reported with labels.
        fit["rho_sq_bar_equal_share"] = equal.rho_sq_bar;
        fit["rho_sq_bar_observed_share"] =
            fit_metrics(result.n_free_params(), result.loglik, result.ll0_observed_share, bic_n)
                .rho_sq_bar;
    }
    out["fit"] = std::move(fit);

    nlohmann::ordered_json conv;
    conv["converged"] = result.convergence.converged;
    conv["iterations"] = result.convergence.iterations;
    conv["grad_inf_norm"] = result.convergence.grad_inf_norm;
    conv["restart_index"] = result.convergence.restart_index;
    conv["n_restarts"] = result.convergence.n_restarts;
    conv["n_evaluations"] = result.convergence.n_evaluations;
    if (!result.convergence.message.empty()) conv["message"] = result.convergence.message;
    out["convergence"] = std::move(conv);

    if (!result.excluded_deltas.empty()) out["excluded_thresholds"] = result.excluded_deltas;
    out["spec"] = bound.spec.source;
    out["manifest"] = manifest;
    return out;
}

nlohmann::ordered_json ols_result_to_json(const OlsResult& result,
                                          const nlohmann::ordered_json& manifest) {
    nlohmann::ordered_json out;
    out["family"] = "LR";
    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    for (int j = 0; j < result.k; ++j) {
        nlohmann::ordered_json p;
        p["name"] = result.names[static_cast<std::size_t>(j)];
        p["estimate"] = result.coefficients(j);
        p["robust_se"] = result.robust_se(j);
        p["robust_t"] = result.robust_t(j);
        p["significant_95"] = std::abs(result.robust_t(j)) >= 1.96;
        p["significant_90"] = std::abs(result.robust_t(j)) >= 1.645;
        p["star"] = significance_star(result.robust_t(j));
        params.push_back(std::move(p));
    }
    out["parameters"] = std::move(params);
    out["loglik"] = result.loglik;
    nlohmann::ordered_json fit;
    fit["k"] = result.k;
    fit["n_observations"] = result.n;
    fit["bic_n"] = result.n;
    fit["bic_n_kind"] = "observations";
    fit["aic"] = 2.0 * result.k - 2.0 * result.loglik;
    fit["bic"] = result.k * std::log(static_cast<double>(result.n)) - 2.0 * result.loglik;
    fit["r_squared"] = result.r_squared;
    fit["adj_r_squared"] = result.adj_r_squared;
    fit["residual_variance"] = result.residual_variance;
    out["fit"] = std::move(fit);
    nlohmann::ordered_json conv;
    conv["converged"] = true;
    conv["iterations"] = 0;
    out["convergence"] = std::move(conv);
    out["manifest"] = manifest;
    return out;
}

namespace {

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

std::string render_parameter_table(const nlohmann::ordered_json& result_json) {
    std::ostringstream os;
    const auto& params = result_json.at("parameters");
    std::size_t width = 12;
    for (const auto& p : params)
        width = std::max(width, p.at("name").get<std::string>().size() + 2);

    os << std::left << std::setw(static_cast<int>(width)) << "Parameter" << std::right
       << std::setw(12) << "Estimate" << std::setw(12) << "Rob. SE" << std::setw(12)
       << "Rob. t" << "  Sig.\n";
    os << std::string(width + 42, '-') << '\n';
    for (const auto& p : params) {
        os << std::left << std::setw(static_cast<int>(width)) << p.at("name").get<std::string>()
           << std::right << std::setw(12) << fixed(p.at("estimate").get<double>(), 4);
        if (p.contains("robust_se")) {
            os << std::setw(12) << fixed(p.at("robust_se").get<double>(), 4) << std::setw(12)
               << fixed(p.at("robust_t").get<double>(), 3) << "  "
               << p.at("star").get<std::string>();
        } else {
            os << std::setw(12) << "-" << std::setw(12) << "-";
        }
        os << '\n';
    }
    os << std::string(width + 42, '-') << '\n';
    const auto& metrics = result_json.at("fit");
    os << "Performance Indicators:\n";
    os << "  Number of parameters     " << metrics.at("k").get<int>() << '\n';
    if (metrics.contains("aic")) {
        os << "  Akaike Information Criterion    " << fixed(metrics.at("aic").get<double>(), 3)
           << '\n';
        os << "  Bayesian Information Criterion  " << fixed(metrics.at("bic").get<double>(), 3)
           << " (n = " << metrics.at("bic_n").get<long long>() << ' '
           << metrics.at("bic_n_kind").get<std::string>() << ")\n";
    }
    if (metrics.contains("rho_sq_bar_equal_share"))
        os << "  Rho-square-bar (equal-share null)     "
           << fixed(metrics.at("rho_sq_bar_equal_share").get<double>(), 3) << '\n';
    if (metrics.contains("rho_sq_bar_observed_share"))
        os << "  Rho-square-bar (observed-share null)  "
           << fixed(metrics.at("rho_sq_bar_observed_share").get<double>(), 3) << '\n';
    if (metrics.contains("r_squared")) {
        os << "  R-squared                " << fixed(metrics.at("r_squared").get<double>(), 3)
           << '\n';
        os << "  Adj. R-squared           " << fixed(metrics.at("adj_r_squared").get<double>(), 3)
           << '\n';
    }
    os << "Note: '*' = not significant at the 95% level, '**' = not significant at the 90% "
          "level (significant estimates carry no star).\n";
    return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
}

nlohmann::ordered_json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    nlohmann::ordered_json j;
    in >> j;
    return j;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

}  // namespace hetchoice
