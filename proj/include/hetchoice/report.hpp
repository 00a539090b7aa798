#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetchoice/estimation.hpp"

namespace hetchoice {

/// SHA-256 digest of a file, lowercase hex.
std::string sha256_file(const std::filesystem::path& path);

/// Run provenance attached to every emitted result file. `timestamp` is the
/// only field allowed to differ between reruns with identical inputs.
nlohmann::ordered_json make_manifest(const std::string& subcommand,
                                     const nlohmann::ordered_json& resolved_config,
                                     const std::vector<std::filesystem::path>& inputs);

/// Significance stars follow the source table footnotes, which invert the
/// usual convention: '*' marks NOT significant at the 95% level, '**' NOT
/// significant at the 90% level. Significant estimates carry no star.
std::string significance_star(double t_stat);

nlohmann::ordered_json estimation_result_to_json(const EstimationResult& result,
                                                 const BoundModel& bound,
                                                 const nlohmann::ordered_json& manifest,
                                                 const std::string& bic_n_kind);

nlohmann::ordered_json ols_result_to_json(const OlsResult& result,
                                          const nlohmann::ordered_json& manifest);

/// Fixed-width parameter table with the performance-indicator block
/// (number of parameters, AIC, BIC, rho-square-bar) underneath.
std::string render_parameter_table(const nlohmann::ordered_json& result_json);

void write_text_file(const std::filesystem::path& path, const std::string& text);
nlohmann::ordered_json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j);

}  // namespace hetchoice
