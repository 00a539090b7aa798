#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hetchoice/common.hpp"

namespace hetchoice {

enum class VarKind { BinaryIndicator, OrdinalCategory, ContinuousScore };

std::string to_string(VarKind kind);
VarKind var_kind_from_string(const std::string& text);

/// Declaration of one dataset column.
struct VariableDef {
    std::string name;
    VarKind kind = VarKind::BinaryIndicator;
    std::vector<std::string> levels;  // ordinal-category only, in declared order
    std::string units = "dimensionless";
    std::optional<std::pair<double, double>> range;  // continuous-score bound, e.g. [0,13]
};

/// One panel row: covariates plus whichever outcomes the file carries.
struct Observation {
    long long individual_id = 0;
    int scenario_id = 0;
    std::vector<double> covariates;  // parallel to Dataset::variable_defs()
    std::optional<int> choice_y;
    std::optional<double> auto_proportion;
    std::optional<int> ordinal_category;
};

struct IndividualBlock {
    long long id = 0;
    std::size_t first = 0;
    std::size_t count = 0;
};

/// Immutable panel dataset, rows grouped and ordered by individual id.
class Dataset {
  public:
    Dataset() = default;

    /// Sorts rows by individual id (stable), builds the per-individual index
    /// and validates the row-level invariants.
    static Dataset from_observations(std::vector<VariableDef> defs,
                                     std::vector<Observation> observations);

    const std::vector<VariableDef>& variable_defs() const { return defs_; }
    const std::vector<Observation>& observations() const { return obs_; }
    const std::vector<IndividualBlock>& individuals() const { return blocks_; }

    std::size_t n_observations() const { return obs_.size(); }
    std::size_t n_individuals() const { return blocks_.size(); }

    std::optional<std::size_t> var_index(const std::string& name) const;
    double value(std::size_t obs_index, std::size_t var_index) const {
        return obs_[obs_index].covariates[var_index];
    }
    bool has_choice() const;
    bool has_proportion() const;
    bool has_ordinal() const;

  private:
    std::vector<VariableDef> defs_;
    std::vector<Observation> obs_;
    std::vector<IndividualBlock> blocks_;
    std::unordered_map<std::string, std::size_t> index_;
};

// --- CSV and schema I/O -----------------------------------------------------

/// Reads a UTF-8 comma-delimited file with a header row. Reserved columns:
/// individual_id, scenario_id (required), choice_y, auto_proportion,
/// ordinal_category (optional; empty cells mean "absent"). Every other header
/// column must appear in `schema` and vice versa.
Dataset load_csv(const std::filesystem::path& path, const std::vector<VariableDef>& schema);
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

std::vector<VariableDef> variable_defs_from_json(const nlohmann::json& j);
nlohmann::json variable_defs_to_json(const std::vector<VariableDef>& defs);
std::vector<VariableDef> load_variable_defs(const std::filesystem::path& path);
void save_variable_defs(const std::vector<VariableDef>& defs, const std::filesystem::path& path);

// --- Coding rules -------------------------------------------------------------

struct CodingRule {
    enum class Type { Dummy, Compound } type = Type::Dummy;
    // Dummy: source ordinal-category variable; one 0/1 column per non-reference
    // level, named after the level.
    std::string variable;
    std::string reference_level;  // empty = first declared level
    // Compound: product of binary-indicator operands under a new name.
    std::string name;
    std::vector<std::string> operands;
};

std::vector<CodingRule> coding_rules_from_json(const nlohmann::json& j);

/// Applies dummy and compound rules, appending the derived columns.
/// Re-applying the same rules is a no-op; a name clash with different values
/// is an error.
Dataset apply_coding(const Dataset& dataset, const std::vector<CodingRule>& rules);

// --- Validation ----------------------------------------------------------------

/// Per-variable marginal counts, outcome shares and invariant violations.
/// Violations are reported, never thrown.
nlohmann::ordered_json validate_dataset(const Dataset& dataset);

}  // namespace hetchoice
