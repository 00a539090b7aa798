#include "hetchoice/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hetchoice {

namespace {

constexpr const char* kIndividualId = "individual_id";
constexpr const char* kScenarioId = "scenario_id";
constexpr const char* kChoiceY = "choice_y";
constexpr const char* kAutoProportion = "auto_proportion";
constexpr const char* kOrdinalCategory = "ordinal_category";

bool is_reserved(const std::string& name) {
    return name == kIndividualId || name == kScenarioId || name == kChoiceY ||
           name == kAutoProportion || name == kOrdinalCategory;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_double(const std::string& cell, std::size_t line_no, const std::string& column) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw CsvError("line " + std::to_string(line_no) + ": cannot parse value '" + cell +
                       "' in column '" + column + "'");
    }
    return v;
}

long long parse_int(const std::string& cell, std::size_t line_no, const std::string& column) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw CsvError("line " + std::to_string(line_no) + ": cannot parse integer '" + cell +
                       "' in column '" + column + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void check_row_invariants(const Observation& o, const std::vector<VariableDef>& defs,
                          std::size_t line_no) {
    auto fail = [&](const std::string& what) {
        throw CsvError("line " + std::to_string(line_no) + ": " + what);
    };
    if (o.choice_y && *o.choice_y != 0 && *o.choice_y != 1) fail("choice_y must be 0 or 1");
    if (o.auto_proportion && (*o.auto_proportion < 0.0 || *o.auto_proportion > 1.0))
        fail("auto_proportion must lie in [0,1]");
    if (o.ordinal_category && (*o.ordinal_category < 1 || *o.ordinal_category > 3))
        fail("ordinal_category must be 1, 2 or 3");
    for (std::size_t j = 0; j < defs.size(); ++j) {
        double v = o.covariates[j];
        if (defs[j].kind == VarKind::BinaryIndicator && v != 0.0 && v != 1.0)
            fail("binary indicator '" + defs[j].name + "' must be 0 or 1");
        if (defs[j].kind == VarKind::OrdinalCategory) {
            double iv = 0.0;
            if (std::modf(v, &iv) != 0.0 || v < 1.0 ||
                v > static_cast<double>(defs[j].levels.size()))
                fail("ordinal variable '" + defs[j].name + "' must be a level index in 1.." +
                     std::to_string(defs[j].levels.size()));
        }
    }
}

}  // namespace

std::string to_string(VarKind kind) {
    switch (kind) {
        case VarKind::BinaryIndicator: return "binary-indicator";
        case VarKind::OrdinalCategory: return "ordinal-category";
        case VarKind::ContinuousScore: return "continuous-score";
    }
    return "unknown";
}

VarKind var_kind_from_string(const std::string& text) {
    if (text == "binary-indicator") return VarKind::BinaryIndicator;
    if (text == "ordinal-category") return VarKind::OrdinalCategory;
    if (text == "continuous-score") return VarKind::ContinuousScore;
    throw SpecError("unknown variable kind '" + text + "'");
}

Dataset Dataset::from_observations(std::vector<VariableDef> defs,
                                   std::vector<Observation> observations) {
    Dataset d;
    d.defs_ = std::move(defs);
    d.obs_ = std::move(observations);
    for (std::size_t j = 0; j < d.defs_.size(); ++j) {
        if (!d.index_.emplace(d.defs_[j].name, j).second)
            throw SpecError("duplicate variable definition '" + d.defs_[j].name + "'");
    }
    for (const auto& o : d.obs_) {
        if (o.covariates.size() != d.defs_.size())
            throw CsvError("observation covariate count does not match schema");
    }
    std::stable_sort(d.obs_.begin(), d.obs_.end(),
                     [](const Observation& a, const Observation& b) {
                         return a.individual_id < b.individual_id;
                     });
    for (std::size_t i = 0; i < d.obs_.size();) {
        std::size_t first = i;
        long long id = d.obs_[i].individual_id;
        while (i < d.obs_.size() && d.obs_[i].individual_id == id) ++i;
        d.blocks_.push_back({id, first, i - first});
    }
    return d;
}

std::optional<std::size_t> Dataset::var_index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool Dataset::has_choice() const {
    return !obs_.empty() &&
           std::all_of(obs_.begin(), obs_.end(), [](const auto& o) { return o.choice_y.has_value(); });
}

bool Dataset::has_proportion() const {
    return !obs_.empty() && std::all_of(obs_.begin(), obs_.end(),
                                        [](const auto& o) { return o.auto_proportion.has_value(); });
}

bool Dataset::has_ordinal() const {
    return !obs_.empty() && std::all_of(obs_.begin(), obs_.end(),
                                        [](const auto& o) { return o.ordinal_category.has_value(); });
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<VariableDef>& schema) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open '" + path.string() + "'");

    std::string header_line;
    if (!std::getline(in, header_line)) throw CsvError("empty file '" + path.string() + "'");
    auto header = split_csv_line(header_line);

    std::unordered_map<std::string, std::size_t> col_of;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (!col_of.emplace(header[c], c).second)
            throw CsvError("duplicate column '" + header[c] + "' in header");
    }
    for (const char* required : {kIndividualId, kScenarioId}) {
        if (!col_of.count(required)) throw CsvError("missing column '" + std::string(required) + "'");
    }
    for (const auto& def : schema) {
        if (!col_of.count(def.name)) throw CsvError("missing column '" + def.name + "'");
    }
    for (const auto& name : header) {
        if (is_reserved(name)) continue;
        if (std::none_of(schema.begin(), schema.end(),
                         [&](const VariableDef& d) { return d.name == name; }))
            throw CsvError("column '" + name + "' is not declared in the schema");
    }

    bool has_y = col_of.count(kChoiceY) > 0;
    bool has_prop = col_of.count(kAutoProportion) > 0;
    bool has_ord = col_of.count(kOrdinalCategory) > 0;

    std::vector<Observation> rows;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw CsvError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()));
        Observation o;
        o.individual_id = parse_int(cells[col_of[kIndividualId]], line_no, kIndividualId);
        o.scenario_id = static_cast<int>(parse_int(cells[col_of[kScenarioId]], line_no, kScenarioId));
        if (has_y) {
            const auto& cell = cells[col_of[kChoiceY]];
            if (!cell.empty()) o.choice_y = static_cast<int>(parse_int(cell, line_no, kChoiceY));
        }
        if (has_prop) {
            const auto& cell = cells[col_of[kAutoProportion]];
            if (!cell.empty()) o.auto_proportion = parse_double(cell, line_no, kAutoProportion);
        }
        if (has_ord) {
            const auto& cell = cells[col_of[kOrdinalCategory]];
            if (!cell.empty())
                o.ordinal_category = static_cast<int>(parse_int(cell, line_no, kOrdinalCategory));
        }
        o.covariates.resize(schema.size());
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const auto& cell = cells[col_of[schema[j].name]];
            if (cell.empty())
                throw CsvError("line " + std::to_string(line_no) + ": missing value in column '" +
                               schema[j].name + "'");
            o.covariates[j] = parse_double(cell, line_no, schema[j].name);
        }
        check_row_invariants(o, schema, line_no);
        rows.push_back(std::move(o));
    }
    if (rows.empty()) throw CsvError("no data rows in '" + path.string() + "'");
    return Dataset::from_observations(schema, std::move(rows));
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw CsvError("cannot write '" + path.string() + "'");
    bool has_y = dataset.has_choice();
    bool has_prop = dataset.has_proportion();
    bool has_ord = dataset.has_ordinal();

    out << kIndividualId << ',' << kScenarioId;
    if (has_y) out << ',' << kChoiceY;
    if (has_prop) out << ',' << kAutoProportion;
    if (has_ord) out << ',' << kOrdinalCategory;
    for (const auto& def : dataset.variable_defs()) out << ',' << def.name;
    out << '\n';

    for (const auto& o : dataset.observations()) {
        out << o.individual_id << ',' << o.scenario_id;
        if (has_y) out << ',' << *o.choice_y;
        if (has_prop) out << ',' << format_double(*o.auto_proportion);
        if (has_ord) out << ',' << *o.ordinal_category;
        for (double v : o.covariates) out << ',' << format_double(v);
        out << '\n';
    }
}

std::vector<VariableDef> variable_defs_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw SpecError("variable definitions must be a JSON array");
    std::vector<VariableDef> defs;
    for (const auto& item : j) {
        VariableDef d;
        d.name = item.at("name").get<std::string>();
        d.kind = var_kind_from_string(item.at("kind").get<std::string>());
        if (item.contains("levels")) d.levels = item["levels"].get<std::vector<std::string>>();
        if (item.contains("units")) d.units = item["units"].get<std::string>();
        if (item.contains("range")) {
            auto r = item["range"].get<std::vector<double>>();
            if (r.size() != 2 || r[0] > r[1]) throw SpecError("range must be [lo, hi]");
            d.range = {r[0], r[1]};
        }
        if (d.kind == VarKind::OrdinalCategory && d.levels.size() < 2)
            throw SpecError("ordinal-category variable '" + d.name + "' needs at least 2 levels");
        defs.push_back(std::move(d));
    }
    return defs;
}

nlohmann::json variable_defs_to_json(const std::vector<VariableDef>& defs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& d : defs) {
        nlohmann::json item;
        item["name"] = d.name;
        item["kind"] = to_string(d.kind);
        item["levels"] = d.levels;
        item["units"] = d.units;
        if (d.range) item["range"] = {d.range->first, d.range->second};
        out.push_back(std::move(item));
    }
    return out;
}

std::vector<VariableDef> load_variable_defs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open schema '" + path.string() + "'");
    nlohmann::json j;
    in >> j;
    return variable_defs_from_json(j);
}

void save_variable_defs(const std::vector<VariableDef>& defs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw SpecError("cannot write schema '" + path.string() + "'");
    out << variable_defs_to_json(defs).dump(2) << '\n';
}

std::vector<CodingRule> coding_rules_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw SpecError("coding rules must be a JSON array");
    std::vector<CodingRule> rules;
    for (const auto& item : j) {
        CodingRule r;
        auto type = item.at("type").get<std::string>();
        if (type == "dummy") {
            r.type = CodingRule::Type::Dummy;
            r.variable = item.at("variable").get<std::string>();
            if (item.contains("reference")) r.reference_level = item["reference"].get<std::string>();
        } else if (type == "compound") {
            r.type = CodingRule::Type::Compound;
            r.name = item.at("name").get<std::string>();
            r.operands = item.at("of").get<std::vector<std::string>>();
            if (r.operands.size() < 2) throw SpecError("compound rule needs at least 2 operands");
        } else {
            throw SpecError("unknown coding rule type '" + type + "'");
        }
        rules.push_back(std::move(r));
    }
    return rules;
}

Dataset apply_coding(const Dataset& dataset, const std::vector<CodingRule>& rules) {
    std::vector<VariableDef> defs = dataset.variable_defs();
    std::vector<Observation> obs = dataset.observations();

    auto index_of = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t j = 0; j < defs.size(); ++j)
            if (defs[j].name == name) return j;
        return std::nullopt;
    };
    auto append_column = [&](const VariableDef& def, const std::vector<double>& values) {
        if (auto existing = index_of(def.name)) {
            // Idempotence: recomputing an already coded column must agree.
            for (std::size_t i = 0; i < obs.size(); ++i) {
                if (obs[i].covariates[*existing] != values[i])
                    throw SpecError("coding rule would overwrite column '" + def.name +
                                    "' with different values");
            }
            return;
        }
        defs.push_back(def);
        for (std::size_t i = 0; i < obs.size(); ++i) obs[i].covariates.push_back(values[i]);
    };

    for (const auto& rule : rules) {
        if (rule.type == CodingRule::Type::Dummy) {
            auto src = index_of(rule.variable);
            if (!src) throw SpecError("dummy rule references unknown variable '" + rule.variable + "'");
            const VariableDef sd = defs[*src];  // copy: append_column reallocates defs
            if (sd.kind != VarKind::OrdinalCategory)
                throw SpecError("dummy rule requires an ordinal-category variable, '" +
                                rule.variable + "' is " + to_string(sd.kind));
            std::string ref = rule.reference_level.empty() ? sd.levels.front() : rule.reference_level;
            if (std::find(sd.levels.begin(), sd.levels.end(), ref) == sd.levels.end())
                throw SpecError("reference level '" + ref + "' is not a level of '" + sd.name + "'");
            for (std::size_t l = 0; l < sd.levels.size(); ++l) {
                if (sd.levels[l] == ref) continue;
                std::vector<double> col(obs.size());
                for (std::size_t i = 0; i < obs.size(); ++i)
                    col[i] = obs[i].covariates[*src] == static_cast<double>(l + 1) ? 1.0 : 0.0;
                append_column({sd.levels[l], VarKind::BinaryIndicator, {}, "dimensionless", {}}, col);
            }
        } else {
            std::vector<std::size_t> ops;
            for (const auto& name : rule.operands) {
                auto idx = index_of(name);
                if (!idx)
                    throw SpecError("compound rule references unknown variable '" + name + "'");
                if (defs[*idx].kind != VarKind::BinaryIndicator)
                    throw SpecError("compound rule operand '" + name +
                                    "' must be a binary indicator, found " +
                                    to_string(defs[*idx].kind));
                ops.push_back(*idx);
            }
            std::vector<double> col(obs.size(), 1.0);
            for (std::size_t i = 0; i < obs.size(); ++i)
                for (std::size_t op : ops) col[i] *= obs[i].covariates[op];
            append_column({rule.name, VarKind::BinaryIndicator, {}, "dimensionless", {}}, col);
        }
    }
    return Dataset::from_observations(std::move(defs), std::move(obs));
}

nlohmann::ordered_json validate_dataset(const Dataset& dataset) {
    nlohmann::ordered_json report;
    report["n_individuals"] = dataset.n_individuals();
    report["n_observations"] = dataset.n_observations();

    const auto& obs = dataset.observations();
    std::size_t n = obs.size();
    std::size_t with_y = 0, y_ones = 0;
    for (const auto& o : obs) {
        if (o.choice_y) {
            ++with_y;
            y_ones += static_cast<std::size_t>(*o.choice_y);
        }
    }
    nlohmann::ordered_json flags = nlohmann::ordered_json::array();
    nlohmann::ordered_json violations = nlohmann::ordered_json::array();

    if (with_y > 0) {
        report["choice_share"] = static_cast<double>(y_ones) / static_cast<double>(with_y);
        if (y_ones == 0 || y_ones == with_y)
            flags.push_back("zero variation in choice_y: all observations are " +
                            std::to_string(y_ones == 0 ? 0 : 1));
    }

    nlohmann::ordered_json vars = nlohmann::ordered_json::array();
    const auto& defs = dataset.variable_defs();
    for (std::size_t j = 0; j < defs.size(); ++j) {
        const auto& def = defs[j];
        nlohmann::ordered_json v;
        v["name"] = def.name;
        v["kind"] = to_string(def.kind);
        if (def.kind == VarKind::BinaryIndicator) {
            std::size_t count = 0, give = 0, give_denom = 0;
            for (const auto& o : obs) {
                if (o.covariates[j] == 1.0) {
                    ++count;
                    if (o.choice_y) {
                        ++give_denom;
                        give += static_cast<std::size_t>(*o.choice_y);
                    }
                }
            }
            v["count"] = count;
            if (give_denom > 0)
                v["choice_share"] = static_cast<double>(give) / static_cast<double>(give_denom);
        } else if (def.kind == VarKind::OrdinalCategory) {
            std::vector<std::size_t> counts(def.levels.size(), 0);
            for (const auto& o : obs)
                counts[static_cast<std::size_t>(o.covariates[j]) - 1] += 1;
            nlohmann::ordered_json levels = nlohmann::ordered_json::array();
            for (std::size_t l = 0; l < def.levels.size(); ++l) {
                std::size_t give = 0, give_denom = 0;
                for (const auto& o : obs) {
                    if (static_cast<std::size_t>(o.covariates[j]) == l + 1 && o.choice_y) {
                        ++give_denom;
                        give += static_cast<std::size_t>(*o.choice_y);
                    }
                }
                nlohmann::ordered_json lv;
                lv["level"] = def.levels[l];
                lv["count"] = counts[l];
                if (give_denom > 0)
                    lv["choice_share"] = static_cast<double>(give) / static_cast<double>(give_denom);
                levels.push_back(std::move(lv));
            }
            v["levels"] = std::move(levels);
        } else {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
            double sum = 0.0;
            for (const auto& o : obs) {
                lo = std::min(lo, o.covariates[j]);
                hi = std::max(hi, o.covariates[j]);
                sum += o.covariates[j];
            }
            v["min"] = lo;
            v["max"] = hi;
            v["mean"] = n > 0 ? sum / static_cast<double>(n) : 0.0;
            if (def.range && (lo < def.range->first || hi > def.range->second)) {
                violations.push_back("variable '" + def.name + "' outside declared range [" +
                                     std::to_string(def.range->first) + ", " +
                                     std::to_string(def.range->second) + "]");
            }
        }
        vars.push_back(std::move(v));
    }
    report["variables"] = std::move(vars);
    report["flags"] = std::move(flags);
    report["violations"] = std::move(violations);
    return report;
}

}  // namespace hetchoice
