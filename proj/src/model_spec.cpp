#include "hetchoice/model_spec.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace hetchoice {

namespace {

void expect_keys(const nlohmann::ordered_json& j, const std::set<std::string>& allowed,
                 const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw SpecError("unknown key '" + it.key() + "' in " + where);
    }
}

std::vector<UtilityTerm> parse_terms(const nlohmann::ordered_json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw SpecError(where + " must be a non-empty array of {\"coef\", \"variable\"}");
    std::vector<UtilityTerm> terms;
    for (const auto& t : j) {
        expect_keys(t, {"coef", "variable"}, where);
        terms.push_back({t.at("coef").get<std::string>(), t.at("variable").get<std::string>()});
    }
    return terms;
}

bool is_prime(int n) {
    if (n < 2) return false;
    for (int d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

}  // namespace

std::string to_string(Family family) {
    switch (family) {
        case Family::BL: return "BL";
        case Family::MIXL: return "MIXL";
        case Family::LCM: return "LCM";
        case Family::LCML: return "LCML";
        case Family::OL: return "OL";
        case Family::LR: return "LR";
    }
    return "unknown";
}

Family family_from_string(const std::string& text) {
    std::string up = text;
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
    if (up == "BL") return Family::BL;
    if (up == "MIXL") return Family::MIXL;
    if (up == "LCM") return Family::LCM;
    if (up == "LCML") return Family::LCML;
    if (up == "OL") return Family::OL;
    if (up == "LR") return Family::LR;
    throw SpecError("unknown model family '" + text + "'");
}

int ModelSpec::n_random_dims() const {
    int dims = 0;
    for (const auto& c : classes) dims += static_cast<int>(c.random_coefs.size());
    return dims;
}

bool ModelSpec::classes_exchangeable() const {
    if (classes.size() < 2) return false;
    for (std::size_t z = 1; z < classes.size(); ++z) {
        const auto& a = classes[0];
        const auto& b = classes[z];
        if (a.utilities.size() != b.utilities.size() ||
            a.random_coefs.size() != b.random_coefs.size())
            return false;
        for (std::size_t j = 0; j < a.utilities.size(); ++j)
            if (a.utilities[j].variable != b.utilities[j].variable) return false;
        for (std::size_t j = 0; j < a.random_coefs.size(); ++j) {
            // Random coefficients must attach to the same utility position.
            auto pos = [](const ClassSpec& c, const std::string& coef) {
                for (std::size_t u = 0; u < c.utilities.size(); ++u)
                    if (c.utilities[u].coef == coef) return static_cast<int>(u);
                return -1;
            };
            if (pos(a, a.random_coefs[j].coef) != pos(b, b.random_coefs[j].coef)) return false;
        }
    }
    return true;
}

ModelSpec parse_model_spec(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SpecError(std::string("model spec is not valid JSON: ") + e.what());
    }
    expect_keys(j, {"family", "classes", "membership", "thresholds", "draws"}, "model spec");

    ModelSpec spec;
    spec.source = j;
    spec.family = family_from_string(j.at("family").get<std::string>());

    if (!j.contains("classes") || !j["classes"].is_array() || j["classes"].empty())
        throw SpecError("model spec needs a non-empty 'classes' array");
    for (const auto& c : j["classes"]) {
        expect_keys(c, {"utilities", "random_coefs", "alternative"}, "class block");
        ClassSpec cs;
        cs.utilities = parse_terms(c.at("utilities"), "utilities");
        if (c.contains("random_coefs")) {
            for (const auto& r : c["random_coefs"]) {
                expect_keys(r, {"coef", "sd_coef"}, "random_coefs entry");
                RandomCoefSpec rc{r.at("coef").get<std::string>(),
                                  r.at("sd_coef").get<std::string>()};
                if (rc.coef == rc.sd_coef)
                    throw SpecError("sd parameter '" + rc.sd_coef +
                                    "' must be distinct from its mean parameter");
                bool found = std::any_of(cs.utilities.begin(), cs.utilities.end(),
                                         [&](const UtilityTerm& t) { return t.coef == rc.coef; });
                if (!found)
                    throw SpecError("random coefficient '" + rc.coef +
                                    "' does not name a utility coefficient of its class");
                cs.random_coefs.push_back(std::move(rc));
            }
        }
        if (c.contains("alternative")) cs.alternative = c["alternative"].get<std::string>();
        spec.classes.push_back(std::move(cs));
    }

    if (j.contains("membership")) {
        if (!j["membership"].is_array())
            throw SpecError("'membership' must be an array with one term list per non-reference class");
        for (const auto& cls : j["membership"]) {
            std::vector<MembershipTerm> terms;
            for (const auto& t : cls) {
                expect_keys(t, {"coef", "variable"}, "membership term");
                terms.push_back({t.at("coef").get<std::string>(), t.at("variable").get<std::string>()});
            }
            if (terms.empty()) throw SpecError("membership term list may not be empty");
            spec.membership.push_back(std::move(terms));
        }
    }

    if (j.contains("thresholds")) {
        expect_keys(j["thresholds"], {"tau1", "deltas"}, "thresholds");
        ThresholdSpec t;
        t.tau1 = j["thresholds"].at("tau1").get<std::string>();
        if (j["thresholds"].contains("deltas"))
            t.deltas = j["thresholds"]["deltas"].get<std::vector<std::string>>();
        spec.thresholds = std::move(t);
    }

    if (j.contains("draws")) {
        const auto& d = j["draws"];
        expect_keys(d, {"count", "method", "seed", "burn_in", "bases"}, "draws");
        if (d.contains("count")) spec.draws.count = d["count"].get<int>();
        if (d.contains("method")) {
            auto m = d["method"].get<std::string>();
            if (m == "halton")
                spec.draws.method = DrawConfig::Method::Halton;
            else if (m == "pseudo")
                spec.draws.method = DrawConfig::Method::Pseudo;
            else
                throw SpecError("draw method must be 'halton' or 'pseudo', found '" + m + "'");
        }
        if (d.contains("seed")) spec.draws.seed = d["seed"].get<std::uint64_t>();
        if (d.contains("burn_in")) spec.draws.burn_in = d["burn_in"].get<int>();
        if (d.contains("bases")) {
            spec.draws.bases = d["bases"].get<std::vector<int>>();
            std::set<int> uniq(spec.draws.bases.begin(), spec.draws.bases.end());
            if (uniq.size() != spec.draws.bases.size())
                throw SpecError("halton bases must be distinct");
            for (int b : spec.draws.bases)
                if (!is_prime(b)) throw SpecError("halton base " + std::to_string(b) + " is not prime");
        }
        if (spec.draws.count < 1) throw SpecError("draw count R must be at least 1");
        if (spec.draws.burn_in < 0) throw SpecError("draw burn_in must be non-negative");
    }

    // Family invariants.
    int z = spec.n_classes();
    switch (spec.family) {
        case Family::BL:
            if (z != 1 || spec.n_random_dims() > 0)
                throw SpecError("BL requires exactly one class and no random coefficients");
            break;
        case Family::MIXL:
            if (z != 1) throw SpecError("MIXL requires exactly one class");
            if (spec.n_random_dims() == 0)
                throw SpecError("MIXL requires at least one random coefficient");
            break;
        case Family::LCM:
            if (z < 2) throw SpecError("LCM requires at least two classes");
            if (spec.n_random_dims() > 0)
                throw SpecError("LCM does not take random coefficients (use LCML)");
            break;
        case Family::LCML:
            if (z < 2) throw SpecError("LCML requires at least two classes");
            if (spec.n_random_dims() == 0)
                throw SpecError("LCML requires at least one random coefficient");
            break;
        case Family::OL:
            if (z != 1) throw SpecError("OL requires exactly one class");
            if (!spec.thresholds) throw SpecError("OL requires a thresholds block");
            break;
        case Family::LR:
            if (z != 1) throw SpecError("LR requires exactly one class");
            break;
    }
    if (z == 1 && !spec.membership.empty())
        throw SpecError("single-class models may not declare a membership block");
    if (z >= 2 && spec.membership.size() != static_cast<std::size_t>(z - 1))
        throw SpecError("a " + std::to_string(z) + "-class model needs " + std::to_string(z - 1) +
                        " membership term lists (the last class is the reference), found " +
                        std::to_string(spec.membership.size()));
    if (spec.thresholds && spec.family != Family::OL)
        throw SpecError("thresholds are only valid for OL");

    // Parameter names must be globally unique within a spec.
    std::set<std::string> seen;
    auto claim = [&](const std::string& name, const std::string& role) {
        if (!seen.insert(name).second)
            throw SpecError("parameter name '" + name + "' (" + role + ") is declared twice");
    };
    for (const auto& c : spec.classes) {
        for (const auto& t : c.utilities) claim(t.coef, "utility coefficient");
    }
    for (const auto& c : spec.classes)
        for (const auto& r : c.random_coefs) claim(r.sd_coef, "sd parameter");
    for (const auto& cls : spec.membership)
        for (const auto& t : cls) claim(t.coef, "membership parameter");
    if (spec.thresholds) {
        claim(spec.thresholds->tau1, "threshold");
        for (const auto& d : spec.thresholds->deltas) claim(d, "threshold increment");
    }
    return spec;
}

ModelSpec load_model_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open model spec '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_model_spec(text);
}

int ParameterLayout::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

ParameterLayout make_layout(const ModelSpec& spec, int n_categories) {
    ParameterLayout layout;
    for (const auto& c : spec.classes) {
        int offset = layout.size();
        for (const auto& t : c.utilities) layout.names.push_back(t.coef);
        layout.class_utilities.push_back({offset, static_cast<int>(c.utilities.size())});
    }
    for (const auto& c : spec.classes) {
        std::vector<int> idx;
        for (const auto& r : c.random_coefs) {
            idx.push_back(layout.size());
            layout.names.push_back(r.sd_coef);
        }
        layout.sd_params.push_back(std::move(idx));
    }
    for (const auto& cls : spec.membership) {
        int offset = layout.size();
        for (const auto& t : cls) layout.names.push_back(t.coef);
        layout.membership_params.push_back({offset, static_cast<int>(cls.size())});
    }
    if (spec.thresholds) {
        layout.tau1 = layout.size();
        layout.names.push_back(spec.thresholds->tau1);
        // A K-category outcome uses K-2 increments; anything further declared
        // is parsed but kept out of the free-parameter vector.
        int usable = std::max(0, n_categories - 2);
        for (std::size_t i = 0; i < spec.thresholds->deltas.size(); ++i) {
            if (static_cast<int>(i) < usable) {
                layout.deltas.push_back(layout.size());
                layout.names.push_back(spec.thresholds->deltas[i]);
            } else {
                layout.excluded_deltas.push_back(spec.thresholds->deltas[i]);
            }
        }
        if (static_cast<int>(layout.deltas.size()) < usable)
            throw SpecError("OL with " + std::to_string(n_categories) + " categories needs " +
                            std::to_string(usable) + " threshold increments, found " +
                            std::to_string(layout.deltas.size()));
    }
    return layout;
}

BoundModel bind_spec(const ModelSpec& spec, const Dataset& dataset) {
    BoundModel bound;
    bound.family = spec.family;
    bound.spec = spec;
    bound.n_obs = static_cast<int>(dataset.n_observations());
    bound.n_ind = static_cast<int>(dataset.n_individuals());
    bound.individuals = dataset.individuals();

    auto column_index = [&](const std::string& var, const std::string& role) -> int {
        if (var == kConstantVariable) return -1;
        auto idx = dataset.var_index(var);
        if (!idx) throw BindError("unknown variable '" + var + "' referenced by " + role);
        return static_cast<int>(*idx);
    };

    const auto& obs = dataset.observations();

    for (const auto& c : spec.classes) {
        Eigen::MatrixXd X(bound.n_obs, static_cast<int>(c.utilities.size()));
        for (std::size_t j = 0; j < c.utilities.size(); ++j) {
            int col = column_index(c.utilities[j].variable,
                                   "utility coefficient '" + c.utilities[j].coef + "'");
            for (int i = 0; i < bound.n_obs; ++i)
                X(i, static_cast<int>(j)) = col < 0 ? 1.0 : obs[i].covariates[col];
        }
        bound.class_X.push_back(std::move(X));
    }

    // Random-coefficient bookkeeping: each (class, coef) pair owns one draw
    // dimension so no dimension is reused across classes.
    int dim = 0;
    for (std::size_t z = 0; z < spec.classes.size(); ++z) {
        const auto& c = spec.classes[z];
        std::vector<int> cols, dims;
        for (const auto& r : c.random_coefs) {
            int pos = -1;
            for (std::size_t u = 0; u < c.utilities.size(); ++u)
                if (c.utilities[u].coef == r.coef) pos = static_cast<int>(u);
            cols.push_back(pos);
            dims.push_back(dim++);
        }
        bound.rc_col.push_back(std::move(cols));
        bound.rc_dim.push_back(std::move(dims));
    }
    bound.n_random_dims = dim;

    for (const auto& cls : spec.membership) {
        Eigen::MatrixXd W(bound.n_ind, static_cast<int>(cls.size()));
        for (std::size_t j = 0; j < cls.size(); ++j) {
            int col = column_index(cls[j].variable, "membership parameter '" + cls[j].coef + "'");
            for (int i = 0; i < bound.n_ind; ++i) {
                const auto& block = bound.individuals[i];
                double v = col < 0 ? 1.0 : obs[block.first].covariates[col];
                if (col >= 0) {
                    for (std::size_t t = 1; t < block.count; ++t) {
                        if (obs[block.first + t].covariates[col] != v)
                            throw BindError("membership variable '" + cls[j].variable +
                                            "' varies within individual " +
                                            std::to_string(block.id));
                    }
                }
                W(i, static_cast<int>(j)) = v;
            }
        }
        bound.membership_W.push_back(std::move(W));
    }

    switch (spec.family) {
        case Family::BL:
        case Family::MIXL:
        case Family::LCM:
        case Family::LCML: {
            bound.y.resize(bound.n_obs);
            for (int i = 0; i < bound.n_obs; ++i) {
                if (!obs[i].choice_y)
                    throw BindError("family " + to_string(spec.family) +
                                    " needs choice_y on every observation");
                bound.y(i) = *obs[i].choice_y;
            }
            break;
        }
        case Family::OL: {
            bound.n_categories = 3;
            bound.y_ordinal.resize(bound.n_obs);
            for (int i = 0; i < bound.n_obs; ++i) {
                if (!obs[i].ordinal_category)
                    throw BindError("family OL needs ordinal_category on every observation");
                bound.y_ordinal(i) = *obs[i].ordinal_category;
            }
            break;
        }
        case Family::LR: {
            bound.y_prop.resize(bound.n_obs);
            for (int i = 0; i < bound.n_obs; ++i) {
                if (!obs[i].auto_proportion)
                    throw BindError("family LR needs auto_proportion on every observation");
                bound.y_prop(i) = *obs[i].auto_proportion;
            }
            break;
        }
    }

    bound.layout = make_layout(spec, bound.n_categories);
    return bound;
}

}  // namespace hetchoice
