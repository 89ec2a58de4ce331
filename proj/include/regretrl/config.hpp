#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "regretrl/adversary.hpp"
#include "regretrl/errors.hpp"
#include "regretrl/fixtures.hpp"
#include "regretrl/learning.hpp"
#include "regretrl/mdp.hpp"

namespace rrl {

struct EnvironmentConfig {
    std::string id = "twolane";
    int width = 4;
    int height = 3;
    double penalty = -100.0;
    double goal = 10.0;
    double slip = 0.0;
    std::uint64_t seed = 0;
    int states = 6;
    int actions = 3;
    int nbhd = 3;
};

/// Experiment-wide settings: which environment, which learners, which
/// adversary columns, and the K/N/M protocol sizes. Train seeds run 1..K and
/// eval seeds 1..N.
struct ExperimentConfig {
    EnvironmentConfig environment;
    std::vector<std::string> learners = {"dqn", "drn", "drn_plus"};
    LearnerConfig learner;
    SelectorConfig selector;
    ActorConfig actor;
    std::vector<AdversarySpec> adversaries;
    std::vector<double> sweep_inflations = {0.0, 0.1, 0.2};
    int train_seeds = 10;
    int eval_seeds = 50;
    int episodes_per_seed = 100;
    std::string out_dir = ".";
    std::string format = "csv";

    void validate() const {
        if (train_seeds < 1 || eval_seeds < 1 || episodes_per_seed < 1)
            throw config_error("ExperimentConfig: train_seeds, eval_seeds, episodes_per_seed must be >= 1");
        if (format != "csv" && format != "json")
            throw config_error("ExperimentConfig: format must be csv or json");
        if (environment.id != "twolane" && environment.id != "cliff" && environment.id != "random")
            throw config_error("ExperimentConfig: unknown environment " + environment.id);
        if (learners.empty()) throw config_error("ExperimentConfig: learners must not be empty");
        bool has_dqn = false;
        bool has_drn = false;
        bool has_plus = false;
        for (const std::string& l : learners) {
            bool* flag = nullptr;
            if (l == "dqn") flag = &has_dqn;
            else if (l == "drn") flag = &has_drn;
            else if (l == "drn_plus") flag = &has_plus;
            else throw config_error("ExperimentConfig: unknown learner " + l);
            if (*flag) throw config_error("ExperimentConfig: duplicate learner " + l);
            *flag = true;
        }
        if (has_plus && (!has_dqn || !has_drn))
            throw config_error("ExperimentConfig: drn_plus requires dqn and drn");
        learner.validate();
        selector.validate();
        actor.validate();
        for (const AdversarySpec& a : adversaries) a.validate(false);
        for (double inf : sweep_inflations)
            if (!(inf >= 0.0)) throw config_error("ExperimentConfig: sweep inflations must be >= 0");
    }
};

inline TabularMdp build_environment(const EnvironmentConfig& env) {
    if (env.id == "twolane") return build_twolane();
    if (env.id == "cliff")
        return build_cliff_grid(env.width, env.height, env.penalty, env.goal, env.slip);
    if (env.id == "random") return build_random_mdp(env.seed, env.states, env.actions, env.nbhd);
    throw config_error("build_environment: unknown environment " + env.id);
}

inline AdversaryKind adversary_kind_from(const std::string& s) {
    if (s == "none") return AdversaryKind::none;
    if (s == "myopic") return AdversaryKind::myopic;
    if (s == "actor") return AdversaryKind::actor;
    if (s == "fgsm") return AdversaryKind::fgsm;
    throw config_error("unknown adversary kind " + s);
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const char* where,
                       std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw config_error(std::string(where) + ": unknown key " + it.key());
    }
}

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw config_error(std::string("config: bad value for ") + key);
        }
    }
}

inline void read_eps(const nlohmann::json& j, EpsSchedule& eps) {
    read_into(j, "eps_start", eps.start);
    read_into(j, "eps_end", eps.end);
    read_into(j, "eps_decay_episodes", eps.decay_episodes);
}

} // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw config_error("config: document must be an object");
    detail::check_keys(j, "config",
                       {"environment", "learners", "learner", "selector", "actor", "adversaries",
                        "sweep_inflations", "train_seeds", "eval_seeds", "episodes_per_seed", "out",
                        "format"});
    ExperimentConfig cfg;
    if (j.contains("environment")) {
        const nlohmann::json& e = j.at("environment");
        detail::check_keys(e, "environment",
                           {"id", "width", "height", "penalty", "goal", "slip", "seed", "states",
                            "actions", "nbhd"});
        detail::read_into(e, "id", cfg.environment.id);
        detail::read_into(e, "width", cfg.environment.width);
        detail::read_into(e, "height", cfg.environment.height);
        detail::read_into(e, "penalty", cfg.environment.penalty);
        detail::read_into(e, "goal", cfg.environment.goal);
        detail::read_into(e, "slip", cfg.environment.slip);
        detail::read_into(e, "seed", cfg.environment.seed);
        detail::read_into(e, "states", cfg.environment.states);
        detail::read_into(e, "actions", cfg.environment.actions);
        detail::read_into(e, "nbhd", cfg.environment.nbhd);
    }
    detail::read_into(j, "learners", cfg.learners);
    if (j.contains("learner")) {
        const nlohmann::json& l = j.at("learner");
        detail::check_keys(l, "learner",
                           {"episodes", "alpha_q", "alpha_r", "eps_start", "eps_end",
                            "eps_decay_episodes", "nbhd_cap", "store", "feature", "hidden"});
        detail::read_into(l, "episodes", cfg.learner.episodes);
        detail::read_into(l, "alpha_q", cfg.learner.alpha_q);
        detail::read_into(l, "alpha_r", cfg.learner.alpha_r);
        detail::read_eps(l, cfg.learner.eps);
        detail::read_into(l, "nbhd_cap", cfg.learner.nbhd_cap);
        detail::read_into(l, "hidden", cfg.learner.hidden);
        if (l.contains("store")) {
            std::string s = l.at("store").get<std::string>();
            if (s == "tabular") cfg.learner.store = StoreKind::tabular;
            else if (s == "mlp") cfg.learner.store = StoreKind::mlp;
            else throw config_error("learner: store must be tabular or mlp");
        }
        if (l.contains("feature")) {
            std::string s = l.at("feature").get<std::string>();
            if (s == "one_hot") cfg.learner.feature = FeatureKind::one_hot;
            else if (s == "grid_xy") cfg.learner.feature = FeatureKind::grid_xy;
            else throw config_error("learner: feature must be one_hot or grid_xy");
        }
    }
    if (j.contains("selector")) {
        const nlohmann::json& s = j.at("selector");
        detail::check_keys(s, "selector",
                           {"episodes", "alpha", "eps_start", "eps_end", "eps_decay_episodes",
                            "p_adv", "t_adv", "inflation"});
        detail::read_into(s, "episodes", cfg.selector.episodes);
        detail::read_into(s, "alpha", cfg.selector.alpha);
        detail::read_eps(s, cfg.selector.eps);
        detail::read_into(s, "p_adv", cfg.selector.p_adv);
        detail::read_into(s, "t_adv", cfg.selector.t_adv);
        detail::read_into(s, "inflation", cfg.selector.inflation);
    }
    if (j.contains("actor")) {
        const nlohmann::json& a = j.at("actor");
        detail::check_keys(a, "actor",
                           {"episodes", "alpha", "eps_start", "eps_end", "eps_decay_episodes",
                            "inflation"});
        detail::read_into(a, "episodes", cfg.actor.episodes);
        detail::read_into(a, "alpha", cfg.actor.alpha);
        detail::read_eps(a, cfg.actor.eps);
        detail::read_into(a, "inflation", cfg.actor.inflation);
    }
    if (j.contains("adversaries")) {
        if (!j.at("adversaries").is_array())
            throw config_error("config: adversaries must be an array");
        for (const nlohmann::json& a : j.at("adversaries")) {
            detail::check_keys(a, "adversary", {"kind", "t_adv", "inflation", "epsilon"});
            AdversarySpec spec;
            std::string kind = "none";
            detail::read_into(a, "kind", kind);
            spec.kind = adversary_kind_from(kind);
            detail::read_into(a, "t_adv", spec.t_adv);
            detail::read_into(a, "inflation", spec.inflation);
            detail::read_into(a, "epsilon", spec.epsilon);
            cfg.adversaries.push_back(spec);
        }
    }
    detail::read_into(j, "sweep_inflations", cfg.sweep_inflations);
    detail::read_into(j, "train_seeds", cfg.train_seeds);
    detail::read_into(j, "eval_seeds", cfg.eval_seeds);
    detail::read_into(j, "episodes_per_seed", cfg.episodes_per_seed);
    detail::read_into(j, "out", cfg.out_dir);
    detail::read_into(j, "format", cfg.format);
    cfg.validate();
    return cfg;
}

namespace detail {

/// Reader for the small TOML slice used by config files: comments, bare
/// key = value pairs, [table] headers one level deep, and [[adversaries]]
/// blocks. Values may be quoted strings, integers, floats, booleans, or flat
/// arrays of those. Everything else is rejected.
inline nlohmann::json toml_subset_to_json(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* scope = &root;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto fail = [&lineno](const std::string& why) -> void {
        throw config_error("config line " + std::to_string(lineno) + ": " + why);
    };
    auto trim = [](std::string s) {
        std::size_t b = s.find_first_not_of(" \t\r");
        std::size_t e = s.find_last_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        return s.substr(b, e - b + 1);
    };
    auto parse_scalar = [&fail, &trim](std::string v) -> nlohmann::json {
        v = trim(v);
        if (v.empty()) fail("missing value");
        if (v.front() == '"') {
            if (v.size() < 2 || v.back() != '"') fail("unterminated string");
            return v.substr(1, v.size() - 2);
        }
        if (v == "true") return true;
        if (v == "false") return false;
        long long ll = 0;
        auto [ip, iec] = std::from_chars(v.data(), v.data() + v.size(), ll);
        if (iec == std::errc() && ip == v.data() + v.size()) return ll;
        double d = 0.0;
        auto [dp, dec] = std::from_chars(v.data(), v.data() + v.size(), d);
        if (dec == std::errc() && dp == v.data() + v.size()) return d;
        fail("unparseable value " + v);
        return nullptr;
    };
    while (std::getline(in, line)) {
        ++lineno;
        // Strip comments outside quoted strings.
        bool quoted = false;
        std::string bare;
        for (char c : line) {
            if (c == '"') quoted = !quoted;
            if (c == '#' && !quoted) break;
            bare.push_back(c);
        }
        bare = trim(bare);
        if (bare.empty()) continue;
        if (bare.front() == '[') {
            if (bare.size() > 4 && bare.substr(0, 2) == "[[" &&
                bare.substr(bare.size() - 2) == "]]") {
                std::string name = trim(bare.substr(2, bare.size() - 4));
                if (name.empty()) fail("empty table name");
                if (!root.contains(name)) root[name] = nlohmann::json::array();
                if (!root[name].is_array()) fail(name + " is not an array of tables");
                root[name].push_back(nlohmann::json::object());
                scope = &root[name].back();
                continue;
            }
            if (bare.back() != ']') fail("malformed table header");
            std::string name = trim(bare.substr(1, bare.size() - 2));
            if (name.empty()) fail("empty table name");
            if (root.contains(name) && !root[name].is_object())
                fail(name + " is not a table");
            if (!root.contains(name)) root[name] = nlohmann::json::object();
            scope = &root[name];
            continue;
        }
        std::size_t eq = bare.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        std::string key = trim(bare.substr(0, eq));
        std::string value = trim(bare.substr(eq + 1));
        if (key.empty()) fail("empty key");
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']') fail("unterminated array");
            nlohmann::json arr = nlohmann::json::array();
            std::string body = value.substr(1, value.size() - 2);
            std::string item;
            bool q = false;
            for (char c : body) {
                if (c == '"') q = !q;
                if (c == ',' && !q) {
                    arr.push_back(parse_scalar(item));
                    item.clear();
                } else {
                    item.push_back(c);
                }
            }
            if (!trim(item).empty()) arr.push_back(parse_scalar(item));
            (*scope)[key] = arr;
            continue;
        }
        (*scope)[key] = parse_scalar(value);
    }
    return root;
}

} // namespace detail

/// Loads a config file, dispatching on content: documents starting with '{'
/// parse as JSON, everything else as the TOML subset.
inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("load_config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    std::size_t first = text.find_first_not_of(" \t\r\n");
    nlohmann::json j;
    if (first != std::string::npos && text[first] == '{') {
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& ex) {
            throw config_error(std::string("load_config: bad JSON: ") + ex.what());
        }
    } else {
        j = detail::toml_subset_to_json(text);
    }
    return config_from_json(j);
}

} // namespace rrl
