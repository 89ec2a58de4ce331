#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "regretrl/adversary.hpp"
#include "regretrl/config.hpp"
#include "regretrl/errors.hpp"
#include "regretrl/learning.hpp"
#include "regretrl/mdp.hpp"
#include "regretrl/oracle.hpp"
#include "regretrl/policy.hpp"
#include "regretrl/rng.hpp"

namespace rrl {

struct EvalConfig {
    int episodes = 100;
    int seeds = 50;
    std::uint64_t seed_base = 0;
    int start_state = 0;

    void validate() const {
        if (episodes < 1) throw config_error("EvalConfig: episodes must be >= 1");
        if (seeds < 1) throw config_error("EvalConfig: seeds must be >= 1");
    }
};

struct EpisodeLog {
    int seed = 0;
    int episode = 0;
    double episode_return = 0.0;
    int steps = 0;
    std::vector<int> fired_steps;
};

/// Evaluation statistics for one victim / adversary cell. variance is the
/// population variance: the mean of squared deviations from the mean, over
/// all episodes of all seeds. Both statistics are recomputable from the
/// per-episode logs.
struct EvalReport {
    double mean = 0.0;
    double variance = 0.0;
    std::vector<EpisodeLog> episodes;
};

namespace detail {

inline void fill_stats(EvalReport& rep) {
    const std::size_t n = rep.episodes.size();
    if (n == 0) return;
    double sum = 0.0;
    for (const EpisodeLog& e : rep.episodes) sum += e.episode_return;
    rep.mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (const EpisodeLog& e : rep.episodes) {
        const double d = e.episode_return - rep.mean;
        sq += d * d;
    }
    rep.variance = sq / static_cast<double>(n);
}

} // namespace detail

/// Rolls episodes of the victim policy under the scheduled adversary.
/// Evaluation seeds run seed_base + 1 .. seed_base + seeds, episodes 0..M-1
/// within each seed. The window offset is not taken from spec: episode m
/// serves offset m mod t_adv, so consecutive episodes jointly cover every
/// step index. Fired step indices are logged per episode.
inline EvalReport evaluate(const TabularMdp& mdp, const PolicyHandle& victim,
                           const AdversarySpec& spec, const AttackInputs& in,
                           const EvalConfig& cfg) {
    cfg.validate();
    spec.validate();
    mdp.validate();
    if (!mdp.in_range_state(cfg.start_state))
        throw config_error("evaluate: start_state out of range");
    EvalReport rep;
    rep.episodes.reserve(static_cast<std::size_t>(cfg.seeds) *
                         static_cast<std::size_t>(cfg.episodes));
    for (int n = 1; n <= cfg.seeds; ++n) {
        std::mt19937_64 rng(cfg.seed_base + static_cast<std::uint64_t>(n));
        for (int m = 0; m < cfg.episodes; ++m) {
            AdversarySpec ep_spec = spec;
            ep_spec.window_offset = m % spec.t_adv;
            EpisodeLog log;
            log.seed = n;
            log.episode = m;
            int s = cfg.start_state;
            double disc = 1.0;
            for (int t = 0; t < mdp.horizon && !mdp.is_terminal(s); ++t) {
                const PerturbedObservation obs = schedule_perturbation(ep_spec, t, s, in);
                if (obs.fired) log.fired_steps.push_back(t);
                const int a = victim.action(obs.shown_state);
                const TransitionRecord tr = step(mdp, s, a, rng, t);
                log.episode_return += disc * tr.reward;
                disc *= mdp.gamma;
                ++log.steps;
                s = tr.next_state;
                if (tr.done) break;
            }
            rep.episodes.push_back(std::move(log));
        }
    }
    detail::fill_stats(rep);
    return rep;
}

/// One trained victim entering the matrix. For drn_plus the value and regret
/// stores are shared with the selected dqn and drn victims: the selector
/// layer learns only the per-state dispatch between those two policies, so
/// it reuses the strongest store of each kind rather than retraining its own.
struct TrainedVictim {
    std::string name;
    PolicyHandle policy;
    ValueStore q;
    ValueStore r;
    SelectorState selector;
    bool is_plus = false;
    int selected_seed = 1;
    double unperturbed_mean = 0.0;
    std::vector<double> seed_means;
};

namespace detail {

inline const TrainedVictim* find_victim(const std::vector<TrainedVictim>& vs,
                                        const std::string& name) {
    for (const TrainedVictim& v : vs)
        if (v.name == name) return &v;
    return nullptr;
}

} // namespace detail

/// Trains every configured learner over train seeds 1..K and keeps, per
/// learner, the seed whose policy scores the highest unperturbed evaluation
/// mean; ties go to the lowest seed. All K per-seed means are retained.
inline std::vector<TrainedVictim> train_victims(const TabularMdp& mdp,
                                                const ExperimentConfig& cfg) {
    cfg.validate();
    EvalConfig ecfg;
    ecfg.episodes = cfg.episodes_per_seed;
    ecfg.seeds = cfg.eval_seeds;
    ecfg.start_state = cfg.learner.start_state;
    const AdversarySpec none_spec;
    AttackInputs none_in;
    none_in.mdp = &mdp;
    auto unperturbed = [&](const PolicyHandle& pi) {
        return evaluate(mdp, pi, none_spec, none_in, ecfg).mean;
    };

    std::vector<TrainedVictim> out;
    for (const std::string& name : cfg.learners) {
        if (name == "drn_plus") continue;
        const LearnerKind kind =
            name == "dqn" ? LearnerKind::q_learner : LearnerKind::drn_learner;
        TrainedVictim best;
        best.name = name;
        for (int k = 1; k <= cfg.train_seeds; ++k) {
            LearnerConfig lc = cfg.learner;
            lc.seed = static_cast<std::uint64_t>(k);
            TrainResult tr = train(mdp, lc, kind);
            const double mean = unperturbed(tr.policy);
            best.seed_means.push_back(mean);
            if (best.seed_means.size() == 1 || mean > best.unperturbed_mean) {
                best.unperturbed_mean = mean;
                best.selected_seed = k;
                best.policy = tr.policy;
                best.q = std::move(tr.q);
                best.r = std::move(tr.r);
            }
        }
        out.push_back(std::move(best));
    }
    for (const std::string& name : cfg.learners) {
        if (name != "drn_plus") continue;
        const TrainedVictim* dqn = detail::find_victim(out, "dqn");
        const TrainedVictim* drn = detail::find_victim(out, "drn");
        if (dqn == nullptr || drn == nullptr)
            throw config_error("train_victims: drn_plus requires dqn and drn");
        TrainedVictim best;
        best.name = name;
        best.is_plus = true;
        for (int k = 1; k <= cfg.train_seeds; ++k) {
            SelectorConfig sc = cfg.selector;
            sc.seed = static_cast<std::uint64_t>(k);
            SelectorState st = train_selector(mdp, dqn->q, drn->r, sc);
            PolicyHandle comp = composite_policy(mdp, st, dqn->q, drn->r);
            const double mean = unperturbed(comp);
            best.seed_means.push_back(mean);
            if (best.seed_means.size() == 1 || mean > best.unperturbed_mean) {
                best.unperturbed_mean = mean;
                best.selected_seed = k;
                best.policy = std::move(comp);
                best.selector = std::move(st);
            }
        }
        best.q = dqn->q;
        best.r = drn->r;
        // Reinsert at the configured position so output order matches the
        // learner list. Pass one preserved the relative order of the others.
        std::size_t pos = 0;
        for (const std::string& n2 : cfg.learners) {
            if (n2 == "drn_plus") break;
            ++pos;
        }
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), std::move(best));
        break;
    }
    return out;
}

struct MatrixCell {
    std::string victim;
    std::string adversary;
    int t_adv = 1;
    double inflation = 0.0;
    bool ok = true;
    std::string error;
    EvalReport report;
};

struct MatrixResult {
    std::vector<TrainedVictim> victims;
    std::vector<MatrixCell> cells;
};

/// Full evaluation matrix: an unperturbed column for every victim, then one
/// column per configured adversary. Actor adversaries are trained once per
/// (target victim, inflation) and each trained actor is evaluated against
/// every victim, so cross attacks are part of the matrix. fgsm cells against
/// non-mlp stores are recorded as failed cells; any per-cell exception is
/// captured the same way and the rest of the matrix still completes.
/// Explicit kind=none entries in the adversary list are skipped because the
/// unperturbed column is always present.
inline MatrixResult run_matrix(const TabularMdp& mdp, const ExperimentConfig& cfg) {
    cfg.validate();
    MatrixResult res;
    res.victims = train_victims(mdp, cfg);
    EvalConfig ecfg;
    ecfg.episodes = cfg.episodes_per_seed;
    ecfg.seeds = cfg.eval_seeds;
    ecfg.start_state = cfg.learner.start_state;

    const ValueStore true_q =
        ValueStore::tabular_from(exact_q_star(mdp), mdp.n_states, mdp.n_actions);

    auto run_cell = [&](const std::string& victim_name, const std::string& adv_name,
                        const AdversarySpec& spec, const AttackInputs& in) {
        MatrixCell cell;
        cell.victim = victim_name;
        cell.adversary = adv_name;
        cell.t_adv = spec.t_adv;
        cell.inflation = spec.inflation;
        try {
            const PolicyHandle& pi = detail::find_victim(res.victims, victim_name)->policy;
            cell.report = evaluate(mdp, pi, spec, in, ecfg);
        } catch (const std::exception& ex) {
            cell.ok = false;
            cell.error = ex.what();
        }
        res.cells.push_back(std::move(cell));
    };

    for (const TrainedVictim& v : res.victims) {
        AdversarySpec none_spec;
        AttackInputs in;
        in.mdp = &mdp;
        run_cell(v.name, "none", none_spec, in);
    }

    // Trained actors keyed by (target victim, inflation bit pattern).
    std::map<std::pair<std::string, std::uint64_t>, AdversarySpec> actors;
    std::map<std::pair<std::string, std::uint64_t>, std::string> actor_errors;

    for (const AdversarySpec& adv : cfg.adversaries) {
        switch (adv.kind) {
            case AdversaryKind::none:
                break;
            case AdversaryKind::myopic:
                for (const TrainedVictim& v : res.victims) {
                    AttackInputs in;
                    in.mdp = &mdp;
                    in.victim_policy = &v.policy;
                    in.true_q = &true_q;
                    run_cell(v.name, "myopic", adv, in);
                }
                break;
            case AdversaryKind::actor:
                for (const TrainedVictim& target : res.victims) {
                    std::uint64_t bits = 0;
                    static_assert(sizeof(bits) == sizeof(adv.inflation));
                    std::memcpy(&bits, &adv.inflation, sizeof(bits));
                    const auto key = std::make_pair(target.name, bits);
                    if (actors.find(key) == actors.end() &&
                        actor_errors.find(key) == actor_errors.end()) {
                        ActorConfig acfg = cfg.actor;
                        acfg.inflation = adv.inflation;
                        try {
                            actors[key] = actor_train(mdp, target.policy, acfg);
                        } catch (const std::exception& ex) {
                            actor_errors[key] = ex.what();
                        }
                    }
                    const std::string adv_name = "actor:" + target.name;
                    for (const TrainedVictim& v : res.victims) {
                        auto err = actor_errors.find(key);
                        if (err != actor_errors.end()) {
                            MatrixCell cell;
                            cell.victim = v.name;
                            cell.adversary = adv_name;
                            cell.t_adv = adv.t_adv;
                            cell.inflation = adv.inflation;
                            cell.ok = false;
                            cell.error = err->second;
                            res.cells.push_back(std::move(cell));
                            continue;
                        }
                        AdversarySpec serving = actors[key];
                        serving.t_adv = adv.t_adv;
                        AttackInputs in;
                        in.mdp = &mdp;
                        in.victim_policy = &v.policy;
                        run_cell(v.name, adv_name, serving, in);
                    }
                }
                break;
            case AdversaryKind::fgsm:
                for (const TrainedVictim& v : res.victims) {
                    if (v.q.empty() || v.q.kind() != StoreKind::mlp) {
                        MatrixCell cell;
                        cell.victim = v.name;
                        cell.adversary = "fgsm";
                        cell.t_adv = adv.t_adv;
                        cell.inflation = adv.inflation;
                        cell.ok = false;
                        cell.error = "unsupported configuration: fgsm requires an mlp value store";
                        res.cells.push_back(std::move(cell));
                        continue;
                    }
                    AttackInputs in;
                    in.mdp = &mdp;
                    in.victim_policy = &v.policy;
                    in.victim_store = &v.q;
                    run_cell(v.name, "fgsm", adv, in);
                }
                break;
        }
    }
    return res;
}

struct SweepRow {
    double inflation = 0.0;
    std::string victim;
    double mean = 0.0;
    double variance = 0.0;
};

/// Robustness sweep: dqn and drn are trained once (same selection protocol
/// as the matrix) and evaluated under the every-step myopic adversary at
/// each neighborhood inflation, in the given order. The inflation 0 rows
/// coincide with a matrix myopic cell run at t_adv = 1.
inline std::vector<SweepRow> neighborhood_sweep(const TabularMdp& mdp,
                                                const ExperimentConfig& cfg,
                                                const std::vector<double>& inflations) {
    cfg.validate();
    for (double inf : inflations)
        if (!(inf >= 0.0)) throw config_error("neighborhood_sweep: inflation must be >= 0");
    ExperimentConfig tcfg = cfg;
    tcfg.learners.clear();
    for (const std::string& l : cfg.learners)
        if (l == "dqn" || l == "drn") tcfg.learners.push_back(l);
    if (tcfg.learners.empty())
        throw config_error("neighborhood_sweep: needs dqn or drn in learners");
    const std::vector<TrainedVictim> victims = train_victims(mdp, tcfg);
    EvalConfig ecfg;
    ecfg.episodes = cfg.episodes_per_seed;
    ecfg.seeds = cfg.eval_seeds;
    ecfg.start_state = cfg.learner.start_state;
    const ValueStore true_q =
        ValueStore::tabular_from(exact_q_star(mdp), mdp.n_states, mdp.n_actions);
    std::vector<SweepRow> rows;
    for (double inf : inflations) {
        for (const TrainedVictim& v : victims) {
            AdversarySpec spec;
            spec.kind = AdversaryKind::myopic;
            spec.t_adv = 1;
            spec.inflation = inf;
            AttackInputs in;
            in.mdp = &mdp;
            in.victim_policy = &v.policy;
            in.true_q = &true_q;
            const EvalReport rep = evaluate(mdp, v.policy, spec, in, ecfg);
            rows.push_back({inf, v.name, rep.mean, rep.variance});
        }
    }
    return rows;
}

struct CorpusInstance {
    TabularMdp mdp;
    std::vector<int> policy;
};

/// 200 random bound-check instances. Sizes are drawn per index from their
/// own generator so the corpus is stable under changes elsewhere: states in
/// 3..6, actions in 2..3, neighborhood size 1..3, with the MDP built from
/// seed i and the checked policy drawn uniformly from seed 9000 + i.
inline std::vector<CorpusInstance> default_bound_corpus() {
    std::vector<CorpusInstance> out;
    out.reserve(200);
    for (int i = 0; i < 200; ++i) {
        std::mt19937_64 size_rng(7000 + static_cast<std::uint64_t>(i));
        const int ns = 3 + uniform_int(size_rng, 4);
        const int na = 2 + uniform_int(size_rng, 2);
        const int k = 1 + uniform_int(size_rng, 3);
        CorpusInstance inst;
        inst.mdp = build_random_mdp(static_cast<std::uint64_t>(i), ns, na, k);
        std::mt19937_64 pol_rng(9000 + static_cast<std::uint64_t>(i));
        inst.policy.resize(static_cast<std::size_t>(ns));
        for (int s = 0; s < ns; ++s) inst.policy[static_cast<std::size_t>(s)] = uniform_int(pol_rng, na);
        out.push_back(std::move(inst));
    }
    return out;
}

/// 50 small instances for the plan-substructure check: 3 states, 2 actions,
/// horizon 3, neighborhood size 1..3 drawn from seed 8000 + j, MDP from seed
/// 5000 + j. Sized so exhaustive plan enumeration stays inside the budget.
inline std::vector<TabularMdp> default_substructure_corpus() {
    std::vector<TabularMdp> out;
    out.reserve(50);
    for (int j = 0; j < 50; ++j) {
        std::mt19937_64 size_rng(8000 + static_cast<std::uint64_t>(j));
        const int k = 1 + uniform_int(size_rng, 3);
        TabularMdp m = build_random_mdp(5000 + static_cast<std::uint64_t>(j), 3, 2, k);
        m.horizon = 3;
        out.push_back(std::move(m));
    }
    return out;
}

struct VerifyInstance {
    std::string check;
    int index = 0;
    bool ok = false;
    bool capacity = false;
    double margin = 0.0;
    double link1 = 0.0;
    double link2 = 0.0;
    std::vector<int> mu;
    std::string note;
};

struct VerifyReport {
    std::vector<VerifyInstance> instances;
    int failures = 0;
    int capacity_errors = 0;

    bool all_ok() const { return failures == 0 && capacity_errors == 0; }
};

/// Runs the exhaustive certificate checks over both corpora. Per bound
/// instance two rows are produced: the regret bound margin and the two-link
/// chain; per substructure instance one row with the worst margin. ccer_bias
/// is a fault-injection hook for the checker's own negative tests: it is
/// added to every CCER reading, so a corrupted table must surface as
/// failures. Capacity overruns are recorded per instance and counted
/// separately from margin failures.
inline VerifyReport verify_corpus(const std::vector<CorpusInstance>& bound_corpus,
                                  const std::vector<TabularMdp>& substructure_corpus,
                                  double ccer_bias = 0.0) {
    VerifyReport rep;
    auto account = [&rep](VerifyInstance&& inst) {
        if (inst.capacity) ++rep.capacity_errors;
        else if (!inst.ok) ++rep.failures;
        rep.instances.push_back(std::move(inst));
    };
    for (std::size_t i = 0; i < bound_corpus.size(); ++i) {
        const CorpusInstance& c = bound_corpus[i];
        VerifyInstance bound;
        bound.check = "ccer_bound";
        bound.index = static_cast<int>(i);
        VerifyInstance chain;
        chain.check = "chain";
        chain.index = static_cast<int>(i);
        try {
            const BoundReport p = check_ccer_bound(c.mdp, c.policy);
            bound.margin = p.margin + ccer_bias;
            bound.ok = bound.margin >= -1e-9;
            bound.mu = p.mu;
            const ChainReport ch = check_chain(c.mdp, c.policy);
            chain.link1 = ch.link1_margin;
            chain.link2 = ch.link2_margin + ccer_bias;
            chain.margin = std::min(chain.link1, chain.link2);
            chain.ok = chain.link1 >= -1e-9 && chain.link2 >= -1e-9;
            chain.mu = ch.mu;
        } catch (const capacity_error& ex) {
            bound.capacity = chain.capacity = true;
            bound.note = chain.note = ex.what();
        }
        account(std::move(bound));
        account(std::move(chain));
    }
    for (std::size_t j = 0; j < substructure_corpus.size(); ++j) {
        VerifyInstance inst;
        inst.check = "substructure";
        inst.index = static_cast<int>(j);
        try {
            const SubstructureReport p = check_substructure(substructure_corpus[j]);
            inst.margin = p.worst_margin;
            inst.ok = p.holds;
        } catch (const capacity_error& ex) {
            inst.capacity = true;
            inst.note = ex.what();
        }
        account(std::move(inst));
    }
    return rep;
}

// ---- serialization ----

/// Shortest round-trip decimal form, identical across runs and locales.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {

/// Summary rows key cells by victim and adversary only, so the label folds
/// in the window period and, when nonzero, the inflation.
inline std::string summary_adversary_label(const MatrixCell& cell) {
    if (cell.adversary == "none") return cell.adversary;
    std::string label = cell.adversary + "_t" + std::to_string(cell.t_adv);
    if (cell.inflation != 0.0) label += "_i" + format_double(cell.inflation);
    return label;
}

} // namespace detail

inline void write_detail_csv(std::ostream& os, const MatrixResult& res) {
    os << "victim,adversary,t_adv,inflation,seed,episode,return\n";
    for (const MatrixCell& cell : res.cells) {
        if (!cell.ok) continue;
        for (const EpisodeLog& e : cell.report.episodes)
            os << cell.victim << ',' << cell.adversary << ',' << cell.t_adv << ','
               << format_double(cell.inflation) << ',' << e.seed << ',' << e.episode << ','
               << format_double(e.episode_return) << '\n';
    }
}

inline void write_summary_csv(std::ostream& os, const MatrixResult& res) {
    os << "victim,adversary,mean,variance\n";
    for (const MatrixCell& cell : res.cells) {
        if (!cell.ok) continue;
        os << cell.victim << ',' << detail::summary_adversary_label(cell) << ','
           << format_double(cell.report.mean) << ',' << format_double(cell.report.variance)
           << '\n';
    }
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "victim,inflation,mean,variance\n";
    for (const SweepRow& r : rows)
        os << r.victim << ',' << format_double(r.inflation) << ',' << format_double(r.mean)
           << ',' << format_double(r.variance) << '\n';
}

inline nlohmann::json eval_report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["mean"] = rep.mean;
    j["variance"] = rep.variance;
    nlohmann::json eps = nlohmann::json::array();
    for (const EpisodeLog& e : rep.episodes) {
        nlohmann::json je;
        je["seed"] = e.seed;
        je["episode"] = e.episode;
        je["return"] = e.episode_return;
        je["steps"] = e.steps;
        je["fired_steps"] = e.fired_steps;
        eps.push_back(std::move(je));
    }
    j["episodes"] = std::move(eps);
    return j;
}

inline nlohmann::json matrix_to_json(const MatrixResult& res) {
    nlohmann::json j;
    nlohmann::json vs = nlohmann::json::array();
    for (const TrainedVictim& v : res.victims) {
        nlohmann::json jv;
        jv["name"] = v.name;
        jv["selected_seed"] = v.selected_seed;
        jv["unperturbed_mean"] = v.unperturbed_mean;
        jv["seed_means"] = v.seed_means;
        vs.push_back(std::move(jv));
    }
    j["victims"] = std::move(vs);
    nlohmann::json cells = nlohmann::json::array();
    for (const MatrixCell& cell : res.cells) {
        nlohmann::json jc;
        jc["victim"] = cell.victim;
        jc["adversary"] = cell.adversary;
        jc["t_adv"] = cell.t_adv;
        jc["inflation"] = cell.inflation;
        jc["ok"] = cell.ok;
        if (!cell.ok) jc["error"] = cell.error;
        else jc["report"] = eval_report_to_json(cell.report);
        cells.push_back(std::move(jc));
    }
    j["cells"] = std::move(cells);
    return j;
}

inline nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const SweepRow& r : rows) {
        nlohmann::json jr;
        jr["victim"] = r.victim;
        jr["inflation"] = r.inflation;
        jr["mean"] = r.mean;
        jr["variance"] = r.variance;
        j.push_back(std::move(jr));
    }
    return j;
}

inline nlohmann::json verify_to_json(const VerifyReport& rep) {
    nlohmann::json j;
    j["failures"] = rep.failures;
    j["capacity_errors"] = rep.capacity_errors;
    j["ok"] = rep.all_ok();
    nlohmann::json rows = nlohmann::json::array();
    for (const VerifyInstance& inst : rep.instances) {
        nlohmann::json ji;
        ji["check"] = inst.check;
        ji["index"] = inst.index;
        ji["ok"] = inst.ok;
        ji["capacity"] = inst.capacity;
        ji["margin"] = inst.margin;
        if (inst.check == "chain") {
            ji["link1"] = inst.link1;
            ji["link2"] = inst.link2;
        }
        if (!inst.mu.empty()) ji["mu"] = inst.mu;
        if (!inst.note.empty()) ji["note"] = inst.note;
        rows.push_back(std::move(ji));
    }
    j["instances"] = std::move(rows);
    return j;
}

} // namespace rrl
