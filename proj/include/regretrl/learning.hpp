#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "regretrl/adversary.hpp"
#include "regretrl/errors.hpp"
#include "regretrl/mdp.hpp"
#include "regretrl/oracle.hpp"
#include "regretrl/policy.hpp"
#include "regretrl/rng.hpp"
#include "regretrl/schedule.hpp"
#include "regretrl/value_store.hpp"

namespace rrl {

enum class LearnerKind { q_learner, drn_learner };

inline const char* learner_kind_name(LearnerKind k) {
    return k == LearnerKind::q_learner ? "dqn" : "drn";
}

struct LearnerConfig {
    int episodes = 3000;
    double alpha_q = 1.0;
    double alpha_r = 1.0;
    EpsSchedule eps{};
    std::uint64_t seed = 1;
    int nbhd_cap = 10;
    StoreKind store = StoreKind::tabular;
    FeatureKind feature = FeatureKind::one_hot;
    int hidden = 32;
    int start_state = 0;

    void validate() const {
        if (episodes < 0) throw config_error("LearnerConfig: episodes must be >= 0");
        if (!(alpha_q > 0.0) || !(alpha_r > 0.0))
            throw config_error("LearnerConfig: learning rates must be > 0");
        if (nbhd_cap < 1) throw config_error("LearnerConfig: nbhd_cap must be >= 1");
        if (hidden < 1) throw config_error("LearnerConfig: hidden must be >= 1");
        eps.validate();
    }
};

struct CurvePoint {
    int episode = 0;
    double episode_return = 0.0;
    double mean_loss = 0.0;
};

struct TrainResult {
    ValueStore q;
    ValueStore r;
    PolicyHandle policy;
    std::vector<CurvePoint> curve;
    std::vector<TransitionRecord> replay;
};

/// One-step value backup toward r + gamma * max_a' Q(s', a'), bootstrapping 0
/// past terminal transitions. Returns the pre-update loss.
inline double q_update(ValueStore& store, const TransitionRecord& tr, double gamma, double alpha) {
    double boot = 0.0;
    if (!tr.done) {
        std::vector<double> row = store.predict(tr.next_state);
        boot = *std::max_element(row.begin(), row.end());
    }
    return store.fit_target(tr.state, tr.action, tr.reward + gamma * boot, alpha);
}

/// The neighborhood drn_update ranges over: the declared members of s,
/// truncated to at most cap states. Truncation keeps the lowest ids and
/// always retains the center.
inline NeighborhoodSample capped_neighborhood(const TabularMdp& mdp, int s, int cap) {
    if (cap < 1) throw std::invalid_argument("capped_neighborhood: cap must be >= 1");
    NeighborhoodSample nb;
    nb.center = s;
    nb.members = mdp.neighborhoods.at(static_cast<std::size_t>(s));
    if (static_cast<int>(nb.members.size()) > cap) {
        bool center_kept = std::binary_search(nb.members.begin(), nb.members.begin() + cap, s);
        nb.members.resize(static_cast<std::size_t>(cap));
        if (!center_kept) nb.members.back() = s;
    }
    return nb;
}

/// Regret backup: the immediate term is the gap between the realized reward
/// and the cheapest reward the same action earns anywhere in the neighborhood
/// of the true state; the continuation bootstraps the cheapest regret at s'.
inline double drn_update(ValueStore& store, const TabularMdp& mdp, const TransitionRecord& tr,
                         const NeighborhoodSample& nbhd, double gamma, double alpha) {
    if (nbhd.center != tr.state)
        throw std::invalid_argument("drn_update: neighborhood center must be the transition state");
    if (nbhd.members.empty()) throw std::invalid_argument("drn_update: empty neighborhood");
    double r_min = reward_query(mdp, nbhd.members[0], tr.action);
    for (std::size_t i = 1; i < nbhd.members.size(); ++i)
        r_min = std::min(r_min, reward_query(mdp, nbhd.members[i], tr.action));
    double boot = 0.0;
    if (!tr.done) {
        std::vector<double> row = store.predict(tr.next_state);
        boot = *std::min_element(row.begin(), row.end());
    }
    return store.fit_target(tr.state, tr.action, (tr.reward - r_min) + gamma * boot, alpha);
}

namespace detail {

inline ValueStore make_store(const TabularMdp& mdp, const LearnerConfig& cfg, std::mt19937_64& rng) {
    if (cfg.store == StoreKind::tabular) return ValueStore::tabular(mdp.n_states, mdp.n_actions);
    FeatureMap fm = cfg.feature == FeatureKind::one_hot ? FeatureMap::one_hot(mdp.n_states)
                                                        : FeatureMap::grid_xy(mdp);
    return ValueStore::mlp(fm, mdp.n_actions, cfg.hidden, rng);
}

[[noreturn]] inline void abort_diverged(const char* who, int episode, int t, const char* what) {
    throw std::runtime_error(std::string(who) + ": diverged at episode " + std::to_string(episode) +
                             " step " + std::to_string(t) + " (" + what + ")");
}

} // namespace detail

/// Trains a learner by epsilon-greedy rollouts over its own current policy
/// extraction, updating per step. The drn learner fits the regret store and a
/// plain value store side by side; the value store supplies the extraction
/// tie-break. Every transition taken is retained in replay for audit, and the
/// curve records one (episode, return, mean loss) row per episode with the
/// loss averaged over the learner's primary store. Non-finite store values
/// abort with a diagnostic. Zero episodes yields a uniform policy.
inline TrainResult train(const TabularMdp& mdp, const LearnerConfig& cfg, LearnerKind kind) {
    cfg.validate();
    if (!mdp.in_range_state(cfg.start_state))
        throw config_error("train: start_state out of range");
    std::mt19937_64 rng(cfg.seed);
    TrainResult out;
    out.q = detail::make_store(mdp, cfg, rng);
    if (kind == LearnerKind::drn_learner) out.r = detail::make_store(mdp, cfg, rng);
    if (cfg.episodes == 0) {
        out.policy = extract_policy(mdp, PolicyKind::uniform, nullptr, nullptr);
        return out;
    }
    out.curve.reserve(static_cast<std::size_t>(cfg.episodes));
    for (int e = 0; e < cfg.episodes; ++e) {
        double epsv = cfg.eps.at(e, cfg.episodes);
        int s = cfg.start_state;
        double ret = 0.0;
        double disc = 1.0;
        double loss_sum = 0.0;
        int steps = 0;
        for (int t = 0; t < mdp.horizon && !mdp.is_terminal(s); ++t) {
            int a;
            if (canonical(rng) < epsv) {
                a = uniform_int(rng, mdp.n_actions);
            } else if (kind == LearnerKind::q_learner) {
                a = greedy_value_action(out.q.predict(s));
            } else {
                a = greedy_regret_action(out.r.predict(s), out.q.predict(s));
            }
            TransitionRecord tr = step(mdp, s, a, rng, t);
            double loss;
            // fit_target rejects non-finite targets; inside this loop that
            // can only mean the store blew up, so map it to the abort path.
            try {
                if (kind == LearnerKind::q_learner) {
                    loss = q_update(out.q, tr, mdp.gamma, cfg.alpha_q);
                } else {
                    loss = drn_update(out.r, mdp, tr, capped_neighborhood(mdp, s, cfg.nbhd_cap),
                                      mdp.gamma, cfg.alpha_r);
                    q_update(out.q, tr, mdp.gamma, cfg.alpha_q);
                }
            } catch (const std::invalid_argument& ex) {
                detail::abort_diverged("train", e, t, ex.what());
            }
            if (!std::isfinite(loss)) detail::abort_diverged("train", e, t, "non-finite loss");
            loss_sum += loss;
            ++steps;
            out.replay.push_back(tr);
            ret += disc * tr.reward;
            disc *= mdp.gamma;
            s = tr.next_state;
            if (tr.done) break;
        }
        out.curve.push_back({e, ret, steps > 0 ? loss_sum / steps : 0.0});
    }
    out.policy = kind == LearnerKind::q_learner
                     ? extract_policy(mdp, PolicyKind::value_greedy, &out.q, nullptr)
                     : extract_policy(mdp, PolicyKind::regret_greedy, &out.q, &out.r);
    return out;
}

struct SelectorConfig {
    int episodes = 2000;
    double alpha = 0.2;
    EpsSchedule eps{};
    double p_adv = 0.5;
    std::uint64_t seed = 1;
    int t_adv = 1;
    double inflation = 0.2;

    void validate() const {
        if (episodes < 0) throw config_error("SelectorConfig: episodes must be >= 0");
        if (!(alpha > 0.0)) throw config_error("SelectorConfig: alpha must be > 0");
        if (!(p_adv >= 0.0 && p_adv <= 1.0))
            throw config_error("SelectorConfig: p_adv must lie in [0, 1]");
        if (t_adv < 1) throw config_error("SelectorConfig: t_adv must be >= 1");
        if (!(inflation >= 0.0)) throw config_error("SelectorConfig: inflation must be >= 0");
        eps.validate();
    }
};

/// Trains the binary dispatcher over frozen sub-policy stores. Each episode
/// runs under attack with probability p_adv; the attacker is the myopic one,
/// aimed at the selector's own current composite behavior and firing on the
/// offset-0 window. Episodes start uniformly over non-terminal states: the
/// attacker can stall the composite near any fixed start, which would leave
/// the observations reachable only beyond the stall point untrained and
/// therefore exploitable at deployment. The choice table is keyed on the
/// observed state, because that is all the deployed selector will see.
/// Updates follow the one-step value backup, delayed one step so the
/// bootstrap uses the next observation rather than the unobservable next
/// true state; horizon truncation bootstraps from the final true state.
inline SelectorState train_selector(const TabularMdp& mdp, const ValueStore& q_store,
                                    const ValueStore& r_store, const SelectorConfig& cfg) {
    cfg.validate();
    if (q_store.empty() || r_store.empty())
        throw config_error("train_selector: requires trained q and regret stores");
    SelectorState sel;
    sel.mode = SelectorMode::learned;
    sel.tau = 0.0;
    sel.p_adv = cfg.p_adv;
    sel.choice_q = ValueStore::tabular(mdp.n_states, 2);

    const ValueStore true_q =
        ValueStore::tabular_from(exact_q_star(mdp), mdp.n_states, mdp.n_actions);
    std::vector<NeighborhoodSample> nbhd;
    nbhd.reserve(static_cast<std::size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) nbhd.push_back(neighborhood_of(mdp, s, cfg.inflation));
    std::vector<int> starts;
    for (int s = 0; s < mdp.n_states; ++s)
        if (!mdp.is_terminal(s)) starts.push_back(s);
    if (starts.empty()) throw config_error("train_selector: no non-terminal start states");

    std::mt19937_64 rng(cfg.seed);
    auto choice_value = [&sel](int view) {
        std::vector<double> row = sel.choice_q.predict(view);
        return std::max(row[0], row[1]);
    };
    for (int e = 0; e < cfg.episodes; ++e) {
        double epsv = cfg.eps.at(e, cfg.episodes);
        bool adversarial = canonical(rng) < cfg.p_adv;
        int s = starts[static_cast<std::size_t>(uniform_int(rng, static_cast<int>(starts.size())))];
        bool pending = false;
        int pend_view = 0;
        int pend_choice = 0;
        double pend_reward = 0.0;
        for (int t = 0; t < mdp.horizon && !mdp.is_terminal(s); ++t) {
            int shown = s;
            if (adversarial && t % cfg.t_adv == 0) {
                shown = myopic_attack_with(
                    true_q, [&](int view) { return composite_action(sel, view, q_store, r_store); },
                    s, nbhd[static_cast<std::size_t>(s)]);
            }
            if (pending) {
                sel.choice_q.fit_target(pend_view, pend_choice,
                                        pend_reward + mdp.gamma * choice_value(shown), cfg.alpha);
                pending = false;
            }
            int choice;
            if (canonical(rng) < epsv) {
                choice = uniform_int(rng, 2);
            } else {
                std::vector<double> row = sel.choice_q.predict(shown);
                choice = row[1] > row[0] ? 1 : 0;
            }
            int a = choice == 0 ? greedy_value_action(q_store.predict(shown))
                                : greedy_regret_action(r_store.predict(shown), q_store.predict(shown));
            TransitionRecord tr = step(mdp, s, a, rng, t);
            if (tr.done) {
                sel.choice_q.fit_target(shown, choice, tr.reward, cfg.alpha);
            } else {
                pending = true;
                pend_view = shown;
                pend_choice = choice;
                pend_reward = tr.reward;
            }
            s = tr.next_state;
            if (tr.done) break;
        }
        if (pending)
            sel.choice_q.fit_target(pend_view, pend_choice,
                                    pend_reward + mdp.gamma * choice_value(s), cfg.alpha);
    }
    return sel;
}

} // namespace rrl
