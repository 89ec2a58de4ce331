#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "regretrl/errors.hpp"
#include "regretrl/mdp.hpp"
#include "regretrl/policy.hpp"
#include "regretrl/rng.hpp"
#include "regretrl/schedule.hpp"
#include "regretrl/value_store.hpp"

namespace rrl {

enum class AdversaryKind { none, myopic, actor, fgsm };

inline const char* adversary_kind_name(AdversaryKind k) {
    switch (k) {
        case AdversaryKind::none: return "none";
        case AdversaryKind::myopic: return "myopic";
        case AdversaryKind::actor: return "actor";
        case AdversaryKind::fgsm: return "fgsm";
    }
    return "?";
}

/// Observation-channel attacker. The window rule fires on step indices t with
/// t mod t_adv == window_offset; a fired attack replaces the observation with
/// a state drawn from the inflated neighborhood of the true state.
struct AdversarySpec {
    AdversaryKind kind = AdversaryKind::none;
    int t_adv = 1;
    int window_offset = 0;
    double inflation = 0.0;
    double epsilon = 1.0;
    ValueStore actor;

    /// require_actor_store distinguishes serve-time validation from
    /// config-time validation, where the actor table has not been trained yet.
    void validate(bool require_actor_store = true) const {
        if (t_adv < 1) throw config_error("AdversarySpec: t_adv must be >= 1");
        if (window_offset < 0 || window_offset >= t_adv)
            throw config_error("AdversarySpec: window_offset must lie in [0, t_adv)");
        if (!(inflation >= 0.0)) throw config_error("AdversarySpec: inflation must be >= 0");
        if (kind == AdversaryKind::fgsm && !(epsilon > 0.0))
            throw config_error("AdversarySpec: fgsm requires epsilon > 0");
        if (require_actor_store && kind == AdversaryKind::actor && actor.empty())
            throw config_error("AdversarySpec: actor kind requires a trained actor store");
    }
};

struct PerturbedObservation {
    int true_state = 0;
    int shown_state = 0;
    bool fired = false;
};

/// Worst-case one-step attack: among the candidate observations, pick the one
/// whose induced victim action scores lowest at the true state. victim_action
/// maps an observed state to the action the victim would take there; true_q
/// holds state-action values indexed by the true state (an oracle-exact table
/// or the victim's converged store). Ties resolve to the lowest state id.
template <typename ActFn>
int myopic_attack_with(const ValueStore& true_q, ActFn&& victim_action, int s,
                       const NeighborhoodSample& nbhd) {
    if (nbhd.center != s)
        throw std::invalid_argument("myopic_attack: neighborhood center must be the true state");
    if (nbhd.members.empty())
        throw std::invalid_argument("myopic_attack: empty neighborhood");
    std::vector<double> row = true_q.predict(s);
    int best = -1;
    double best_v = 0.0;
    for (int cand : nbhd.members) {
        int a = victim_action(cand);
        if (a < 0 || a >= static_cast<int>(row.size()))
            throw std::invalid_argument("myopic_attack: victim action out of range");
        double v = row[static_cast<std::size_t>(a)];
        if (best < 0 || v < best_v || (v == best_v && cand < best)) {
            best = cand;
            best_v = v;
        }
    }
    return best;
}

inline int myopic_attack(const ValueStore& true_q, const PolicyHandle& victim_policy, int s,
                         const NeighborhoodSample& nbhd) {
    return myopic_attack_with(true_q, [&victim_policy](int view) { return victim_policy.action(view); },
                              s, nbhd);
}

/// Gradient-sign attack on an mlp victim. Steps the feature vector of s
/// against the gradient of the chosen action's value, then projects back onto
/// the neighborhood by nearest Euclidean distance in feature space (ties to
/// the lowest state id). action = -1 uses the store's greedy action at s.
inline int fgsm_attack(const ValueStore& victim, int s, double epsilon,
                       const NeighborhoodSample& nbhd, int action = -1) {
    if (victim.kind() != StoreKind::mlp)
        throw config_error("fgsm_attack: unsupported configuration, victim store must be mlp");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("fgsm_attack: epsilon must be >= 0");
    if (nbhd.center != s)
        throw std::invalid_argument("fgsm_attack: neighborhood center must be the true state");
    std::vector<double> row = victim.predict(s);
    int a = action;
    if (a < 0) a = greedy_value_action(row);
    if (a >= static_cast<int>(row.size()))
        throw std::invalid_argument("fgsm_attack: action out of range");
    std::vector<double> grad = victim.input_gradient(s, a);
    std::vector<double> phi = victim.features().features(s);
    for (std::size_t i = 0; i < phi.size(); ++i) {
        double g = grad[i];
        double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
        phi[i] -= epsilon * sign;
    }
    int best = -1;
    double best_d = 0.0;
    for (int cand : nbhd.members) {
        std::vector<double> c = victim.features().features(cand);
        double d = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            double diff = c[i] - phi[i];
            d += diff * diff;
        }
        if (best < 0 || d < best_d || (d == best_d && cand < best)) {
            best = cand;
            best_d = d;
        }
    }
    return best;
}

/// Victim-side material an attack may need at serve time. Myopic needs the
/// true-state value table and the victim's policy; fgsm needs the victim's
/// mlp store.
struct AttackInputs {
    const TabularMdp* mdp = nullptr;
    const PolicyHandle* victim_policy = nullptr;
    const ValueStore* true_q = nullptr;
    const ValueStore* victim_store = nullptr;
    int victim_action = -1;
};

/// Applies the window rule and delegates to the kind-specific attack. A fire
/// always yields a shown state inside the inflated neighborhood of the true
/// state; kind none never fires.
inline PerturbedObservation schedule_perturbation(const AdversarySpec& spec, int step_index,
                                                  int true_state, const AttackInputs& in) {
    spec.validate();
    if (step_index < 0) throw std::invalid_argument("schedule_perturbation: negative step index");
    PerturbedObservation obs;
    obs.true_state = true_state;
    obs.shown_state = true_state;
    obs.fired = false;
    if (spec.kind == AdversaryKind::none) return obs;
    if (step_index % spec.t_adv != spec.window_offset) return obs;
    if (in.mdp == nullptr) throw config_error("schedule_perturbation: mdp required");
    NeighborhoodSample nbhd = neighborhood_of(*in.mdp, true_state, spec.inflation);
    int shown = true_state;
    switch (spec.kind) {
        case AdversaryKind::myopic: {
            if (in.true_q == nullptr || in.victim_policy == nullptr)
                throw config_error("schedule_perturbation: myopic requires true_q and victim_policy");
            shown = myopic_attack(*in.true_q, *in.victim_policy, true_state, nbhd);
            break;
        }
        case AdversaryKind::actor: {
            const std::vector<double> q = spec.actor.predict(true_state);
            int width = static_cast<int>(nbhd.members.size());
            if (width > static_cast<int>(q.size()))
                throw config_error("schedule_perturbation: actor store narrower than neighborhood");
            int best = 0;
            for (int j = 1; j < width; ++j)
                if (q[static_cast<std::size_t>(j)] > q[static_cast<std::size_t>(best)]) best = j;
            shown = nbhd.members[static_cast<std::size_t>(best)];
            break;
        }
        case AdversaryKind::fgsm: {
            if (in.victim_store == nullptr)
                throw config_error("schedule_perturbation: fgsm requires victim_store");
            shown = fgsm_attack(*in.victim_store, true_state, spec.epsilon, nbhd, in.victim_action);
            break;
        }
        case AdversaryKind::none:
            break;
    }
    if (std::find(nbhd.members.begin(), nbhd.members.end(), shown) == nbhd.members.end())
        throw std::logic_error("schedule_perturbation: shown state escaped the neighborhood");
    obs.shown_state = shown;
    obs.fired = true;
    return obs;
}

struct ActorConfig {
    int episodes = 2000;
    double alpha = 0.5;
    EpsSchedule eps{};
    std::uint64_t seed = 1;
    double inflation = 0.2;

    void validate() const {
        if (episodes < 0) throw config_error("ActorConfig: episodes must be >= 0");
        if (!(alpha > 0.0)) throw config_error("ActorConfig: alpha must be > 0");
        if (!(inflation >= 0.0)) throw config_error("ActorConfig: inflation must be >= 0");
        eps.validate();
    }
};

/// Trains a state-conditioned attacker against a frozen victim policy by
/// Q-learning. The actor observes the victim's true state, its action is an
/// index into the inflated neighborhood there, its reward is the negation of
/// the victim's step reward, and it perturbs every step of its own training
/// episodes. Episodes start uniformly over non-terminal states.
inline AdversarySpec actor_train(const TabularMdp& mdp, const PolicyHandle& victim,
                                 const ActorConfig& cfg) {
    cfg.validate();
    std::vector<NeighborhoodSample> nbhd;
    nbhd.reserve(static_cast<std::size_t>(mdp.n_states));
    int width = 1;
    for (int s = 0; s < mdp.n_states; ++s) {
        nbhd.push_back(neighborhood_of(mdp, s, cfg.inflation));
        width = std::max(width, static_cast<int>(nbhd.back().members.size()));
    }
    std::vector<int> starts;
    for (int s = 0; s < mdp.n_states; ++s)
        if (!mdp.is_terminal(s)) starts.push_back(s);
    if (starts.empty()) throw config_error("actor_train: no non-terminal start states");

    AdversarySpec spec;
    spec.kind = AdversaryKind::actor;
    spec.inflation = cfg.inflation;
    spec.actor = ValueStore::tabular(mdp.n_states, width);

    std::mt19937_64 rng(cfg.seed);
    auto greedy_member = [&](int s) {
        const std::vector<double> q = spec.actor.predict(s);
        int w = static_cast<int>(nbhd[static_cast<std::size_t>(s)].members.size());
        int best = 0;
        for (int j = 1; j < w; ++j)
            if (q[static_cast<std::size_t>(j)] > q[static_cast<std::size_t>(best)]) best = j;
        return best;
    };
    auto best_value = [&](int s) {
        const std::vector<double> q = spec.actor.predict(s);
        int w = static_cast<int>(nbhd[static_cast<std::size_t>(s)].members.size());
        double best = q[0];
        for (int j = 1; j < w; ++j) best = std::max(best, q[static_cast<std::size_t>(j)]);
        return best;
    };

    for (int e = 0; e < cfg.episodes; ++e) {
        double epsv = cfg.eps.at(e, cfg.episodes);
        int s = starts[static_cast<std::size_t>(uniform_int(rng, static_cast<int>(starts.size())))];
        for (int t = 0; t < mdp.horizon && !mdp.is_terminal(s); ++t) {
            const NeighborhoodSample& nb = nbhd[static_cast<std::size_t>(s)];
            int w = static_cast<int>(nb.members.size());
            int j = canonical(rng) < epsv ? uniform_int(rng, w) : greedy_member(s);
            int shown = nb.members[static_cast<std::size_t>(j)];
            int a = victim.action(shown);
            TransitionRecord tr = step(mdp, s, a, rng, t);
            double target = -tr.reward;
            if (!tr.done) target += mdp.gamma * best_value(tr.next_state);
            double loss;
            // A non-finite target here can only come from a diverged table;
            // surface it as the training abort the caller expects.
            try {
                loss = spec.actor.fit_target(s, j, target, cfg.alpha);
            } catch (const std::invalid_argument& ex) {
                throw std::runtime_error("actor_train: diverged at episode " + std::to_string(e) +
                                         " step " + std::to_string(t) + " (" + ex.what() + ")");
            }
            if (!std::isfinite(loss))
                throw std::runtime_error("actor_train: diverged at episode " + std::to_string(e) +
                                         " step " + std::to_string(t));
            s = tr.next_state;
            if (tr.done) break;
        }
    }
    return spec;
}

} // namespace rrl
