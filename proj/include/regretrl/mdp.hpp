#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "regretrl/errors.hpp"
#include "regretrl/rng.hpp"

namespace rrl {

/// Finite MDP with per-state confusion neighborhoods.
///
/// Storage is dense and row major: transition[(s * n_actions + a) * n_states + s2]
/// is the probability of moving to s2 when taking a in s, and
/// reward[s * n_actions + a] is the expected immediate reward.
///
/// Invariants, enforced by validate():
///   - every transition row is a probability distribution (sum 1 within 1e-9),
///   - neighborhoods[s] is sorted, duplicate free, in range, and contains s,
///   - terminal is sorted and duplicate free; terminal states self loop with
///     probability 1 and have an all zero reward row,
///   - gamma is in (0, 1] and horizon >= 1.
///
/// cell_coords is an optional grid annotation set by grid builders. It is not
/// part of the serialized form; deserialized instances fall back to the
/// transition graph metric for neighborhood inflation.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;
    std::vector<double> reward;
    std::vector<std::vector<int>> neighborhoods;
    std::vector<int> terminal;
    double gamma = 1.0;
    int horizon = 1;
    std::vector<std::array<int, 2>> cell_coords;

    double prob(int s, int a, int s2) const {
        return transition[static_cast<std::size_t>(s * n_actions + a) * n_states + s2];
    }

    double& prob(int s, int a, int s2) {
        return transition[static_cast<std::size_t>(s * n_actions + a) * n_states + s2];
    }

    double reward_at(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }

    double& reward_at(int s, int a) { return reward[static_cast<std::size_t>(s) * n_actions + a]; }

    bool is_terminal(int s) const {
        return std::binary_search(terminal.begin(), terminal.end(), s);
    }

    bool in_range_state(int s) const { return s >= 0 && s < n_states; }
    bool in_range_action(int a) const { return a >= 0 && a < n_actions; }

    void validate() const {
        if (n_states < 1) throw std::invalid_argument("mdp: n_states must be >= 1");
        if (n_actions < 1) throw std::invalid_argument("mdp: n_actions must be >= 1");
        const std::size_t sa = static_cast<std::size_t>(n_states) * n_actions;
        if (transition.size() != sa * n_states)
            throw std::invalid_argument("mdp: transition size mismatch");
        if (reward.size() != sa) throw std::invalid_argument("mdp: reward size mismatch");
        if (neighborhoods.size() != static_cast<std::size_t>(n_states))
            throw std::invalid_argument("mdp: neighborhoods size mismatch");
        if (!(gamma > 0.0 && gamma <= 1.0))
            throw std::invalid_argument("mdp: gamma must lie in (0, 1]");
        if (horizon < 1) throw std::invalid_argument("mdp: horizon must be >= 1");
        for (int s = 0; s < n_states; ++s) {
            for (int a = 0; a < n_actions; ++a) {
                double sum = 0.0;
                for (int s2 = 0; s2 < n_states; ++s2) {
                    double p = prob(s, a, s2);
                    if (p < 0.0)
                        throw std::invalid_argument("mdp: negative transition probability");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-9)
                    throw std::invalid_argument("mdp: transition row does not sum to 1");
            }
            const auto& nb = neighborhoods[s];
            if (nb.empty()) throw std::invalid_argument("mdp: empty neighborhood");
            if (!std::is_sorted(nb.begin(), nb.end()))
                throw std::invalid_argument("mdp: neighborhood not sorted");
            if (std::adjacent_find(nb.begin(), nb.end()) != nb.end())
                throw std::invalid_argument("mdp: duplicate neighborhood member");
            for (int m : nb)
                if (m < 0 || m >= n_states)
                    throw std::invalid_argument("mdp: neighborhood member out of range");
            if (!std::binary_search(nb.begin(), nb.end(), s))
                throw std::invalid_argument("mdp: neighborhood must contain its own state");
        }
        if (!std::is_sorted(terminal.begin(), terminal.end()))
            throw std::invalid_argument("mdp: terminal list not sorted");
        if (std::adjacent_find(terminal.begin(), terminal.end()) != terminal.end())
            throw std::invalid_argument("mdp: duplicate terminal state");
        for (int t : terminal) {
            if (t < 0 || t >= n_states)
                throw std::invalid_argument("mdp: terminal state out of range");
            for (int a = 0; a < n_actions; ++a) {
                if (std::abs(prob(t, a, t) - 1.0) > 1e-12)
                    throw std::invalid_argument("mdp: terminal state must self loop");
                if (reward_at(t, a) != 0.0)
                    throw std::invalid_argument("mdp: terminal reward must be zero");
            }
        }
        if (!cell_coords.empty() && cell_coords.size() != static_cast<std::size_t>(n_states))
            throw std::invalid_argument("mdp: cell_coords size mismatch");
    }
};

/// Counterfactual reward lookup with range checking; reads R(s, a) without
/// touching any environment state.
inline double reward_query(const TabularMdp& mdp, int s, int a) {
    if (!mdp.in_range_state(s)) throw std::invalid_argument("reward_query: state out of range");
    if (!mdp.in_range_action(a)) throw std::invalid_argument("reward_query: action out of range");
    return mdp.reward_at(s, a);
}

/// One environment interaction. done reflects entering a terminal state;
/// horizon exhaustion is episode loop control, not a done flag, so any value
/// bootstrapped from a truncated tail stays consistent with the stationary
/// fixed point.
struct TransitionRecord {
    int state = 0;
    int action = 0;
    int next_state = 0;
    double reward = 0.0;
    bool done = false;
    int step_index = 0;
};

/// Samples one transition. Throws std::invalid_argument for out of range
/// state or action and std::logic_error when stepping a terminal state.
inline TransitionRecord step(const TabularMdp& mdp, int s, int a, std::mt19937_64& rng,
                             int step_index = 0) {
    if (!mdp.in_range_state(s)) throw std::invalid_argument("step: state out of range");
    if (!mdp.in_range_action(a)) throw std::invalid_argument("step: action out of range");
    if (mdp.is_terminal(s)) throw std::logic_error("step: cannot step a terminal state");
    double u = canonical(rng);
    double acc = 0.0;
    int next = mdp.n_states - 1;
    for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        acc += mdp.prob(s, a, s2);
        if (u < acc) {
            next = s2;
            break;
        }
    }
    TransitionRecord rec;
    rec.state = s;
    rec.action = a;
    rec.next_state = next;
    rec.reward = mdp.reward_at(s, a);
    rec.done = mdp.is_terminal(next);
    rec.step_index = step_index;
    return rec;
}

/// Confusion set handed to adversaries: the declared neighborhood of center,
/// optionally inflated with nearby states.
struct NeighborhoodSample {
    int center = 0;
    std::vector<int> members;
};

namespace detail {

// Shortest path distances from src following transition support edges
// (any action with positive probability). -1 marks unreachable states.
inline std::vector<int> graph_distances(const TabularMdp& mdp, int src) {
    std::vector<int> dist(static_cast<std::size_t>(mdp.n_states), -1);
    std::queue<int> frontier;
    dist[static_cast<std::size_t>(src)] = 0;
    frontier.push(src);
    while (!frontier.empty()) {
        int u = frontier.front();
        frontier.pop();
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
            if (dist[static_cast<std::size_t>(s2)] >= 0) continue;
            bool edge = false;
            for (int a = 0; a < mdp.n_actions && !edge; ++a)
                edge = mdp.prob(u, a, s2) > 0.0;
            if (edge) {
                dist[static_cast<std::size_t>(s2)] = dist[static_cast<std::size_t>(u)] + 1;
                frontier.push(s2);
            }
        }
    }
    return dist;
}

} // namespace detail

/// Returns the neighborhood of s, inflated by a fraction of its base size.
///
/// inflation = 0 returns the declared members unchanged. inflation > 0
/// appends the ceil(inflation * base_size) nearest non member states under
/// the instance metric: Manhattan distance between cells when cell_coords is
/// set, otherwise shortest path distance in the transition support graph
/// from s. Ties break toward the lower state id and unreachable states are
/// never added, so fewer than the requested number may be available.
///
/// Member order is deterministic: declared members ascending, then extras by
/// (distance, id). Repeated calls with equal arguments return equal samples.
inline NeighborhoodSample neighborhood_of(const TabularMdp& mdp, int s, double inflation = 0.0) {
    if (!mdp.in_range_state(s)) throw std::invalid_argument("neighborhood_of: state out of range");
    if (inflation < 0.0) throw std::invalid_argument("neighborhood_of: inflation must be >= 0");
    NeighborhoodSample out;
    out.center = s;
    out.members = mdp.neighborhoods[static_cast<std::size_t>(s)];
    if (inflation == 0.0) return out;

    const int want = static_cast<int>(std::ceil(inflation * static_cast<double>(out.members.size())));
    if (want == 0) return out;

    std::vector<std::pair<int, int>> candidates; // (distance, id)
    if (!mdp.cell_coords.empty()) {
        const auto& c0 = mdp.cell_coords[static_cast<std::size_t>(s)];
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
            if (std::binary_search(out.members.begin(), out.members.end(), s2)) continue;
            const auto& c2 = mdp.cell_coords[static_cast<std::size_t>(s2)];
            int d = std::abs(c0[0] - c2[0]) + std::abs(c0[1] - c2[1]);
            candidates.emplace_back(d, s2);
        }
    } else {
        auto dist = detail::graph_distances(mdp, s);
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
            if (dist[static_cast<std::size_t>(s2)] < 0) continue;
            if (std::binary_search(out.members.begin(), out.members.end(), s2)) continue;
            candidates.emplace_back(dist[static_cast<std::size_t>(s2)], s2);
        }
    }
    std::sort(candidates.begin(), candidates.end());
    const int take = std::min<int>(want, static_cast<int>(candidates.size()));
    for (int i = 0; i < take; ++i) out.members.push_back(candidates[static_cast<std::size_t>(i)].second);
    return out;
}

/// Serialized form: the six structural fields plus gamma and horizon.
/// Doubles survive a round trip bit for bit.
inline nlohmann::json to_json(const TabularMdp& mdp) {
    nlohmann::json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    j["transition"] = mdp.transition;
    j["reward"] = mdp.reward;
    j["neighborhoods"] = mdp.neighborhoods;
    j["terminal"] = mdp.terminal;
    j["gamma"] = mdp.gamma;
    j["horizon"] = mdp.horizon;
    return j;
}

inline TabularMdp mdp_from_json(const nlohmann::json& j) {
    TabularMdp mdp;
    try {
        mdp.n_states = j.at("n_states").get<int>();
        mdp.n_actions = j.at("n_actions").get<int>();
        mdp.transition = j.at("transition").get<std::vector<double>>();
        mdp.reward = j.at("reward").get<std::vector<double>>();
        mdp.neighborhoods = j.at("neighborhoods").get<std::vector<std::vector<int>>>();
        mdp.terminal = j.at("terminal").get<std::vector<int>>();
        mdp.gamma = j.at("gamma").get<double>();
        mdp.horizon = j.at("horizon").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("mdp_from_json: ") + e.what());
    }
    mdp.validate();
    return mdp;
}

} // namespace rrl
