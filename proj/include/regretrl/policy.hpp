#pragma once

#include <stdexcept>
#include <vector>

#include "regretrl/errors.hpp"
#include "regretrl/mdp.hpp"
#include "regretrl/value_store.hpp"

namespace rrl {

enum class PolicyKind { value_greedy, regret_greedy, selector, uniform, fixed_table };

/// Total deterministic state to action map, materialized as a table.
/// uniform marks an untrained placeholder; its deterministic representative
/// is the lowest action index at every state.
struct PolicyHandle {
    PolicyKind kind = PolicyKind::fixed_table;
    std::vector<int> actions;

    int action(int s) const { return actions[static_cast<std::size_t>(s)]; }
};

// Ties in regret extraction are values within tie_epsilon of the row
// minimum; exact DP tables and alpha = 1 tabular learning both produce
// bitwise-equal tied entries, so the epsilon only guards mlp stores.
constexpr double tie_epsilon = 1e-9;

/// Argmax with ties resolved toward the lower action index.
inline int greedy_value_action(const std::vector<double>& q_row) {
    int best = 0;
    for (int a = 1; a < static_cast<int>(q_row.size()); ++a)
        if (q_row[static_cast<std::size_t>(a)] > q_row[static_cast<std::size_t>(best)]) best = a;
    return best;
}

/// Argmin over regret values; among regret ties the action with the higher
/// Q value wins, and remaining Q ties resolve toward the lower index. The Q
/// tie-break discards regret-neutral but value-catastrophic actions.
inline int greedy_regret_action(const std::vector<double>& r_row, const std::vector<double>& q_row) {
    double r_min = r_row[0];
    for (double v : r_row) r_min = std::min(r_min, v);
    int best = -1;
    for (int a = 0; a < static_cast<int>(r_row.size()); ++a) {
        if (r_row[static_cast<std::size_t>(a)] > r_min + tie_epsilon) continue;
        if (best < 0 || q_row[static_cast<std::size_t>(a)] > q_row[static_cast<std::size_t>(best)])
            best = a;
    }
    return best;
}

/// Materializes a greedy policy over every state of the MDP.
/// value_greedy requires q_store; regret_greedy requires r_store and, for
/// its tie-break, q_store.
inline PolicyHandle extract_policy(const TabularMdp& mdp, PolicyKind kind,
                                   const ValueStore* q_store, const ValueStore* r_store) {
    PolicyHandle pi;
    pi.kind = kind;
    pi.actions.resize(static_cast<std::size_t>(mdp.n_states));
    if (kind == PolicyKind::value_greedy) {
        if (q_store == nullptr || q_store->empty())
            throw config_error("extract_policy: value_greedy requires a Q store");
        for (int s = 0; s < mdp.n_states; ++s)
            pi.actions[static_cast<std::size_t>(s)] = greedy_value_action(q_store->predict(s));
        return pi;
    }
    if (kind == PolicyKind::regret_greedy) {
        if (r_store == nullptr || r_store->empty())
            throw config_error("extract_policy: regret_greedy requires a regret store");
        if (q_store == nullptr || q_store->empty())
            throw config_error("extract_policy: regret_greedy tie-break requires a Q store");
        for (int s = 0; s < mdp.n_states; ++s)
            pi.actions[static_cast<std::size_t>(s)] =
                greedy_regret_action(r_store->predict(s), q_store->predict(s));
        return pi;
    }
    if (kind == PolicyKind::uniform) {
        pi.actions.assign(static_cast<std::size_t>(mdp.n_states), 0);
        return pi;
    }
    throw config_error("extract_policy: kind must be value_greedy, regret_greedy, or uniform");
}

enum class SelectorMode { threshold, learned };
enum class SelectorChoice { use_q = 0, use_ccer = 1 };

/// Per-state dispatcher between the value-greedy and regret-greedy
/// sub-policies. threshold mode flags a state when the value-greedy action
/// carries regret above tau; learned mode consults a binary choice table
/// (column 0 = use_q, column 1 = use_ccer) trained by train_selector.
struct SelectorState {
    SelectorMode mode = SelectorMode::threshold;
    double tau = 0.0;
    double p_adv = 0.5;
    ValueStore choice_q;
};

inline SelectorChoice selector_decide(const SelectorState& sel, int s, const ValueStore& q_store,
                                      const ValueStore& r_store) {
    if (sel.mode == SelectorMode::threshold) {
        int a_q = greedy_value_action(q_store.predict(s));
        double regret = r_store.predict(s)[static_cast<std::size_t>(a_q)];
        return regret > sel.tau ? SelectorChoice::use_ccer : SelectorChoice::use_q;
    }
    std::vector<double> row = sel.choice_q.predict(s);
    return row[1] > row[0] ? SelectorChoice::use_ccer : SelectorChoice::use_q;
}

/// The composite action the selector dispatches to at state s.
inline int composite_action(const SelectorState& sel, int s, const ValueStore& q_store,
                            const ValueStore& r_store) {
    if (selector_decide(sel, s, q_store, r_store) == SelectorChoice::use_q)
        return greedy_value_action(q_store.predict(s));
    return greedy_regret_action(r_store.predict(s), q_store.predict(s));
}

/// Materializes the composite policy over every state.
inline PolicyHandle composite_policy(const TabularMdp& mdp, const SelectorState& sel,
                                     const ValueStore& q_store, const ValueStore& r_store) {
    PolicyHandle pi;
    pi.kind = PolicyKind::selector;
    pi.actions.resize(static_cast<std::size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s)
        pi.actions[static_cast<std::size_t>(s)] = composite_action(sel, s, q_store, r_store);
    return pi;
}

} // namespace rrl
