#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "regretrl/errors.hpp"
#include "regretrl/mdp.hpp"
#include "regretrl/policy.hpp"
#include "regretrl/value_store.hpp"

namespace rrl {

namespace detail {

inline int dp_horizon(const TabularMdp& mdp, int horizon) {
    if (horizon == -1) return mdp.horizon;
    if (horizon < 1) throw std::invalid_argument("oracle: horizon must be >= 1");
    return horizon;
}

inline void check_policy(const TabularMdp& mdp, const std::vector<int>& pi) {
    if (pi.size() != static_cast<std::size_t>(mdp.n_states))
        throw std::invalid_argument("oracle: policy must cover every state");
    for (int a : pi)
        if (!mdp.in_range_action(a)) throw std::invalid_argument("oracle: policy action out of range");
}

inline double expected_next(const TabularMdp& mdp, int s, int a, const std::vector<double>& v) {
    double e = 0.0;
    for (int s2 = 0; s2 < mdp.n_states; ++s2) e += mdp.prob(s, a, s2) * v[static_cast<std::size_t>(s2)];
    return e;
}

} // namespace detail

/// Finite-horizon policy value V by backward DP; terminal states stay 0 in
/// every layer. horizon -1 uses the MDP's own horizon.
inline std::vector<double> exact_v_pi(const TabularMdp& mdp, const std::vector<int>& pi,
                                      int horizon = -1) {
    detail::check_policy(mdp, pi);
    const int h = detail::dp_horizon(mdp, horizon);
    std::vector<double> v(static_cast<std::size_t>(mdp.n_states), 0.0);
    std::vector<double> next(v);
    for (int k = 0; k < h; ++k) {
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_terminal(s)) {
                next[static_cast<std::size_t>(s)] = 0.0;
                continue;
            }
            int a = pi[static_cast<std::size_t>(s)];
            next[static_cast<std::size_t>(s)] =
                mdp.reward_at(s, a) + mdp.gamma * detail::expected_next(mdp, s, a, v);
        }
        std::swap(v, next);
    }
    return v;
}

namespace detail {

inline void check_mu(const TabularMdp& mdp, const std::vector<int>& mu) {
    if (mu.size() != static_cast<std::size_t>(mdp.n_states))
        throw std::invalid_argument("oracle: mu must cover every state");
    for (int s = 0; s < mdp.n_states; ++s) {
        int shown = mu[static_cast<std::size_t>(s)];
        if (!mdp.in_range_state(shown))
            throw std::invalid_argument("oracle: mu shows an out-of-range state");
        const auto& nb = mdp.neighborhoods[static_cast<std::size_t>(s)];
        if (!std::binary_search(nb.begin(), nb.end(), shown))
            throw std::invalid_argument("oracle: mu must show a neighborhood member");
    }
}

// Perturbed-policy value without mu validation, for enumeration loops.
inline std::vector<double> v_pi_mu_unchecked(const TabularMdp& mdp, const std::vector<int>& pi,
                                             const std::vector<int>& mu, int h) {
    std::vector<double> w(static_cast<std::size_t>(mdp.n_states), 0.0);
    std::vector<double> next(w);
    for (int k = 0; k < h; ++k) {
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_terminal(s)) {
                next[static_cast<std::size_t>(s)] = 0.0;
                continue;
            }
            int a = pi[static_cast<std::size_t>(mu[static_cast<std::size_t>(s)])];
            next[static_cast<std::size_t>(s)] =
                mdp.reward_at(s, a) + mdp.gamma * expected_next(mdp, s, a, w);
        }
        std::swap(w, next);
    }
    return w;
}

} // namespace detail

/// Value of acting on perturbed observations: at true state s the agent
/// executes pi(mu(s)) while rewards and transitions follow s. The result is
/// indexed by the true state.
inline std::vector<double> exact_v_pi_mu(const TabularMdp& mdp, const std::vector<int>& pi,
                                         const std::vector<int>& mu, int horizon = -1) {
    detail::check_policy(mdp, pi);
    detail::check_mu(mdp, mu);
    return detail::v_pi_mu_unchecked(mdp, pi, mu, detail::dp_horizon(mdp, horizon));
}

/// Scheduled variant: the perturbation applies only at step indices t with
/// t mod t_adv = offset; unperturbed steps execute pi at the true state.
inline std::vector<double> exact_v_pi_mu_scheduled(const TabularMdp& mdp, const std::vector<int>& pi,
                                                   const std::vector<int>& mu, int t_adv, int offset,
                                                   int horizon = -1) {
    detail::check_policy(mdp, pi);
    detail::check_mu(mdp, mu);
    if (t_adv < 1) throw std::invalid_argument("oracle: t_adv must be >= 1");
    if (offset < 0 || offset >= t_adv)
        throw std::invalid_argument("oracle: offset must lie in [0, t_adv)");
    const int h = detail::dp_horizon(mdp, horizon);
    std::vector<double> g(static_cast<std::size_t>(mdp.n_states), 0.0);
    std::vector<double> next(g);
    for (int t = h - 1; t >= 0; --t) {
        bool fired = (t % t_adv) == offset;
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_terminal(s)) {
                next[static_cast<std::size_t>(s)] = 0.0;
                continue;
            }
            int a = fired ? pi[static_cast<std::size_t>(mu[static_cast<std::size_t>(s)])]
                          : pi[static_cast<std::size_t>(s)];
            next[static_cast<std::size_t>(s)] =
                mdp.reward_at(s, a) + mdp.gamma * detail::expected_next(mdp, s, a, g);
        }
        std::swap(g, next);
    }
    return g;
}

/// Worst-case-over-neighborhood lower bound on V: at observed state s the
/// min over neighborhood members binds both the reward and the continuation
/// to the same minimizing member.
inline std::vector<double> exact_v_check(const TabularMdp& mdp, const std::vector<int>& pi,
                                         int horizon = -1) {
    detail::check_policy(mdp, pi);
    const int h = detail::dp_horizon(mdp, horizon);
    std::vector<double> v(static_cast<std::size_t>(mdp.n_states), 0.0);
    std::vector<double> next(v);
    for (int k = 0; k < h; ++k) {
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_terminal(s)) {
                next[static_cast<std::size_t>(s)] = 0.0;
                continue;
            }
            int a = pi[static_cast<std::size_t>(s)];
            double best = 0.0;
            bool first = true;
            for (int u : mdp.neighborhoods[static_cast<std::size_t>(s)]) {
                double cand = mdp.reward_at(u, a) + mdp.gamma * detail::expected_next(mdp, u, a, v);
                if (first || cand < best) best = cand;
                first = false;
            }
            next[static_cast<std::size_t>(s)] = best;
        }
        std::swap(v, next);
    }
    return v;
}

/// Separated-min variant of the lower bound: the min over members applies to
/// the reward term only, with the continuation taken under the observed
/// state's own transition row. V - v_check_separated equals CCER identically
/// and is the bound used inside the regret chain check.
inline std::vector<double> exact_v_check_separated(const TabularMdp& mdp, const std::vector<int>& pi,
                                                   int horizon = -1) {
    detail::check_policy(mdp, pi);
    const int h = detail::dp_horizon(mdp, horizon);
    std::vector<double> v(static_cast<std::size_t>(mdp.n_states), 0.0);
    std::vector<double> next(v);
    for (int k = 0; k < h; ++k) {
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_terminal(s)) {
                next[static_cast<std::size_t>(s)] = 0.0;
                continue;
            }
            int a = pi[static_cast<std::size_t>(s)];
            double r_min = mdp.reward_at(s, a);
            for (int u : mdp.neighborhoods[static_cast<std::size_t>(s)])
                r_min = std::min(r_min, mdp.reward_at(u, a));
            next[static_cast<std::size_t>(s)] =
                r_min + mdp.gamma * detail::expected_next(mdp, s, a, v);
        }
        std::swap(v, next);
    }
    return v;
}

/// Instantaneous regret contribution gap(s, a) = R(s, a) - min over
/// neighborhood members of R(member, a), as a dense (s, a) table. Zero at
/// terminal states.
inline std::vector<double> exact_gap_table(const TabularMdp& mdp) {
    std::vector<double> gap(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mdp.is_terminal(s)) continue;
        for (int a = 0; a < mdp.n_actions; ++a) {
            double r_min = mdp.reward_at(s, a);
            for (int u : mdp.neighborhoods[static_cast<std::size_t>(s)])
                r_min = std::min(r_min, mdp.reward_at(u, a));
            gap[static_cast<std::size_t>(s) * mdp.n_actions + a] = mdp.reward_at(s, a) - r_min;
        }
    }
    return gap;
}

/// Finite-horizon CCER of a fixed policy: per-step gap accumulated with
/// discount along the policy's own dynamics.
inline std::vector<double> exact_ccer(const TabularMdp& mdp, const std::vector<int>& pi,
                                      int horizon = -1) {
    detail::check_policy(mdp, pi);
    const int h = detail::dp_horizon(mdp, horizon);
    const std::vector<double> gap = exact_gap_table(mdp);
    std::vector<double> c(static_cast<std::size_t>(mdp.n_states), 0.0);
    std::vector<double> next(c);
    for (int k = 0; k < h; ++k) {
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_terminal(s)) {
                next[static_cast<std::size_t>(s)] = 0.0;
                continue;
            }
            int a = pi[static_cast<std::size_t>(s)];
            next[static_cast<std::size_t>(s)] =
                gap[static_cast<std::size_t>(s) * mdp.n_actions + a] +
                mdp.gamma * detail::expected_next(mdp, s, a, c);
        }
        std::swap(c, next);
    }
    return c;
}

namespace detail {

template <typename Backup>
inline std::vector<double> stationary_fixed_point(const TabularMdp& mdp, Backup backup,
                                                  const char* what) {
    const std::size_t n = static_cast<std::size_t>(mdp.n_states) * mdp.n_actions;
    std::vector<double> q(n, 0.0);
    std::vector<double> next(n, 0.0);
    const int max_sweeps = 200000;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double residual = 0.0;
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a) {
                std::size_t i = static_cast<std::size_t>(s) * mdp.n_actions + a;
                next[i] = mdp.is_terminal(s) ? 0.0 : backup(s, a, q);
                residual = std::max(residual, std::abs(next[i] - q[i]));
            }
        std::swap(q, next);
        if (residual <= 1e-13) return q;
    }
    throw std::runtime_error(std::string(what) + ": fixed-point iteration did not converge");
}

} // namespace detail

/// Stationary optimal state-action values, iterated to residual 1e-13.
inline std::vector<double> exact_q_star(const TabularMdp& mdp) {
    return detail::stationary_fixed_point(
        mdp,
        [&mdp](int s, int a, const std::vector<double>& q) {
            double e = 0.0;
            for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                double best = q[static_cast<std::size_t>(s2) * mdp.n_actions];
                for (int a2 = 1; a2 < mdp.n_actions; ++a2)
                    best = std::max(best, q[static_cast<std::size_t>(s2) * mdp.n_actions + a2]);
                e += mdp.prob(s, a, s2) * best;
            }
            return mdp.reward_at(s, a) + mdp.gamma * e;
        },
        "exact_q_star");
}

/// Stationary regret-optimal state-action CCER values: min-backup
/// counterpart of exact_q_star, iterated to residual 1e-13.
inline std::vector<double> exact_ccer_q_opt(const TabularMdp& mdp) {
    const std::vector<double> gap = exact_gap_table(mdp);
    return detail::stationary_fixed_point(
        mdp,
        [&mdp, &gap](int s, int a, const std::vector<double>& q) {
            double e = 0.0;
            for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                double best = q[static_cast<std::size_t>(s2) * mdp.n_actions];
                for (int a2 = 1; a2 < mdp.n_actions; ++a2)
                    best = std::min(best, q[static_cast<std::size_t>(s2) * mdp.n_actions + a2]);
                e += mdp.prob(s, a, s2) * best;
            }
            return gap[static_cast<std::size_t>(s) * mdp.n_actions + a] + mdp.gamma * e;
        },
        "exact_ccer_q_opt");
}

/// Greedy policy over the exact optimal value table, with the extraction
/// tie rules shared with the learning module.
inline PolicyHandle oracle_value_policy(const TabularMdp& mdp) {
    ValueStore q = ValueStore::tabular_from(exact_q_star(mdp), mdp.n_states, mdp.n_actions);
    return extract_policy(mdp, PolicyKind::value_greedy, &q, nullptr);
}

/// Regret-greedy policy over the exact tables (argmin CCER, Q tie-break).
inline PolicyHandle oracle_regret_policy(const TabularMdp& mdp) {
    ValueStore q = ValueStore::tabular_from(exact_q_star(mdp), mdp.n_states, mdp.n_actions);
    ValueStore r = ValueStore::tabular_from(exact_ccer_q_opt(mdp), mdp.n_states, mdp.n_actions);
    return extract_policy(mdp, PolicyKind::regret_greedy, &q, &r);
}

/// Applies fn to every deterministic stationary adversary mu with
/// mu(s) in S_s for all s. Total count is the product of neighborhood sizes;
/// above the 1e6 budget a capacity_error is thrown.
template <typename Fn>
inline void for_each_mu(const TabularMdp& mdp, Fn fn) {
    double count = 1.0;
    for (const auto& nb : mdp.neighborhoods) count *= static_cast<double>(nb.size());
    if (count > 1e6)
        throw capacity_error("for_each_mu: adversary enumeration exceeds budget; use smaller fixtures",
                             count, 1e6);
    std::vector<int> index(static_cast<std::size_t>(mdp.n_states), 0);
    std::vector<int> mu(static_cast<std::size_t>(mdp.n_states));
    while (true) {
        for (int s = 0; s < mdp.n_states; ++s)
            mu[static_cast<std::size_t>(s)] =
                mdp.neighborhoods[static_cast<std::size_t>(s)][static_cast<std::size_t>(
                    index[static_cast<std::size_t>(s)])];
        fn(mu);
        int s = 0;
        while (s < mdp.n_states) {
            index[static_cast<std::size_t>(s)] += 1;
            if (index[static_cast<std::size_t>(s)] <
                static_cast<int>(mdp.neighborhoods[static_cast<std::size_t>(s)].size()))
                break;
            index[static_cast<std::size_t>(s)] = 0;
            ++s;
        }
        if (s == mdp.n_states) return;
    }
}

struct MaxRegretResult {
    double value = 0.0;
    std::vector<int> mu;
    int shown0 = 0;
};

/// Exhaustive worst-case regret of pi from initial state s0: maximizes
/// V(mu(s0)) - V_mu(s0) over all deterministic adversaries, where V_mu is
/// the perturbed-policy value at the true initial state. Regret is evaluated
/// at the perturbed initial observation mu(s0). Returns the first maximizer.
inline MaxRegretResult exact_max_regret(const TabularMdp& mdp, const std::vector<int>& pi,
                                        int s0 = 0) {
    detail::check_policy(mdp, pi);
    if (!mdp.in_range_state(s0)) throw std::invalid_argument("exact_max_regret: s0 out of range");
    const int h = mdp.horizon;
    const std::vector<double> v = exact_v_pi(mdp, pi, h);
    MaxRegretResult best;
    bool first = true;
    for_each_mu(mdp, [&](const std::vector<int>& mu) {
        std::vector<double> w = detail::v_pi_mu_unchecked(mdp, pi, mu, h);
        int shown0 = mu[static_cast<std::size_t>(s0)];
        double reg = v[static_cast<std::size_t>(shown0)] - w[static_cast<std::size_t>(s0)];
        if (first || reg > best.value) {
            best.value = reg;
            best.mu = mu;
            best.shown0 = shown0;
            first = false;
        }
    });
    return best;
}

struct BoundReport {
    bool holds = false;
    double margin = 0.0;
    double max_regret = 0.0;
    double ccer_at_shown = 0.0;
    int shown0 = 0;
    std::vector<int> mu;
};

/// Checks that CCER upper-bounds the worst-case regret: margin =
/// ccer(mu*(s0)) - max regret, with mu* the realizing adversary; holds iff
/// margin >= -1e-9.
inline BoundReport check_ccer_bound(const TabularMdp& mdp, const std::vector<int>& pi, int s0 = 0) {
    MaxRegretResult worst = exact_max_regret(mdp, pi, s0);
    std::vector<double> c = exact_ccer(mdp, pi);
    BoundReport rep;
    rep.max_regret = worst.value;
    rep.shown0 = worst.shown0;
    rep.mu = worst.mu;
    rep.ccer_at_shown = c[static_cast<std::size_t>(worst.shown0)];
    rep.margin = rep.ccer_at_shown - rep.max_regret;
    rep.holds = rep.margin >= -1e-9;
    return rep;
}

struct ChainReport {
    bool holds = false;
    double link1_margin = 0.0;      // (V - v_check_separated)(shown0) - max regret
    double link2_margin = 0.0;      // ccer(shown0) - (V - v_check_separated)(shown0)
    double max_regret = 0.0;
    double v_gap_at_shown = 0.0;    // (V - v_check_separated)(shown0)
    double ccer_at_shown = 0.0;
    double joint_gap_at_shown = 0.0; // (V - v_check)(shown0), diagnostic only
    int shown0 = 0;
    std::vector<int> mu;
};

/// Two-link regret chain at the worst perturbed initial observation:
/// max regret <= V - v_check <= CCER, using the separated-min bound for the
/// middle term. The joint-min gap is reported alongside as a diagnostic.
inline ChainReport check_chain(const TabularMdp& mdp, const std::vector<int>& pi, int s0 = 0) {
    MaxRegretResult worst = exact_max_regret(mdp, pi, s0);
    std::vector<double> v = exact_v_pi(mdp, pi);
    std::vector<double> vc_sep = exact_v_check_separated(mdp, pi);
    std::vector<double> vc_joint = exact_v_check(mdp, pi);
    std::vector<double> c = exact_ccer(mdp, pi);
    ChainReport rep;
    rep.max_regret = worst.value;
    rep.shown0 = worst.shown0;
    rep.mu = worst.mu;
    const std::size_t i = static_cast<std::size_t>(worst.shown0);
    rep.v_gap_at_shown = v[i] - vc_sep[i];
    rep.ccer_at_shown = c[i];
    rep.joint_gap_at_shown = v[i] - vc_joint[i];
    rep.link1_margin = rep.v_gap_at_shown - rep.max_regret;
    rep.link2_margin = rep.ccer_at_shown - rep.v_gap_at_shown;
    rep.holds = rep.link1_margin >= -1e-9 && rep.link2_margin >= -1e-9;
    return rep;
}

struct SubstructureReport {
    bool holds = true;
    double worst_margin = 0.0;
    long long plans_checked = 0;
};

/// Optimal-substructure check for CCER over nonstationary plans: for every
/// step t and every tail plan from t, replacing the continuation after t by
/// the CCER-optimal one never increases CCER at any state. Capacity bound:
/// n_actions^(n_states * horizon) <= 1e6.
inline SubstructureReport check_substructure(const TabularMdp& mdp, int horizon = -1) {
    const int h = detail::dp_horizon(mdp, horizon);
    const double assignments = std::pow(static_cast<double>(mdp.n_actions),
                                        static_cast<double>(mdp.n_states));
    const double total = std::pow(assignments, static_cast<double>(h));
    if (total > 1e6)
        throw capacity_error("check_substructure: policy enumeration exceeds budget; use smaller fixtures",
                             total, 1e6);
    const std::vector<double> gap = exact_gap_table(mdp);

    auto backup = [&](const std::vector<int>& actions, const std::vector<double>& cont) {
        std::vector<double> out(static_cast<std::size_t>(mdp.n_states), 0.0);
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_terminal(s)) continue;
            int a = actions[static_cast<std::size_t>(s)];
            out[static_cast<std::size_t>(s)] =
                gap[static_cast<std::size_t>(s) * mdp.n_actions + a] +
                mdp.gamma * detail::expected_next(mdp, s, a, cont);
        }
        return out;
    };

    // opt[d] = optimal CCER with d steps to go (min over actions per layer).
    std::vector<std::vector<double>> opt(static_cast<std::size_t>(h) + 1,
                                         std::vector<double>(static_cast<std::size_t>(mdp.n_states), 0.0));
    for (int d = 1; d <= h; ++d)
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_terminal(s)) continue;
            double best = 0.0;
            bool first = true;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double cand = gap[static_cast<std::size_t>(s) * mdp.n_actions + a] +
                              mdp.gamma *
                                  detail::expected_next(mdp, s, a, opt[static_cast<std::size_t>(d - 1)]);
                if (first || cand < best) best = cand;
                first = false;
            }
            opt[static_cast<std::size_t>(d)][static_cast<std::size_t>(s)] = best;
        }

    const long long n_assign = static_cast<long long>(assignments);
    auto decode = [&](long long code) {
        std::vector<int> actions(static_cast<std::size_t>(mdp.n_states));
        for (int s = 0; s < mdp.n_states; ++s) {
            actions[static_cast<std::size_t>(s)] = static_cast<int>(code % mdp.n_actions);
            code /= mdp.n_actions;
        }
        return actions;
    };

    SubstructureReport rep;
    bool first_margin = true;
    for (int t = 0; t < h; ++t) {
        const int depth = h - t;
        long long n_plans = 1;
        for (int d = 0; d < depth; ++d) n_plans *= n_assign;
        std::vector<long long> codes(static_cast<std::size_t>(depth), 0);
        for (long long p = 0; p < n_plans; ++p) {
            long long rem = p;
            for (int d = 0; d < depth; ++d) {
                codes[static_cast<std::size_t>(d)] = rem % n_assign;
                rem /= n_assign;
            }
            // c2: CCER of the tail plan itself, evaluated backward.
            std::vector<double> c2(static_cast<std::size_t>(mdp.n_states), 0.0);
            for (int d = depth - 1; d >= 0; --d)
                c2 = backup(decode(codes[static_cast<std::size_t>(d)]), c2);
            // c1: same step-t assignment, optimal continuation afterwards.
            std::vector<double> c1 =
                backup(decode(codes[0]), opt[static_cast<std::size_t>(depth - 1)]);
            for (int s = 0; s < mdp.n_states; ++s) {
                double margin = c2[static_cast<std::size_t>(s)] - c1[static_cast<std::size_t>(s)];
                if (first_margin || margin < rep.worst_margin) {
                    rep.worst_margin = margin;
                    first_margin = false;
                }
                if (margin < -1e-9) rep.holds = false;
            }
            rep.plans_checked += 1;
        }
    }
    return rep;
}

} // namespace rrl
