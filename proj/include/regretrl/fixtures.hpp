#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "regretrl/mdp.hpp"
#include "regretrl/rng.hpp"

namespace rrl {

namespace twolane {
// State and action ids of the two lane fixture.
constexpr int s0 = 0;
constexpr int lane_a = 1;
constexpr int lane_b = 2;
constexpr int terminal = 3;
constexpr int act_slow = 0; // L at s0
constexpr int act_fast = 1; // R at s0
} // namespace twolane

/// Four state merge fixture. Action 0 means L at the start state and slow in
/// a lane; action 1 means R and fast. Lane B strictly dominates on value
/// (rewards 1 / 2 versus 0.5 / -10) while the lanes are mutually confusable,
/// so fast is catastrophic when the true lane is A. gamma = 1, horizon 2;
/// every trajectory reaches the terminal within the horizon.
inline TabularMdp build_twolane() {
    TabularMdp mdp;
    mdp.n_states = 4;
    mdp.n_actions = 2;
    mdp.gamma = 1.0;
    mdp.horizon = 2;
    mdp.transition.assign(static_cast<std::size_t>(4) * 2 * 4, 0.0);
    mdp.reward.assign(static_cast<std::size_t>(4) * 2, 0.0);
    using namespace twolane;
    mdp.prob(s0, act_slow, lane_a) = 1.0;
    mdp.prob(s0, act_fast, lane_b) = 1.0;
    for (int a = 0; a < 2; ++a) {
        mdp.prob(lane_a, a, terminal) = 1.0;
        mdp.prob(lane_b, a, terminal) = 1.0;
        mdp.prob(terminal, a, terminal) = 1.0;
    }
    mdp.reward_at(lane_a, act_slow) = 0.5;
    mdp.reward_at(lane_a, act_fast) = -10.0;
    mdp.reward_at(lane_b, act_slow) = 1.0;
    mdp.reward_at(lane_b, act_fast) = 2.0;
    mdp.neighborhoods = {{s0}, {lane_a, lane_b}, {lane_a, lane_b}, {terminal}};
    mdp.terminal = {terminal};
    mdp.validate();
    return mdp;
}

namespace grid {
// Action ids of the cliff grid fixture. up increases y.
constexpr int up = 0;
constexpr int down = 1;
constexpr int left = 2;
constexpr int right = 3;
} // namespace grid

/// Cliff walk on a width x height board. Cell (x, y) has id y * width + x
/// with y = 0 the bottom row. The bottom row holds the start at (0, 0), the
/// cliff at x = 1 .. width-2, and the goal at (width-1, 0); cliff and goal
/// are terminal. Moving off the board bumps in place. slip diverts the move
/// to each perpendicular direction with probability slip / 2.
///
/// Rewards are expected immediate values: stepping into a cliff cell
/// contributes cliff_penalty, into the goal goal_reward, anything else -1,
/// weighted by the transition probabilities. Neighborhoods are the Manhattan
/// radius 1 balls. gamma = 0.95, horizon = 4 * width * height.
inline TabularMdp build_cliff_grid(int width = 4, int height = 3, double cliff_penalty = -100.0,
                                   double goal_reward = 10.0, double slip = 0.0) {
    if (width < 3) throw std::invalid_argument("build_cliff_grid: width must be >= 3");
    if (height < 2) throw std::invalid_argument("build_cliff_grid: height must be >= 2");
    if (!(slip >= 0.0 && slip <= 0.2))
        throw std::invalid_argument("build_cliff_grid: slip must lie in [0, 0.2]");

    TabularMdp mdp;
    mdp.n_states = width * height;
    mdp.n_actions = 4;
    mdp.gamma = 0.95;
    mdp.horizon = 4 * width * height;
    mdp.transition.assign(static_cast<std::size_t>(mdp.n_states) * 4 * mdp.n_states, 0.0);
    mdp.reward.assign(static_cast<std::size_t>(mdp.n_states) * 4, 0.0);
    mdp.cell_coords.resize(static_cast<std::size_t>(mdp.n_states));

    auto id_of = [width](int x, int y) { return y * width + x; };
    auto is_cliff = [width](int x, int y) { return y == 0 && x >= 1 && x <= width - 2; };
    auto is_goal = [width](int x, int y) { return y == 0 && x == width - 1; };

    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            mdp.cell_coords[static_cast<std::size_t>(id_of(x, y))] = {x, y};
            if (is_cliff(x, y) || is_goal(x, y)) mdp.terminal.push_back(id_of(x, y));
        }
    std::sort(mdp.terminal.begin(), mdp.terminal.end());

    const std::array<std::array<int, 2>, 4> delta = {{{0, 1}, {0, -1}, {-1, 0}, {1, 0}}};
    auto land = [&](int x, int y, int a) {
        int nx = x + delta[static_cast<std::size_t>(a)][0];
        int ny = y + delta[static_cast<std::size_t>(a)][1];
        if (nx < 0 || nx >= width || ny < 0 || ny >= height) return std::array<int, 2>{x, y};
        return std::array<int, 2>{nx, ny};
    };
    auto outcome_reward = [&](int x, int y) {
        if (is_cliff(x, y)) return cliff_penalty;
        if (is_goal(x, y)) return goal_reward;
        return -1.0;
    };
    const std::array<std::array<int, 2>, 4> lateral = {{{grid::left, grid::right},
                                                        {grid::left, grid::right},
                                                        {grid::up, grid::down},
                                                        {grid::up, grid::down}}};

    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            int s = id_of(x, y);
            if (mdp.is_terminal(s)) {
                for (int a = 0; a < 4; ++a) mdp.prob(s, a, s) = 1.0;
                continue;
            }
            for (int a = 0; a < 4; ++a) {
                auto add = [&](int dir, double p) {
                    auto c = land(x, y, dir);
                    mdp.prob(s, a, id_of(c[0], c[1])) += p;
                    mdp.reward_at(s, a) += p * outcome_reward(c[0], c[1]);
                };
                add(a, 1.0 - slip);
                add(lateral[static_cast<std::size_t>(a)][0], slip / 2.0);
                add(lateral[static_cast<std::size_t>(a)][1], slip / 2.0);
            }
        }

    mdp.neighborhoods.resize(static_cast<std::size_t>(mdp.n_states));
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            auto& nb = mdp.neighborhoods[static_cast<std::size_t>(id_of(x, y))];
            for (int y2 = 0; y2 < height; ++y2)
                for (int x2 = 0; x2 < width; ++x2)
                    if (std::abs(x - x2) + std::abs(y - y2) <= 1) nb.push_back(id_of(x2, y2));
            std::sort(nb.begin(), nb.end());
        }

    mdp.validate();
    return mdp;
}

/// Seed-reproducible random MDP: dense row normalized transitions, rewards
/// uniform in [-1, 1], gamma 0.9, horizon 5, no terminal states.
/// Neighborhoods are sampled as symmetric pairs under the size cap, so
/// s in S_s2 iff s2 in S_s; membership symmetry keeps worst case reward
/// queries and adversary validity consistent with each other.
/// Bounds: n_states <= 8, n_actions <= 3, nbhd_size <= 3.
inline TabularMdp build_random_mdp(std::uint64_t seed, int n_states, int n_actions, int nbhd_size) {
    if (n_states < 1 || n_states > 8)
        throw std::invalid_argument("build_random_mdp: n_states must lie in [1, 8]");
    if (n_actions < 1 || n_actions > 3)
        throw std::invalid_argument("build_random_mdp: n_actions must lie in [1, 3]");
    if (nbhd_size < 1 || nbhd_size > 3)
        throw std::invalid_argument("build_random_mdp: nbhd_size must lie in [1, 3]");

    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = 0.9;
    mdp.horizon = 5;
    mdp.transition.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
    mdp.reward.resize(static_cast<std::size_t>(n_states) * n_actions);

    std::mt19937_64 rng(seed);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                double w = 0.05 + canonical(rng);
                mdp.prob(s, a, s2) = w;
                sum += w;
            }
            for (int s2 = 0; s2 < n_states; ++s2) mdp.prob(s, a, s2) /= sum;
        }
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) mdp.reward_at(s, a) = uniform_real(rng, -1.0, 1.0);

    mdp.neighborhoods.assign(static_cast<std::size_t>(n_states), {});
    for (int s = 0; s < n_states; ++s) mdp.neighborhoods[static_cast<std::size_t>(s)].push_back(s);
    const int attempts = 8 * n_states * nbhd_size;
    for (int i = 0; i < attempts; ++i) {
        int u = uniform_int(rng, n_states);
        int v = uniform_int(rng, n_states);
        if (u == v) continue;
        auto& nu = mdp.neighborhoods[static_cast<std::size_t>(u)];
        auto& nv = mdp.neighborhoods[static_cast<std::size_t>(v)];
        if (static_cast<int>(nu.size()) >= nbhd_size || static_cast<int>(nv.size()) >= nbhd_size)
            continue;
        if (std::find(nu.begin(), nu.end(), v) != nu.end()) continue;
        nu.push_back(v);
        nv.push_back(u);
    }
    for (auto& nb : mdp.neighborhoods) std::sort(nb.begin(), nb.end());

    mdp.validate();
    return mdp;
}

} // namespace rrl
