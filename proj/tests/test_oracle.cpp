#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "regretrl/fixtures.hpp"
#include "regretrl/oracle.hpp"
#include "regretrl/rng.hpp"

using namespace rrl;

namespace {

const std::vector<int> pi_value_tl{1, 0, 1, 0};
const std::vector<int> pi_regret_tl{0, 0, 0, 0};

std::vector<int> random_policy(const TabularMdp& mdp, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> pi(static_cast<std::size_t>(mdp.n_states));
    for (auto& a : pi) a = uniform_int(rng, mdp.n_actions);
    return pi;
}

} // namespace

TEST_CASE("two lane exact tables") {
    TabularMdp m = build_twolane();
    CHECK(exact_q_star(m) == std::vector<double>{0.5, 2.0, 0.5, -10.0, 1.0, 2.0, 0.0, 0.0});
    CHECK(exact_ccer_q_opt(m) == std::vector<double>{0.0, 0.5, 0.0, 0.0, 0.5, 12.0, 0.0, 0.0});
    CHECK(exact_gap_table(m) ==
          std::vector<double>{0.0, 0.0, 0.0, 0.0, 0.5, 12.0, 0.0, 0.0});
    CHECK(oracle_value_policy(m).actions == pi_value_tl);
    CHECK(oracle_regret_policy(m).actions == pi_regret_tl);
}

TEST_CASE("two lane policy values") {
    TabularMdp m = build_twolane();
    CHECK(exact_v_pi(m, pi_value_tl) == std::vector<double>{2.0, 0.5, 2.0, 0.0});
    CHECK(exact_v_pi(m, pi_regret_tl) == std::vector<double>{0.5, 0.5, 1.0, 0.0});
    CHECK(exact_v_pi(m, pi_value_tl, 1) == std::vector<double>{0.0, 0.5, 2.0, 0.0});

    CHECK_THROWS_AS(exact_v_pi(m, {1, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(exact_v_pi(m, {1, 0, 1, 9}), std::invalid_argument);
    CHECK_THROWS_AS(exact_v_pi(m, pi_value_tl, 0), std::invalid_argument);
}

TEST_CASE("discounting scales the second step") {
    TabularMdp m = build_twolane();
    m.gamma = 0.5;
    CHECK(exact_v_pi(m, pi_value_tl) == std::vector<double>{1.0, 0.5, 2.0, 0.0});
}

TEST_CASE("perturbed policy values") {
    TabularMdp m = build_twolane();
    SECTION("identity perturbation changes nothing") {
        std::vector<int> id{0, 1, 2, 3};
        CHECK(exact_v_pi_mu(m, pi_value_tl, id) == exact_v_pi(m, pi_value_tl));
        CHECK(exact_v_pi_mu(m, pi_regret_tl, id) == exact_v_pi(m, pi_regret_tl));
    }
    SECTION("lane swap reroutes the fast policy into the slow reward") {
        std::vector<int> swap{0, 2, 1, 3};
        CHECK(exact_v_pi_mu(m, pi_value_tl, swap) ==
              std::vector<double>{1.0, -10.0, 1.0, 0.0});
    }
    SECTION("perturbations outside the neighborhood are rejected") {
        CHECK_THROWS_AS(exact_v_pi_mu(m, pi_value_tl, {1, 1, 1, 3}), std::invalid_argument);
        CHECK_THROWS_AS(exact_v_pi_mu(m, pi_value_tl, {0, 1, 2}), std::invalid_argument);
        CHECK_THROWS_AS(exact_v_pi_mu(m, pi_value_tl, {0, 1, 9, 3}), std::invalid_argument);
    }
}

TEST_CASE("scheduled perturbation windows") {
    TabularMdp m = build_twolane();
    std::vector<int> swap{0, 2, 1, 3};
    SECTION("window offset selects which step is hit") {
        CHECK(exact_v_pi_mu_scheduled(m, pi_value_tl, swap, 2, 1)[0] == 1.0);
        CHECK(exact_v_pi_mu_scheduled(m, pi_value_tl, swap, 2, 0)[0] == 2.0);
    }
    SECTION("every step window equals the unscheduled value") {
        CHECK(exact_v_pi_mu_scheduled(m, pi_value_tl, swap, 1, 0) ==
              exact_v_pi_mu(m, pi_value_tl, swap));
    }
    SECTION("schedule arguments are validated") {
        CHECK_THROWS_AS(exact_v_pi_mu_scheduled(m, pi_value_tl, swap, 0, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(exact_v_pi_mu_scheduled(m, pi_value_tl, swap, 2, 2),
                        std::invalid_argument);
        CHECK_THROWS_AS(exact_v_pi_mu_scheduled(m, pi_value_tl, swap, 2, -1),
                        std::invalid_argument);
    }
}

TEST_CASE("worst case lower bounds") {
    TabularMdp m = build_twolane();
    CHECK(exact_v_check(m, pi_value_tl) == std::vector<double>{-10.0, 0.5, -10.0, 0.0});
    CHECK(exact_v_check_separated(m, pi_value_tl) ==
          std::vector<double>{-10.0, 0.5, -10.0, 0.0});
    CHECK(exact_ccer(m, pi_value_tl) == std::vector<double>{12.0, 0.0, 12.0, 0.0});
    CHECK(exact_ccer(m, pi_regret_tl) == std::vector<double>{0.0, 0.0, 0.5, 0.0});
}

TEST_CASE("adversary enumeration order and capacity") {
    TabularMdp m = build_twolane();
    SECTION("mixed radix order with state zero fastest") {
        std::vector<std::vector<int>> seen;
        for_each_mu(m, [&seen](const std::vector<int>& mu) { seen.push_back(mu); });
        REQUIRE(seen.size() == 4);
        CHECK(seen[0] == std::vector<int>{0, 1, 1, 3});
        CHECK(seen[1] == std::vector<int>{0, 2, 1, 3});
        CHECK(seen[2] == std::vector<int>{0, 1, 2, 3});
        CHECK(seen[3] == std::vector<int>{0, 2, 2, 3});
    }
    SECTION("the product budget is enforced") {
        TabularMdp big = build_random_mdp(1, 8, 2, 2);
        std::vector<int> all(8);
        for (int s = 0; s < 8; ++s) all[static_cast<std::size_t>(s)] = s;
        for (auto& nb : big.neighborhoods) nb = all;
        try {
            for_each_mu(big, [](const std::vector<int>&) {});
            FAIL("expected capacity_error");
        } catch (const capacity_error& e) {
            CHECK(e.requested() == 16777216.0);
            CHECK(e.budget() == 1e6);
        }
    }
}

TEST_CASE("exhaustive worst case regret") {
    TabularMdp m = build_twolane();
    SECTION("fast policy loses exactly the slow lane difference") {
        MaxRegretResult r = exact_max_regret(m, pi_value_tl);
        CHECK(r.value == 1.0);
        CHECK(r.mu == std::vector<int>{0, 1, 1, 3});
        CHECK(r.shown0 == 0);
    }
    SECTION("the all slow policy is immune") {
        CHECK(exact_max_regret(m, pi_regret_tl).value == 0.0);
    }
    SECTION("singleton neighborhoods leave no room to perturb") {
        TabularMdp solo = build_twolane();
        solo.neighborhoods = {{0}, {1}, {2}, {3}};
        CHECK(exact_max_regret(solo, pi_value_tl).value == 0.0);
    }
    CHECK_THROWS_AS(exact_max_regret(m, pi_value_tl, 9), std::invalid_argument);
}

TEST_CASE("regret bound report") {
    TabularMdp m = build_twolane();
    BoundReport fast = check_ccer_bound(m, pi_value_tl);
    CHECK(fast.holds);
    CHECK(fast.max_regret == 1.0);
    CHECK(fast.ccer_at_shown == 12.0);
    CHECK(fast.margin == 11.0);
    CHECK(fast.shown0 == 0);

    BoundReport slow = check_ccer_bound(m, pi_regret_tl);
    CHECK(slow.holds);
    CHECK(slow.margin == 0.0);
}

TEST_CASE("regret chain report") {
    TabularMdp m = build_twolane();
    ChainReport fast = check_chain(m, pi_value_tl);
    CHECK(fast.holds);
    CHECK(fast.max_regret == 1.0);
    CHECK(fast.v_gap_at_shown == 12.0);
    CHECK(fast.ccer_at_shown == 12.0);
    CHECK(fast.joint_gap_at_shown == 12.0);
    CHECK(fast.link1_margin == 11.0);
    CHECK(fast.link2_margin == 0.0);

    ChainReport slow = check_chain(m, pi_regret_tl);
    CHECK(slow.holds);
    CHECK(slow.link1_margin == 0.0);
    CHECK(slow.link2_margin == 0.0);
}

TEST_CASE("plan substructure report") {
    TabularMdp m = build_twolane();
    SECTION("default horizon") {
        SubstructureReport rep = check_substructure(m);
        CHECK(rep.holds);
        CHECK(rep.worst_margin == 0.0);
        CHECK(rep.plans_checked == 272);
    }
    SECTION("single step plans are trivially optimal") {
        SubstructureReport rep = check_substructure(m, 1);
        CHECK(rep.holds);
        CHECK(rep.plans_checked == 16);
    }
    SECTION("deeper horizon") {
        SubstructureReport rep = check_substructure(m, 4);
        CHECK(rep.holds);
        CHECK(rep.plans_checked == 69904);
    }
    SECTION("the plan budget is enforced") {
        CHECK_THROWS_AS(check_substructure(m, 5), capacity_error);
        CHECK_THROWS_AS(check_substructure(build_cliff_grid()), capacity_error);
    }
}

TEST_CASE("cliff grid exact tables") {
    TabularMdp m = build_cliff_grid();
    const std::vector<double> q = exact_q_star(m);
    const std::vector<double> gap = exact_gap_table(m);

    SECTION("instantaneous regret is confined to the cliff rim") {
        std::vector<double> expected(48, 0.0);
        expected[4 * 4 + grid::down] = 99.0;   // (0,1) shown as a cell whose down step dies
        expected[4 * 4 + grid::right] = 99.0;  // (0,1) confusable with the start cell
        expected[7 * 4 + grid::down] = 110.0;  // goal drop confusable with a cliff drop
        expected[9 * 4 + grid::down] = 99.0;   // (1,2) above the rim
        expected[10 * 4 + grid::down] = 99.0;  // (2,2) above the rim
        CHECK(gap == expected);
        CHECK(exact_ccer_q_opt(m) == gap);
    }
    SECTION("optimal values along the rim route") {
        CHECK(q[7 * 4 + grid::down] == 10.0);
        CHECK(q[6 * 4 + grid::right] == 8.5);
        CHECK(q[0 * 4 + grid::up] == Catch::Approx(4.4351875).epsilon(1e-12));
        CHECK(q[0 * 4 + grid::right] == -100.0);
    }
    SECTION("greedy extractions") {
        CHECK(oracle_value_policy(m).actions ==
              std::vector<int>{0, 0, 0, 0, 3, 3, 3, 1, 1, 1, 1, 1});
        CHECK(oracle_regret_policy(m).actions ==
              std::vector<int>{0, 0, 0, 0, 2, 3, 3, 3, 1, 3, 3, 1});
    }
    SECTION("returned tables satisfy their own backups") {
        const std::vector<double> r = exact_ccer_q_opt(m);
        double worst_q = 0.0, worst_r = 0.0;
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                double bq = 0.0, br = 0.0;
                if (!m.is_terminal(s)) {
                    double eq = 0.0, er = 0.0;
                    for (int s2 = 0; s2 < m.n_states; ++s2) {
                        double hi = q[static_cast<std::size_t>(s2) * 4];
                        double lo = r[static_cast<std::size_t>(s2) * 4];
                        for (int a2 = 1; a2 < 4; ++a2) {
                            hi = std::max(hi, q[static_cast<std::size_t>(s2) * 4 + a2]);
                            lo = std::min(lo, r[static_cast<std::size_t>(s2) * 4 + a2]);
                        }
                        eq += m.prob(s, a, s2) * hi;
                        er += m.prob(s, a, s2) * lo;
                    }
                    bq = m.reward_at(s, a) + m.gamma * eq;
                    br = gap[static_cast<std::size_t>(s) * 4 + a] + m.gamma * er;
                }
                worst_q = std::max(worst_q, std::abs(bq - q[static_cast<std::size_t>(s) * 4 + a]));
                worst_r = std::max(worst_r, std::abs(br - r[static_cast<std::size_t>(s) * 4 + a]));
            }
        CHECK(worst_q <= 1e-12);
        CHECK(worst_r <= 1e-12);
    }
}

TEST_CASE("random instance identities") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        TabularMdp m = build_random_mdp(seed, 3 + static_cast<int>(seed % 4), 2,
                                        1 + static_cast<int>(seed % 3));
        std::vector<int> pi = random_policy(m, 100 + seed);
        INFO("seed " << seed);

        std::vector<int> id(static_cast<std::size_t>(m.n_states));
        for (int s = 0; s < m.n_states; ++s) id[static_cast<std::size_t>(s)] = s;
        CHECK(exact_v_pi_mu(m, pi, id) == exact_v_pi(m, pi));

        const std::vector<double> v = exact_v_pi(m, pi);
        const std::vector<double> vc = exact_v_check(m, pi);
        const std::vector<double> vs = exact_v_check_separated(m, pi);
        const std::vector<double> c = exact_ccer(m, pi);
        for (int s = 0; s < m.n_states; ++s) {
            const std::size_t i = static_cast<std::size_t>(s);
            CHECK(vc[i] <= v[i] + 1e-12);
            CHECK(vs[i] <= v[i] + 1e-12);
            // The worst case reward penalty along own dynamics IS the
            // accumulated reward gap.
            CHECK(std::abs((v[i] - vs[i]) - c[i]) <= 1e-12);
            CHECK(c[i] >= 0.0);
        }

        MaxRegretResult worst = exact_max_regret(m, pi);
        CHECK(worst.value >= 0.0);
        BoundReport rep = check_ccer_bound(m, pi);
        CHECK(rep.margin == rep.ccer_at_shown - rep.max_regret);
        CHECK(rep.holds == (rep.margin >= -1e-9));
        ChainReport chain = check_chain(m, pi);
        CHECK(std::abs(chain.link2_margin) <= 1e-12);
        CHECK(chain.max_regret == worst.value);
    }
}

TEST_CASE("plan substructure holds on small random instances") {
    for (std::uint64_t j = 0; j < 5; ++j) {
        TabularMdp m = build_random_mdp(5000 + j, 3, 2, 1 + static_cast<int>(j % 3));
        SubstructureReport rep = check_substructure(m, 3);
        INFO("seed " << 5000 + j << " worst margin " << rep.worst_margin);
        CHECK(rep.holds);
        CHECK(rep.worst_margin >= -1e-9);
        CHECK(rep.plans_checked == 584);
    }
}
