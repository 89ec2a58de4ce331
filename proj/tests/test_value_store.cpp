#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "regretrl/fixtures.hpp"
#include "regretrl/rng.hpp"
#include "regretrl/value_store.hpp"

using namespace rrl;

TEST_CASE("feature maps") {
    FeatureMap oh = FeatureMap::one_hot(3);
    CHECK(oh.dim() == 3);
    CHECK(oh.features(1) == std::vector<double>{0.0, 1.0, 0.0});
    CHECK_THROWS_AS(oh.features(3), std::invalid_argument);
    CHECK_THROWS_AS(FeatureMap::one_hot(0), std::invalid_argument);

    CHECK_THROWS_AS(FeatureMap::grid_xy(build_random_mdp(1, 4, 2, 2)), std::invalid_argument);
    FeatureMap g = FeatureMap::grid_xy(build_cliff_grid());
    CHECK(g.dim() == 2);
    CHECK(g.features(0) == std::vector<double>{-1.0, -1.0});
    CHECK(g.features(7) == std::vector<double>{1.0, 0.0});
    CHECK(g.features(11) == std::vector<double>{1.0, 1.0});
}

TEST_CASE("tabular store basics") {
    ValueStore v = ValueStore::tabular(3, 2);
    CHECK(v.predict(1) == std::vector<double>{0.0, 0.0});
    CHECK_THROWS_AS(v.predict(3), std::invalid_argument);
    CHECK_THROWS_AS(v.predict(-1), std::invalid_argument);
    CHECK_THROWS_AS(ValueStore::tabular(0, 2), std::invalid_argument);

    ValueStore empty;
    CHECK_THROWS_AS(empty.predict(0), std::logic_error);
}

TEST_CASE("incremental fit moves halfway at alpha one half") {
    ValueStore v = ValueStore::tabular(2, 2);
    CHECK(v.fit_target(0, 1, 10.0, 0.5) == 50.0);
    CHECK(v.table_at(0, 1) == 5.0);
    CHECK(v.fit_target(0, 1, 10.0, 0.5) == 12.5);
    CHECK(v.table_at(0, 1) == 7.5);
    CHECK(v.table_at(0, 0) == 0.0);
}

TEST_CASE("alpha one assigns the target exactly") {
    ValueStore v = ValueStore::tabular(1, 1);
    v.fit_target(0, 0, 1e16, 1.0);
    CHECK(v.table_at(0, 0) == 1e16);
    v.fit_target(0, 0, 1.0, 1.0);
    CHECK(v.table_at(0, 0) == 1.0);
    // The incremental rule cannot do this: the update itself rounds.
    CHECK(1e16 + 1.0 * (1.0 - 1e16) != 1.0);
    // Refitting the same target is a fixed point with zero loss.
    CHECK(v.fit_target(0, 0, 1.0, 1.0) == 0.0);
    CHECK(v.table_at(0, 0) == 1.0);
}

TEST_CASE("incremental fits match the reference recurrence bit for bit") {
    std::mt19937_64 rng(3);
    ValueStore v = ValueStore::tabular(1, 1);
    double ref = 0.0;
    for (int i = 0; i < 50; ++i) {
        double target = uniform_real(rng, -5.0, 5.0);
        double loss = v.fit_target(0, 0, target, 0.25);
        CHECK(loss == 0.5 * (ref - target) * (ref - target));
        ref += 0.25 * (target - ref);
        CHECK(v.table_at(0, 0) == ref);
    }
}

TEST_CASE("fit argument validation") {
    ValueStore v = ValueStore::tabular(2, 2);
    CHECK_THROWS_AS(v.fit_target(0, 0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(v.fit_target(0, 0, 1.0, -0.5), std::invalid_argument);
    CHECK_THROWS_AS(v.fit_target(0, 0, std::numeric_limits<double>::quiet_NaN(), 0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(v.fit_target(0, 0, std::numeric_limits<double>::infinity(), 0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(v.fit_target(2, 0, 1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(v.fit_target(0, 2, 1.0, 0.5), std::invalid_argument);

    std::mt19937_64 rng(1);
    ValueStore m = ValueStore::mlp(FeatureMap::one_hot(2), 2, 3, rng);
    CHECK_THROWS_AS(m.table_at(0, 0), std::logic_error);
}

TEST_CASE("mlp output is the second layer affine map of hidden activations") {
    std::mt19937_64 rng(1);
    ValueStore v = ValueStore::mlp(FeatureMap::one_hot(3), 2, 4, rng);
    nlohmann::json j = v.to_json();

    // All weights zero: the output is exactly the output bias.
    std::vector<double> theta(v.theta().size(), 0.0);
    theta[theta.size() - 2] = 1.5;
    theta[theta.size() - 1] = -2.0;
    j["theta"] = theta;
    ValueStore z = ValueStore::from_json(j);
    CHECK(z.predict(0) == std::vector<double>{1.5, -2.0});
    CHECK(z.predict(2) == std::vector<double>{1.5, -2.0});
}

TEST_CASE("mlp factory validation") {
    std::mt19937_64 rng(2);
    FeatureMap f = FeatureMap::one_hot(2);
    CHECK_THROWS_AS(ValueStore::mlp(f, 0, 3, rng), std::invalid_argument);
    CHECK_THROWS_AS(ValueStore::mlp(f, 2, 0, rng), std::invalid_argument);
    ValueStore v = ValueStore::mlp(f, 2, 3, rng);
    for (double p : v.theta()) {
        CHECK(p >= -0.05);
        CHECK(p <= 0.05);
    }
}

TEST_CASE("repeated fits shrink the loss monotonically") {
    std::mt19937_64 rng(7);
    ValueStore v = ValueStore::mlp(FeatureMap::one_hot(4), 3, 8, rng);
    double prev = std::numeric_limits<double>::infinity();
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 100; ++i) {
        double loss = v.fit_target(2, 1, 1.0, 0.1);
        if (i == 0) first = loss;
        CHECK(loss <= prev + 1e-9);
        prev = loss;
        last = loss;
    }
    CHECK(last < first);
    CHECK(last < 1e-6);
}

TEST_CASE("gradient check agrees with finite differences") {
    std::mt19937_64 rng(11);
    ValueStore v = ValueStore::mlp(FeatureMap::one_hot(5), 2, 6, rng);
    for (int i = 0; i < 20; ++i)
        v.fit_target(uniform_int(rng, 5), uniform_int(rng, 2), uniform_real(rng, -2.0, 2.0), 0.1);
    for (int probe = 0; probe < 20; ++probe) {
        int s = uniform_int(rng, 5);
        int a = uniform_int(rng, 2);
        double target = uniform_real(rng, -2.0, 2.0);
        CHECK(v.grad_check(s, a, target) < 1e-4);
    }
}

TEST_CASE("gradient check holds for dense feature rows") {
    nlohmann::json fj;
    fj["kind"] = "grid_xy";
    fj["n_states"] = 3;
    fj["dim"] = 2;
    fj["matrix"] = std::vector<double>{0.3, -0.7, -0.2, 0.9, 1.0, -1.0};
    FeatureMap f = FeatureMap::from_json(fj);
    std::mt19937_64 rng(5);
    ValueStore v = ValueStore::mlp(f, 2, 4, rng);
    CHECK(v.grad_check(0, 1, 0.8) < 1e-4);
    CHECK(v.grad_check(2, 0, -1.2) < 1e-4);
}

TEST_CASE("gradient check at a stationary point stays within absolute tolerance") {
    ValueStore v = ValueStore::tabular(2, 2);
    v.fit_target(1, 0, 3.0, 1.0);
    CHECK(v.grad_check(1, 0, 3.0) <= 1e-8);

    std::mt19937_64 rng(2);
    ValueStore m = ValueStore::mlp(FeatureMap::one_hot(2), 2, 3, rng);
    double at_minimum = m.predict(1)[0];
    CHECK(m.grad_check(1, 0, at_minimum) <= 1e-8);
}

TEST_CASE("tabular gradient check away from the minimum") {
    ValueStore v = ValueStore::tabular(1, 1);
    v.fit_target(0, 0, 5.0, 1.0);
    CHECK(v.grad_check(0, 0, 2.0) < 1e-6);
}

TEST_CASE("input gradient matches feature perturbation") {
    ValueStore tab = ValueStore::tabular(2, 2);
    CHECK_THROWS_AS(tab.input_gradient(0, 0), std::logic_error);

    std::mt19937_64 rng(13);
    FeatureMap f = FeatureMap::grid_xy(build_cliff_grid());
    ValueStore v = ValueStore::mlp(f, 4, 6, rng);
    for (int i = 0; i < 30; ++i)
        v.fit_target(uniform_int(rng, 12), uniform_int(rng, 4), uniform_real(rng, -3.0, 3.0), 0.1);

    std::vector<double> g = v.input_gradient(5, 2);
    REQUIRE(g.size() == 2);
    const double h = 1e-6;
    for (int d = 0; d < 2; ++d) {
        nlohmann::json vj = v.to_json();
        auto mat = vj["feature"]["matrix"].get<std::vector<double>>();
        mat[static_cast<std::size_t>(5 * 2 + d)] += h;
        vj["feature"]["matrix"] = mat;
        ValueStore vp = ValueStore::from_json(vj);
        mat[static_cast<std::size_t>(5 * 2 + d)] -= 2.0 * h;
        vj["feature"]["matrix"] = mat;
        ValueStore vm = ValueStore::from_json(vj);
        double numeric = (vp.predict(5)[2] - vm.predict(5)[2]) / (2.0 * h);
        CHECK(std::abs(numeric - g[static_cast<std::size_t>(d)]) < 1e-5);
    }
}

TEST_CASE("checkpoints round trip bit for bit") {
    SECTION("tabular") {
        ValueStore v = ValueStore::tabular(3, 2);
        std::mt19937_64 rng(17);
        for (int i = 0; i < 10; ++i)
            v.fit_target(uniform_int(rng, 3), uniform_int(rng, 2), uniform_real(rng, -4.0, 4.0), 0.3);
        ValueStore back = ValueStore::from_json(v.to_json());
        CHECK(back.theta() == v.theta());
        CHECK(back.to_json().dump() == v.to_json().dump());
    }
    SECTION("mlp") {
        std::mt19937_64 rng(19);
        ValueStore v = ValueStore::mlp(FeatureMap::grid_xy(build_cliff_grid()), 4, 5, rng);
        for (int i = 0; i < 10; ++i)
            v.fit_target(uniform_int(rng, 12), uniform_int(rng, 4), uniform_real(rng, -2.0, 2.0), 0.2);
        ValueStore back = ValueStore::from_json(v.to_json());
        CHECK(back.theta() == v.theta());
        for (int s = 0; s < 12; ++s) CHECK(back.predict(s) == v.predict(s));
    }
    SECTION("malformed documents are rejected") {
        ValueStore v = ValueStore::tabular(2, 2);
        nlohmann::json j = v.to_json();
        j["kind"] = "mystery";
        CHECK_THROWS_AS(ValueStore::from_json(j), std::invalid_argument);
        j["kind"] = "tabular";
        j["theta"] = std::vector<double>{1.0};
        CHECK_THROWS_AS(ValueStore::from_json(j), std::invalid_argument);
    }
}
