#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "regretrl/mdp.hpp"
#include "regretrl/rng.hpp"

namespace rrl {

enum class FeatureKind { one_hot, grid_xy };

/// Total map from state id to a fixed dimension feature vector with entries
/// in [-1, 1]. one_hot has dimension n_states; grid_xy carries the cell
/// coordinates of a grid fixture normalized to [-1, 1] per axis.
class FeatureMap {
public:
    FeatureMap() = default;

    static FeatureMap one_hot(int n_states) {
        if (n_states < 1) throw std::invalid_argument("FeatureMap: n_states must be >= 1");
        FeatureMap fm;
        fm.kind_ = FeatureKind::one_hot;
        fm.n_states_ = n_states;
        fm.dim_ = n_states;
        fm.matrix_.assign(static_cast<std::size_t>(n_states) * n_states, 0.0);
        for (int s = 0; s < n_states; ++s)
            fm.matrix_[static_cast<std::size_t>(s) * n_states + s] = 1.0;
        return fm;
    }

    static FeatureMap grid_xy(const TabularMdp& mdp) {
        if (mdp.cell_coords.empty())
            throw std::invalid_argument("FeatureMap: grid_xy requires a grid fixture");
        int max_x = 0, max_y = 0;
        for (const auto& c : mdp.cell_coords) {
            max_x = std::max(max_x, c[0]);
            max_y = std::max(max_y, c[1]);
        }
        FeatureMap fm;
        fm.kind_ = FeatureKind::grid_xy;
        fm.n_states_ = mdp.n_states;
        fm.dim_ = 2;
        fm.matrix_.resize(static_cast<std::size_t>(mdp.n_states) * 2);
        for (int s = 0; s < mdp.n_states; ++s) {
            const auto& c = mdp.cell_coords[static_cast<std::size_t>(s)];
            fm.matrix_[static_cast<std::size_t>(s) * 2 + 0] =
                max_x == 0 ? 0.0 : 2.0 * c[0] / max_x - 1.0;
            fm.matrix_[static_cast<std::size_t>(s) * 2 + 1] =
                max_y == 0 ? 0.0 : 2.0 * c[1] / max_y - 1.0;
        }
        return fm;
    }

    FeatureKind kind() const { return kind_; }
    int n_states() const { return n_states_; }
    int dim() const { return dim_; }

    const double* row(int s) const { return matrix_.data() + static_cast<std::size_t>(s) * dim_; }

    std::vector<double> features(int s) const {
        if (s < 0 || s >= n_states_) throw std::invalid_argument("FeatureMap: state out of range");
        return std::vector<double>(row(s), row(s) + dim_);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["kind"] = kind_ == FeatureKind::one_hot ? "one_hot" : "grid_xy";
        j["n_states"] = n_states_;
        j["dim"] = dim_;
        j["matrix"] = matrix_;
        return j;
    }

    static FeatureMap from_json(const nlohmann::json& j) {
        FeatureMap fm;
        std::string k = j.at("kind").get<std::string>();
        if (k == "one_hot")
            fm.kind_ = FeatureKind::one_hot;
        else if (k == "grid_xy")
            fm.kind_ = FeatureKind::grid_xy;
        else
            throw std::invalid_argument("FeatureMap: unknown kind " + k);
        fm.n_states_ = j.at("n_states").get<int>();
        fm.dim_ = j.at("dim").get<int>();
        fm.matrix_ = j.at("matrix").get<std::vector<double>>();
        if (fm.matrix_.size() != static_cast<std::size_t>(fm.n_states_) * fm.dim_)
            throw std::invalid_argument("FeatureMap: matrix size mismatch");
        return fm;
    }

private:
    FeatureKind kind_ = FeatureKind::one_hot;
    int n_states_ = 0;
    int dim_ = 0;
    std::vector<double> matrix_;
};

enum class StoreKind { tabular, mlp };

/// State-action value container with a uniform predict / fit contract.
///
/// tabular: dense (n_states x n_actions) table, zero initialized. A fit with
/// alpha = 1 assigns the target exactly; smaller alpha applies the
/// incremental rule entry += alpha * (target - entry). Exact assignment at
/// alpha 1 keeps deterministic fixtures on the DP fixed point bit for bit.
///
/// mlp: one hidden tanh layer of the given width over a FeatureMap, one
/// output per action, plain per-sample gradient descent on squared error.
/// Parameters are stored flat as [W1 (hidden x dim), b1, W2 (actions x
/// hidden), b2] and initialized uniformly in [-0.05, 0.05] from the run rng.
class ValueStore {
public:
    ValueStore() = default;

    static ValueStore tabular(int n_states, int n_actions) {
        if (n_states < 1 || n_actions < 1)
            throw std::invalid_argument("ValueStore: shape must be positive");
        ValueStore v;
        v.kind_ = StoreKind::tabular;
        v.n_states_ = n_states;
        v.n_actions_ = n_actions;
        v.theta_.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
        return v;
    }

    static ValueStore tabular_from(const std::vector<double>& table, int n_states, int n_actions) {
        ValueStore v = tabular(n_states, n_actions);
        if (table.size() != v.theta_.size())
            throw std::invalid_argument("ValueStore: table size mismatch");
        v.theta_ = table;
        return v;
    }

    static ValueStore mlp(const FeatureMap& features, int n_actions, int hidden,
                          std::mt19937_64& rng) {
        if (n_actions < 1) throw std::invalid_argument("ValueStore: n_actions must be >= 1");
        if (hidden < 1) throw std::invalid_argument("ValueStore: hidden must be >= 1");
        ValueStore v;
        v.kind_ = StoreKind::mlp;
        v.n_states_ = features.n_states();
        v.n_actions_ = n_actions;
        v.hidden_ = hidden;
        v.features_ = features;
        v.theta_.resize(v.param_count());
        for (auto& p : v.theta_) p = uniform_real(rng, -0.05, 0.05);
        return v;
    }

    StoreKind kind() const { return kind_; }
    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    int hidden() const { return hidden_; }
    bool empty() const { return theta_.empty(); }
    const std::vector<double>& theta() const { return theta_; }
    const FeatureMap& features() const { return features_; }

    double table_at(int s, int a) const {
        require_tabular();
        return theta_[static_cast<std::size_t>(s) * n_actions_ + a];
    }

    double& table_at(int s, int a) {
        require_tabular();
        return theta_[static_cast<std::size_t>(s) * n_actions_ + a];
    }

    std::vector<double> predict(int s) const {
        if (theta_.empty()) throw std::logic_error("predict: uninitialized store");
        check_state(s);
        if (kind_ == StoreKind::tabular) {
            auto begin = theta_.begin() + static_cast<std::ptrdiff_t>(s) * n_actions_;
            return std::vector<double>(begin, begin + n_actions_);
        }
        std::vector<double> h;
        return forward(features_.row(s), h);
    }

    /// Moves the value at (s, a) toward target and returns the pre-update
    /// loss 0.5 * (prediction - target)^2.
    double fit_target(int s, int a, double target, double alpha) {
        check_state(s);
        check_action(a);
        if (!std::isfinite(target)) throw std::invalid_argument("fit_target: non-finite target");
        if (!(alpha > 0.0)) throw std::invalid_argument("fit_target: alpha must be > 0");
        if (kind_ == StoreKind::tabular) {
            double& entry = theta_[static_cast<std::size_t>(s) * n_actions_ + a];
            double delta = entry - target;
            if (alpha == 1.0)
                entry = target;
            else
                entry += alpha * (target - entry);
            return 0.5 * delta * delta;
        }
        std::vector<double> h;
        std::vector<double> out = forward(features_.row(s), h);
        double delta = out[static_cast<std::size_t>(a)] - target;
        std::vector<double> g(theta_.size(), 0.0);
        backprop(features_.row(s), h, a, delta, g);
        for (std::size_t i = 0; i < theta_.size(); ++i) theta_[i] -= alpha * g[i];
        return 0.5 * delta * delta;
    }

    /// Maximum relative error between the analytic loss gradient at
    /// (s, a, target) and central finite differences (step 1e-5) across all
    /// parameters. Where both gradients are below 1e-8 in magnitude the
    /// absolute difference is used instead of the relative one.
    double grad_check(int s, int a, double target) const {
        check_state(s);
        check_action(a);
        std::vector<double> analytic(theta_.size(), 0.0);
        if (kind_ == StoreKind::tabular) {
            double delta = table_at(s, a) - target;
            analytic[static_cast<std::size_t>(s) * n_actions_ + a] = delta;
        } else {
            std::vector<double> h;
            std::vector<double> out = forward(features_.row(s), h);
            double delta = out[static_cast<std::size_t>(a)] - target;
            backprop(features_.row(s), h, a, delta, analytic);
        }
        const double step = 1e-5;
        ValueStore probe = *this;
        double worst = 0.0;
        for (std::size_t i = 0; i < theta_.size(); ++i) {
            double saved = probe.theta_[i];
            probe.theta_[i] = saved + step;
            double lp = probe.loss_at(s, a, target);
            probe.theta_[i] = saved - step;
            double lm = probe.loss_at(s, a, target);
            probe.theta_[i] = saved;
            double numeric = (lp - lm) / (2.0 * step);
            double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
            double err = scale < 1e-8 ? std::abs(analytic[i] - numeric)
                                      : std::abs(analytic[i] - numeric) / scale;
            worst = std::max(worst, err);
        }
        return worst;
    }

    /// Gradient of predict(s)[a] with respect to the input feature vector.
    /// mlp only.
    std::vector<double> input_gradient(int s, int a) const {
        if (kind_ != StoreKind::mlp)
            throw std::logic_error("input_gradient: requires an mlp store");
        check_state(s);
        check_action(a);
        const int d = features_.dim();
        std::vector<double> h;
        forward(features_.row(s), h);
        std::vector<double> g(static_cast<std::size_t>(d), 0.0);
        for (int j = 0; j < hidden_; ++j) {
            double back = w2(a, j) * (1.0 - h[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)]);
            for (int i = 0; i < d; ++i) g[static_cast<std::size_t>(i)] += back * w1(j, i);
        }
        return g;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["kind"] = kind_ == StoreKind::tabular ? "tabular" : "mlp";
        j["n_states"] = n_states_;
        j["n_actions"] = n_actions_;
        j["theta"] = theta_;
        if (kind_ == StoreKind::mlp) {
            j["hidden"] = hidden_;
            j["feature"] = features_.to_json();
        }
        return j;
    }

    static ValueStore from_json(const nlohmann::json& j) {
        std::string k = j.at("kind").get<std::string>();
        ValueStore v;
        if (k == "tabular") {
            v = tabular(j.at("n_states").get<int>(), j.at("n_actions").get<int>());
        } else if (k == "mlp") {
            v.kind_ = StoreKind::mlp;
            v.n_states_ = j.at("n_states").get<int>();
            v.n_actions_ = j.at("n_actions").get<int>();
            v.hidden_ = j.at("hidden").get<int>();
            v.features_ = FeatureMap::from_json(j.at("feature"));
            v.theta_.resize(v.param_count());
        } else {
            throw std::invalid_argument("ValueStore: unknown kind " + k);
        }
        auto theta = j.at("theta").get<std::vector<double>>();
        if (theta.size() != v.theta_.size())
            throw std::invalid_argument("ValueStore: theta size mismatch");
        v.theta_ = std::move(theta);
        return v;
    }

private:
    StoreKind kind_ = StoreKind::tabular;
    int n_states_ = 0;
    int n_actions_ = 0;
    int hidden_ = 0;
    FeatureMap features_;
    std::vector<double> theta_;

    std::size_t param_count() const {
        const std::size_t d = static_cast<std::size_t>(features_.dim());
        const std::size_t h = static_cast<std::size_t>(hidden_);
        const std::size_t a = static_cast<std::size_t>(n_actions_);
        return h * d + h + a * h + a;
    }

    double w1(int j, int i) const {
        return theta_[static_cast<std::size_t>(j) * features_.dim() + i];
    }
    double w2(int k, int j) const {
        const std::size_t off =
            static_cast<std::size_t>(hidden_) * features_.dim() + hidden_;
        return theta_[off + static_cast<std::size_t>(k) * hidden_ + j];
    }

    std::vector<double> forward(const double* phi, std::vector<double>& hidden_out) const {
        const int d = features_.dim();
        hidden_out.resize(static_cast<std::size_t>(hidden_));
        const std::size_t b1_off = static_cast<std::size_t>(hidden_) * d;
        for (int j = 0; j < hidden_; ++j) {
            double z = theta_[b1_off + static_cast<std::size_t>(j)];
            for (int i = 0; i < d; ++i) z += w1(j, i) * phi[i];
            hidden_out[static_cast<std::size_t>(j)] = std::tanh(z);
        }
        const std::size_t b2_off = b1_off + hidden_ + static_cast<std::size_t>(n_actions_) * hidden_;
        std::vector<double> out(static_cast<std::size_t>(n_actions_));
        for (int k = 0; k < n_actions_; ++k) {
            double z = theta_[b2_off + static_cast<std::size_t>(k)];
            for (int j = 0; j < hidden_; ++j) z += w2(k, j) * hidden_out[static_cast<std::size_t>(j)];
            out[static_cast<std::size_t>(k)] = z;
        }
        return out;
    }

    // Gradient of 0.5 * (out[a] - target)^2 with respect to theta, given the
    // output error delta = out[a] - target, accumulated into g.
    void backprop(const double* phi, const std::vector<double>& h, int a, double delta,
                  std::vector<double>& g) const {
        const int d = features_.dim();
        const std::size_t b1_off = static_cast<std::size_t>(hidden_) * d;
        const std::size_t w2_off = b1_off + hidden_;
        const std::size_t b2_off = w2_off + static_cast<std::size_t>(n_actions_) * hidden_;
        g[b2_off + static_cast<std::size_t>(a)] += delta;
        for (int j = 0; j < hidden_; ++j) {
            double hj = h[static_cast<std::size_t>(j)];
            g[w2_off + static_cast<std::size_t>(a) * hidden_ + j] += delta * hj;
            double dz = delta * w2(a, j) * (1.0 - hj * hj);
            g[b1_off + static_cast<std::size_t>(j)] += dz;
            for (int i = 0; i < d; ++i)
                g[static_cast<std::size_t>(j) * d + i] += dz * phi[i];
        }
    }

    double loss_at(int s, int a, double target) const {
        double pred = predict(s)[static_cast<std::size_t>(a)];
        double delta = pred - target;
        return 0.5 * delta * delta;
    }

    void require_tabular() const {
        if (kind_ != StoreKind::tabular)
            throw std::logic_error("ValueStore: tabular access on an mlp store");
    }
    void check_state(int s) const {
        if (s < 0 || s >= n_states_) throw std::invalid_argument("ValueStore: state out of range");
    }
    void check_action(int a) const {
        if (a < 0 || a >= n_actions_)
            throw std::invalid_argument("ValueStore: action out of range");
    }
};

} // namespace rrl
