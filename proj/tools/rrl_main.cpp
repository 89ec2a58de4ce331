#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "regretrl/config.hpp"
#include "regretrl/harness.hpp"

namespace fs = std::filesystem;
using namespace rrl;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

std::vector<std::string> learners_for(const std::string& victim) {
    if (victim == "drn_plus") return {"dqn", "drn", "drn_plus"};
    if (victim == "dqn" || victim == "drn") return {victim};
    throw config_error("unknown victim " + victim);
}

const TrainedVictim& victim_named(const std::vector<TrainedVictim>& vs, const std::string& name) {
    const TrainedVictim* v = nullptr;
    for (const TrainedVictim& c : vs)
        if (c.name == name) v = &c;
    if (v == nullptr) throw config_error("victim " + name + " was not trained");
    return *v;
}

nlohmann::json curve_to_json(const std::vector<CurvePoint>& curve) {
    nlohmann::json j = nlohmann::json::array();
    for (const CurvePoint& p : curve) {
        nlohmann::json jp;
        jp["episode"] = p.episode;
        jp["return"] = p.episode_return;
        jp["mean_loss"] = p.mean_loss;
        j.push_back(std::move(jp));
    }
    return j;
}

int run_train(const TabularMdp& mdp, const ExperimentConfig& cfg, const std::string& learner,
              std::uint64_t seed) {
    LearnerConfig lc = cfg.learner;
    lc.seed = seed;
    const LearnerKind kind = learner == "dqn" ? LearnerKind::q_learner : LearnerKind::drn_learner;
    const TrainResult res = train(mdp, lc, kind);
    const fs::path out(cfg.out_dir);
    nlohmann::json stores;
    stores["learner"] = learner;
    stores["seed"] = seed;
    stores["policy"] = res.policy.actions;
    stores["q"] = res.q.to_json();
    if (!res.r.empty()) stores["r"] = res.r.to_json();
    if (cfg.format == "json") {
        nlohmann::json j = stores;
        j["curve"] = curve_to_json(res.curve);
        write_json(out / "train.json", j);
    } else {
        std::ostringstream csv;
        csv << "episode,return,mean_loss\n";
        for (const CurvePoint& p : res.curve)
            csv << p.episode << ',' << format_double(p.episode_return) << ','
                << format_double(p.mean_loss) << '\n';
        write_text(out / "train_curve.csv", csv.str());
        write_json(out / "train_stores.json", stores);
    }
    std::cout << learner << " trained: " << res.curve.size() << " episodes, policy [";
    for (std::size_t s = 0; s < res.policy.actions.size(); ++s)
        std::cout << (s ? "," : "") << res.policy.actions[s];
    std::cout << "]\n";
    return 0;
}

int run_attack_train(const TabularMdp& mdp, ExperimentConfig cfg, const std::string& victim,
                     std::uint64_t seed) {
    cfg.learners = learners_for(victim);
    const std::vector<TrainedVictim> victims = train_victims(mdp, cfg);
    const TrainedVictim& target = victim_named(victims, victim);
    ActorConfig acfg = cfg.actor;
    acfg.seed = seed;
    const AdversarySpec trained = actor_train(mdp, target.policy, acfg);
    const fs::path out(cfg.out_dir);
    nlohmann::json j;
    j["victim"] = victim;
    j["victim_policy"] = target.policy.actions;
    j["inflation"] = trained.inflation;
    j["seed"] = seed;
    j["actor"] = trained.actor.to_json();
    write_json(out / "actor_store.json", j);

    std::ostringstream csv;
    csv << "state,shown\n";
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mdp.is_terminal(s)) continue;
        AttackInputs in;
        in.mdp = &mdp;
        in.victim_policy = &target.policy;
        const PerturbedObservation obs = schedule_perturbation(trained, 0, s, in);
        csv << s << ',' << obs.shown_state << '\n';
    }
    write_text(out / "actor_policy.csv", csv.str());
    std::cout << "actor trained against " << victim << ", store " << mdp.n_states << " states\n";
    return 0;
}

int run_eval(const TabularMdp& mdp, ExperimentConfig cfg, const std::string& victim,
             std::uint64_t seed_base) {
    cfg.learners = learners_for(victim);
    const std::vector<TrainedVictim> victims = train_victims(mdp, cfg);
    const TrainedVictim& v = victim_named(victims, victim);

    AdversarySpec spec;
    if (!cfg.adversaries.empty()) spec = cfg.adversaries.front();
    AttackInputs in;
    in.mdp = &mdp;
    in.victim_policy = &v.policy;
    ValueStore true_q;
    if (spec.kind == AdversaryKind::myopic) {
        true_q = ValueStore::tabular_from(exact_q_star(mdp), mdp.n_states, mdp.n_actions);
        in.true_q = &true_q;
    } else if (spec.kind == AdversaryKind::actor) {
        ActorConfig acfg = cfg.actor;
        acfg.inflation = spec.inflation;
        const AdversarySpec trained = actor_train(mdp, v.policy, acfg);
        const int t_adv = spec.t_adv;
        spec = trained;
        spec.t_adv = t_adv;
    } else if (spec.kind == AdversaryKind::fgsm) {
        in.victim_store = &v.q;
    }

    EvalConfig ecfg;
    ecfg.episodes = cfg.episodes_per_seed;
    ecfg.seeds = cfg.eval_seeds;
    ecfg.seed_base = seed_base;
    ecfg.start_state = cfg.learner.start_state;
    const EvalReport rep = evaluate(mdp, v.policy, spec, in, ecfg);

    MatrixResult single;
    MatrixCell cell;
    cell.victim = victim;
    cell.adversary = adversary_kind_name(spec.kind);
    cell.t_adv = spec.t_adv;
    cell.inflation = spec.inflation;
    cell.report = rep;
    single.cells.push_back(std::move(cell));
    const fs::path out(cfg.out_dir);
    if (cfg.format == "json") {
        nlohmann::json j;
        j["victim"] = victim;
        j["adversary"] = adversary_kind_name(spec.kind);
        j["t_adv"] = spec.t_adv;
        j["inflation"] = spec.inflation;
        j["report"] = eval_report_to_json(rep);
        write_json(out / "eval.json", j);
    } else {
        std::ostringstream detail, summary;
        write_detail_csv(detail, single);
        write_summary_csv(summary, single);
        write_text(out / "eval_detail.csv", detail.str());
        write_text(out / "eval_summary.csv", summary.str());
    }
    std::cout << victim << " vs " << adversary_kind_name(spec.kind) << ": mean "
              << format_double(rep.mean) << ", variance " << format_double(rep.variance) << "\n";
    return 0;
}

int run_matrix_cmd(const TabularMdp& mdp, const ExperimentConfig& cfg) {
    const MatrixResult res = run_matrix(mdp, cfg);
    const fs::path out(cfg.out_dir);
    if (cfg.format == "json") {
        write_json(out / "matrix.json", matrix_to_json(res));
    } else {
        std::ostringstream detail, summary;
        write_detail_csv(detail, res);
        write_summary_csv(summary, res);
        write_text(out / "matrix_detail.csv", detail.str());
        write_text(out / "matrix_summary.csv", summary.str());
    }
    for (const TrainedVictim& v : res.victims)
        std::cout << v.name << ": selected seed " << v.selected_seed << ", unperturbed mean "
                  << format_double(v.unperturbed_mean) << "\n";
    for (const MatrixCell& c : res.cells) {
        std::cout << "  " << c.victim << " vs " << c.adversary << " t" << c.t_adv;
        if (c.inflation != 0.0) std::cout << " i" << format_double(c.inflation);
        if (c.ok)
            std::cout << ": mean " << format_double(c.report.mean) << ", variance "
                      << format_double(c.report.variance) << "\n";
        else
            std::cout << ": FAILED (" << c.error << ")\n";
    }
    return 0;
}

int run_sweep(const TabularMdp& mdp, const ExperimentConfig& cfg) {
    const std::vector<SweepRow> rows = neighborhood_sweep(mdp, cfg, cfg.sweep_inflations);
    const fs::path out(cfg.out_dir);
    if (cfg.format == "json") {
        write_json(out / "sweep.json", sweep_to_json(rows));
    } else {
        std::ostringstream csv;
        write_sweep_csv(csv, rows);
        write_text(out / "sweep.csv", csv.str());
    }
    for (const SweepRow& r : rows)
        std::cout << r.victim << " @ inflation " << format_double(r.inflation) << ": mean "
                  << format_double(r.mean) << ", variance " << format_double(r.variance) << "\n";
    return 0;
}

int run_verify(const ExperimentConfig& cfg, double ccer_bias) {
    const VerifyReport rep =
        verify_corpus(default_bound_corpus(), default_substructure_corpus(), ccer_bias);
    write_json(fs::path(cfg.out_dir) / "verify.json", verify_to_json(rep));
    int bound_bad = 0;
    int chain_bad = 0;
    int sub_bad = 0;
    for (const VerifyInstance& inst : rep.instances) {
        if (inst.ok || inst.capacity) continue;
        if (inst.check == "ccer_bound") ++bound_bad;
        else if (inst.check == "chain") ++chain_bad;
        else ++sub_bad;
    }
    std::cout << "ccer_bound: " << bound_bad << " failing of 200\n"
              << "chain: " << chain_bad << " failing of 200\n"
              << "substructure: " << sub_bad << " failing of 50\n"
              << "capacity errors: " << rep.capacity_errors << "\n";
    if (!rep.all_ok()) {
        for (const VerifyInstance& inst : rep.instances) {
            if (inst.ok || inst.capacity) continue;
            std::cout << "  " << inst.check << "[" << inst.index << "] margin "
                      << format_double(inst.margin) << "\n";
        }
        std::cout << "verify: FAIL\n";
        return 1;
    }
    std::cout << "verify: OK\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"regret-robust reinforcement learning toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_dir;
    std::string format;
    app.add_option("--config", config_path, "config file, TOML or JSON");
    CLI::Option* seed_opt = app.add_option(
        "--seed", seed, "training seed for train/attack-train, evaluation seed base for eval");
    CLI::Option* out_opt = app.add_option("--out", out_dir, "output directory");
    CLI::Option* format_opt =
        app.add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));

    CLI::App* train_cmd = app.add_subcommand("train", "train one learner and dump its stores");
    std::string learner = "dqn";
    train_cmd->add_option("--learner", learner, "dqn or drn")
        ->check(CLI::IsMember({"dqn", "drn"}));

    CLI::App* attack_cmd =
        app.add_subcommand("attack-train", "train an actor adversary against a trained victim");
    std::string attack_victim = "dqn";
    attack_cmd->add_option("--victim", attack_victim, "dqn, drn, or drn_plus")
        ->check(CLI::IsMember({"dqn", "drn", "drn_plus"}));

    CLI::App* eval_cmd = app.add_subcommand(
        "eval", "evaluate one victim against the first configured adversary");
    std::string eval_victim = "dqn";
    eval_cmd->add_option("--victim", eval_victim, "dqn, drn, or drn_plus")
        ->check(CLI::IsMember({"dqn", "drn", "drn_plus"}));

    CLI::App* matrix_cmd =
        app.add_subcommand("matrix", "run the full victim x adversary evaluation matrix");
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "myopic robustness sweep over neighborhood inflations");
    CLI::App* verify_cmd =
        app.add_subcommand("verify", "exhaustive certificate checks over the random corpora");
    double ccer_bias = 0.0;
    verify_cmd->add_option("--ccer-bias", ccer_bias,
                           "fault injection offset added to every upper-bound reading");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (out_opt->count() > 0) cfg.out_dir = out_dir;
        if (format_opt->count() > 0) cfg.format = format;
        cfg.validate();
        const TabularMdp mdp = build_environment(cfg.environment);

        if (train_cmd->parsed())
            return run_train(mdp, cfg, learner, seed_opt->count() ? seed : cfg.learner.seed);
        if (attack_cmd->parsed())
            return run_attack_train(mdp, cfg, attack_victim,
                                    seed_opt->count() ? seed : cfg.actor.seed);
        if (eval_cmd->parsed())
            return run_eval(mdp, cfg, eval_victim, seed_opt->count() ? seed : 0);
        if (matrix_cmd->parsed()) return run_matrix_cmd(mdp, cfg);
        if (sweep_cmd->parsed()) return run_sweep(mdp, cfg);
        if (verify_cmd->parsed()) return run_verify(cfg, ccer_bias);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
