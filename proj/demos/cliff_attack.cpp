// Cliff walk under observation attack: the shortest path hugs the cliff, and
// an attacker that may swap adjacent cells turns that edge into a trap. The
// sweep at the end widens the attacker's reach and shows which policy's
// return degrades gracefully.

#include <iostream>

#include "regretrl/config.hpp"
#include "regretrl/fixtures.hpp"
#include "regretrl/harness.hpp"
#include "regretrl/oracle.hpp"

using namespace rrl;

namespace {

void print_grid_policy(const TabularMdp& m, const char* label, const PolicyHandle& pi,
                       int width, int height) {
    const char arrows[] = {'^', 'v', '<', '>'};
    std::cout << "  " << label << "\n";
    for (int y = height - 1; y >= 0; --y) {
        std::cout << "    ";
        for (int x = 0; x < width; ++x) {
            const int s = y * width + x;
            if (m.is_terminal(s)) std::cout << (x == width - 1 && y == 0 ? 'G' : 'C');
            else std::cout << arrows[pi.action(s)];
        }
        std::cout << "\n";
    }
}

} // namespace

int main() {
    const int width = 4;
    const int height = 3;
    const TabularMdp m = build_cliff_grid(width, height);
    std::cout << "Cliff walk " << width << "x" << height
              << ". Start bottom-left, goal bottom-right, the cells between\n"
              << "them are the cliff (-100). Every step costs 1; the goal pays 10.\n\n";

    ExperimentConfig cfg;
    cfg.environment.id = "cliff";
    cfg.learners = {"dqn", "drn"};
    cfg.train_seeds = 2;
    cfg.eval_seeds = 5;
    cfg.episodes_per_seed = 20;
    AdversarySpec myo;
    myo.kind = AdversaryKind::myopic;
    myo.t_adv = 2;
    cfg.adversaries = {myo};

    const MatrixResult res = run_matrix(m, cfg);
    print_grid_policy(m, "value-greedy rides the edge:", res.victims[0].policy, width, height);
    print_grid_policy(m, "regret-greedy keeps its distance:", res.victims[1].policy, width,
                      height);

    std::cout << "\nMean return, unperturbed and under the cell-swapping adversary\n"
              << "(fires every second step):\n";
    for (const MatrixCell& c : res.cells) {
        if (!c.ok) continue;
        std::printf("  %-4s vs %-7s %9.3f\n", c.victim.c_str(), c.adversary.c_str(),
                    c.report.mean);
    }

    std::cout << "\nWidening the attacker's swap radius (myopic, every step):\n"
              << "  inflation   value-greedy   regret-greedy\n";
    const std::vector<SweepRow> rows = neighborhood_sweep(m, cfg, {0.0, 0.1, 0.2});
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2)
        std::printf("  %9.1f   %12.3f   %13.3f\n", rows[i].inflation, rows[i].mean,
                    rows[i + 1].mean);

    std::cout << "\nOne swapped observation is all it takes against the edge-rider:\n"
              << "even the narrowest radius walks it off the cliff. The cautious\n"
              << "policy pays a steep price up front, circling instead of chasing\n"
              << "the goal, but no swap the attacker can make costs it anything.\n";
    return 0;
}
