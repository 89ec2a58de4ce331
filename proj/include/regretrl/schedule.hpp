#pragma once

#include <algorithm>
#include <stdexcept>

namespace rrl {

/// Linear exploration schedule. decay_episodes = 0 decays across the whole
/// run; otherwise the value reaches end at decay_episodes and stays there.
struct EpsSchedule {
    double start = 1.0;
    double end = 0.05;
    int decay_episodes = 0;

    void validate() const {
        if (!(start >= 0.0 && start <= 1.0 && end >= 0.0 && end <= 1.0))
            throw std::invalid_argument("EpsSchedule: epsilon must stay in [0, 1]");
        if (decay_episodes < 0)
            throw std::invalid_argument("EpsSchedule: decay_episodes must be >= 0");
    }

    double at(int episode, int total_episodes) const {
        int span = decay_episodes > 0 ? decay_episodes : total_episodes;
        if (span <= 1 || episode >= span) return end;
        double f = static_cast<double>(episode) / static_cast<double>(span - 1);
        return start + f * (end - start);
    }
};

} // namespace rrl
