#pragma once

#include <cstdint>
#include <random>

#include "nsslab/sim.hpp"

namespace nsslab {

class UniformRandomLearner : public LearnerContract {
public:
    UniformRandomLearner(int num_actions, std::uint64_t rng_seed)
        : num_actions_(num_actions), gen_(make_stream(rng_seed, "uniform-random")) {}

    void on_interval_start(long long, int) override {}
    int choose_action(long long, int) override {
        std::uniform_int_distribution<int> pick(0, num_actions_ - 1);
        return pick(gen_);
    }
    bool observe(long long, int, int, double, int) override { return false; }

private:
    int num_actions_;
    Rng gen_;
};

// Plays one fixed stationary policy forever, e.g. the optimal policy of the
// first environment piece.
class FixedPolicyLearner : public LearnerContract {
public:
    explicit FixedPolicyLearner(PolicyTable policy) : policy_(std::move(policy)) {}

    void on_interval_start(long long, int) override {}
    int choose_action(long long, int state) override { return policy_.at(state); }
    bool observe(long long, int, int, double, int) override { return false; }

private:
    PolicyTable policy_;
};

}  // namespace nsslab
