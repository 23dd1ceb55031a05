#include <catch2/catch_amalgamated.hpp>

#include "nsslab/baselines.hpp"
#include "nsslab/envgen.hpp"
#include "nsslab/sim.hpp"

using namespace nsslab;

namespace {

SspInstance single_state(double cost, double goal_prob) {
    SspInstance inst(1, 1);
    inst.cost_at(0, 0) = cost;
    inst.row(0, 0)[1] = goal_prob;
    inst.row(0, 0)[0] = 1.0 - goal_prob;
    return inst;
}

// ends an interval after every step, to exercise learner-requested breaks
class AlwaysRequestLearner : public LearnerContract {
public:
    void on_interval_start(long long, int) override {}
    int choose_action(long long, int) override { return 0; }
    bool observe(long long, int, int, double, int) override { return true; }
};

class NeverRequestLearner : public LearnerContract {
public:
    void on_interval_start(long long, int) override {}
    int choose_action(long long, int) override { return 0; }
    bool observe(long long, int, int, double, int) override { return false; }
};

}  // namespace

TEST_CASE("horizon config rounds the horizon up") {
    DriftStats st;
    st.t_max = 10.0;
    st.b_star = 2.0;
    HorizonConfig cfg = HorizonConfig::derive(st, 8);
    REQUIRE(cfg.H == 167);
    REQUIRE(cfg.terminal_cost_scale == 4.0);
}

TEST_CASE("deterministic goal hop yields zero regret and one interval per episode") {
    DriftSequence seq = stationary_sequence(single_state(0.5, 1.0), 50);
    DriftStats st = drift_stats(seq);
    HorizonConfig cfg = HorizonConfig::derive(st, seq.horizon_episodes);
    NeverRequestLearner learner;
    RunOptions opts;
    opts.noise = CostNoise::Deterministic;
    RunResult run = run_experiment(seq, learner, cfg, 1, opts);
    REQUIRE(run.ledger.total_intervals == 50);
    REQUIRE(run.ledger.final_regret == Catch::Approx(0.0).margin(1e-9));
    for (const auto& rec : run.intervals) {
        REQUIRE(rec.length == 1);
        REQUIRE(rec.end == EndReason::GoalReached);
        REQUIRE(rec.terminal_cost == 0.0);
    }
}

TEST_CASE("horizon-hit intervals pay the terminal cost and resume in place") {
    // no goal transition possible for a while: run with a tiny horizon
    DriftSequence seq = stationary_sequence(single_state(0.2, 0.05), 5);
    DriftStats st = drift_stats(seq);
    HorizonConfig cfg = HorizonConfig::derive(st, seq.horizon_episodes);
    cfg.H = 3;  // deliberately small horizon to force horizon hits
    NeverRequestLearner learner;
    RunOptions opts;
    opts.capture_steps = true;
    RunResult run = run_experiment(seq, learner, cfg, 7, opts);
    bool saw_horizon_hit = false;
    for (std::size_t i = 0; i < run.intervals.size(); ++i) {
        const auto& rec = run.intervals[i];
        if (rec.end == EndReason::HorizonHit) {
            saw_horizon_hit = true;
            REQUIRE(rec.length == 3);
            REQUIRE(rec.terminal_cost == cfg.terminal_cost_scale);
            REQUIRE(i + 1 < run.intervals.size());
            REQUIRE(run.intervals[i + 1].start_state == rec.steps.back().next);
            REQUIRE(run.intervals[i + 1].episode == rec.episode);
        } else {
            REQUIRE(rec.end == EndReason::GoalReached);
            REQUIRE(rec.terminal_cost == 0.0);
        }
    }
    REQUIRE(saw_horizon_hit);
}

TEST_CASE("learner-requested breaks produce length-one intervals") {
    DriftSequence seq = stationary_sequence(single_state(0.2, 0.3), 10);
    DriftStats st = drift_stats(seq);
    HorizonConfig cfg = HorizonConfig::derive(st, seq.horizon_episodes);
    AlwaysRequestLearner learner;
    RunResult run = run_experiment(seq, learner, cfg, 3);
    for (const auto& rec : run.intervals) {
        REQUIRE(rec.length == 1);
        REQUIRE((rec.end == EndReason::GoalReached || rec.end == EndReason::LearnerRequested));
    }
}

TEST_CASE("interval partition reproduces episodes with no gaps or overlaps") {
    DriftSequence seq = make_hard_sequence(1.0, 5.0, 10, 60, 0.05, 0.05, 5);
    DriftStats st = drift_stats(seq);
    HorizonConfig cfg = HorizonConfig::derive(st, seq.horizon_episodes);
    UniformRandomLearner learner(seq.num_actions(), 11);
    RunOptions opts;
    opts.capture_steps = true;
    RunResult run = run_experiment(seq, learner, cfg, 11, opts);

    long long prev_episode = 0;
    for (std::size_t i = 0; i < run.intervals.size(); ++i) {
        const auto& rec = run.intervals[i];
        REQUIRE(rec.episode >= prev_episode);  // k(m) non-decreasing
        bool first_of_episode = rec.episode != prev_episode;
        if (first_of_episode) {
            REQUIRE(rec.start_state == 0);
        } else {
            REQUIRE(rec.start_state == run.intervals[i - 1].steps.back().next);
        }
        // steps chain within the interval
        for (std::size_t s = 1; s < rec.steps.size(); ++s) {
            REQUIRE(rec.steps[s].state == rec.steps[s - 1].next);
        }
        REQUIRE(rec.steps.front().state == rec.start_state);
        REQUIRE(static_cast<long long>(rec.steps.size()) == rec.length);
        prev_episode = rec.episode;
    }
    REQUIRE(prev_episode == seq.horizon_episodes);
}

TEST_CASE("same seed and learner give a bit-identical ledger") {
    DriftSequence seq = make_hard_sequence(1.0, 5.0, 10, 40, 0.05, 0.0, 9);
    DriftStats st = drift_stats(seq);
    HorizonConfig cfg = HorizonConfig::derive(st, seq.horizon_episodes);
    UniformRandomLearner a(seq.num_actions(), 21);
    UniformRandomLearner b(seq.num_actions(), 21);
    RunResult ra = run_experiment(seq, a, cfg, 400);
    RunResult rb = run_experiment(seq, b, cfg, 400);
    REQUIRE(ra.ledger.rows.size() == rb.ledger.rows.size());
    for (std::size_t i = 0; i < ra.ledger.rows.size(); ++i) {
        REQUIRE(ra.ledger.rows[i].suffered == rb.ledger.rows[i].suffered);
        REQUIRE(ra.ledger.rows[i].cum_regret == rb.ledger.rows[i].cum_regret);
        REQUIRE(ra.ledger.rows[i].intervals == rb.ledger.rows[i].intervals);
    }
}

TEST_CASE("episode regret stays within the interval regret plus b_star") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        DriftSequence seq = make_hard_sequence(1.0, 5.0, 10, 80, 0.04, 0.04, seed);
        DriftStats st = drift_stats(seq);
        HorizonConfig cfg = HorizonConfig::derive(st, seq.horizon_episodes);
        UniformRandomLearner learner(seq.num_actions(), seed);
        RunResult run = run_experiment(seq, learner, cfg, seed);
        REQUIRE(run.ledger.final_regret <=
                run.ledger.interval_regret + st.b_star + 1e-6);
    }
}

TEST_CASE("step cap converts a non-terminating policy into an error") {
    // two states; action 0 self-loops on state 0, the goal needs action 1
    SspInstance inst(1, 2);
    inst.cost_at(0, 0) = 0.0;
    inst.row(0, 0)[0] = 1.0;
    inst.cost_at(0, 1) = 0.2;
    inst.row(0, 1)[1] = 1.0;
    DriftSequence seq = stationary_sequence(inst, 3);
    HorizonConfig cfg;
    cfg.H = 10;
    cfg.K = 3;
    cfg.b_star = 1.0;
    cfg.terminal_cost_scale = 2.0;
    FixedPolicyLearner learner(PolicyTable::stationary({0}));
    RunOptions opts;
    opts.step_cap = 500;
    REQUIRE_THROWS_AS(run_experiment(seq, learner, cfg, 5, opts), StepCapExceeded);
}

TEST_CASE("dynamic regret series matches the ledger bookkeeping") {
    RegretLedger ledger;
    EpisodeRow r1;
    r1.episode = 1;
    r1.suffered = 5.0;
    r1.v_star = 2.0;
    r1.cum_regret = 3.0;
    EpisodeRow r2;
    r2.episode = 2;
    r2.suffered = 1.0;
    r2.v_star = 2.0;
    r2.cum_regret = 2.0;
    ledger.rows = {r1, r2};
    RegretSeries series = dynamic_regret(ledger);
    REQUIRE(series.increments[0] == Catch::Approx(3.0));
    REQUIRE(series.increments[1] == Catch::Approx(-1.0));
    REQUIRE(series.cumulative[1] == Catch::Approx(2.0));
    REQUIRE(series.total == Catch::Approx(2.0));
}

TEST_CASE("uniform random play accumulates positive regret on the hard family") {
    // large drift budgets so the per-episode arm gaps dominate sampling noise
    DriftSequence seq = make_hard_sequence(1.0, 3.0, 10, 500, 0.5, 0.5, 2);
    DriftStats st = drift_stats(seq);
    HorizonConfig cfg = HorizonConfig::derive(st, seq.horizon_episodes);
    UniformRandomLearner learner(seq.num_actions(), 77);
    RunOptions opts;
    opts.noise = CostNoise::Deterministic;
    RunResult run = run_experiment(seq, learner, cfg, 77, opts);
    RegretSeries series = dynamic_regret(run.ledger);
    REQUIRE(series.total > 0.0);
    // roughly linear: the second half contributes a comparable share
    double first_half = series.cumulative[249];
    double second_half = series.total - first_half;
    REQUIRE(second_half > 0.2 * first_half);
}
