#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "nsslab/model.hpp"
#include "nsslab/rng.hpp"

namespace nsslab {

struct StepCapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Finite-horizon approximation parameters: every interval runs at most
// H = ceil(4 * t_max * ln(8K)) steps and ending an interval away from the
// goal charges a terminal cost of 2 * b_star.
struct HorizonConfig {
    long long H = 1;
    double terminal_cost_scale = 2.0;  // 2 * b_star
    long long K = 1;
    double b_star = 1.0;

    static HorizonConfig derive(const DriftStats& stats, long long K) {
        HorizonConfig cfg;
        cfg.K = K;
        cfg.b_star = stats.b_star;
        cfg.terminal_cost_scale = 2.0 * stats.b_star;
        cfg.H = std::max<long long>(
            1, static_cast<long long>(std::ceil(4.0 * stats.t_max * std::log(8.0 * K))));
        return cfg;
    }
};

enum class EndReason { GoalReached, HorizonHit, LearnerRequested };

struct Step {
    long long h;
    int state;
    int action;
    double cost;
    int next;
};

struct IntervalRecord {
    long long m = 0;       // interval index, 1-based
    long long episode = 0; // k(m)
    int start_state = 0;
    long long length = 0;  // H_m
    EndReason end = EndReason::GoalReached;
    double terminal_cost = 0.0;
    double total_cost = 0.0;  // C^m, includes terminal cost
    std::vector<Step> steps;  // captured only when requested
};

// Cumulative reset/test counters a learner may expose for the ledger.
struct LearnerStats {
    long long resets_c = 0;
    long long resets_p = 0;
    long long tests1 = 0;
    long long tests2 = 0;
    long long tests3 = 0;
};

// The contract every learner implements. choose_action must be deterministic
// given the learner's internal state; observe may request a new interval based
// only on what has been observed so far.
class LearnerContract {
public:
    virtual ~LearnerContract() = default;
    virtual void on_interval_start(long long m, int start_state) = 0;
    virtual int choose_action(long long h, int state) = 0;
    // Returns true when the learner wants the interval to end after this step.
    virtual bool observe(long long h, int state, int action, double cost, int next) = 0;
    virtual void on_interval_end(const IntervalRecord& record) { (void)record; }
    virtual LearnerStats stats() const { return {}; }
};

struct EpisodeRow {
    long long episode = 0;
    double suffered = 0.0;   // sampled costs only, no terminal costs
    double v_star = 0.0;     // exact optimal value of that episode
    double cum_regret = 0.0;
    long long intervals = 0; // M_k
    LearnerStats learner;    // cumulative counters snapshot
};

struct RegretLedger {
    std::vector<EpisodeRow> rows;
    double final_regret = 0.0;        // R_K
    double interval_regret = 0.0;     // ring regret over all intervals
    long long total_intervals = 0;    // M
    double wallclock_seconds = 0.0;
};

struct RunResult {
    RegretLedger ledger;
    std::vector<IntervalRecord> intervals;
};

enum class CostNoise { Bernoulli, Deterministic };

struct RunOptions {
    CostNoise noise = CostNoise::Bernoulli;
    bool capture_steps = false;
    // 0 means the default cap of 100 * H * K steps per episode.
    std::uint64_t step_cap = 0;
};

namespace detail {

// Exact per-segment quantities needed by the ledger, computed once per piece.
struct SegmentSolution {
    std::vector<double> v_star;
    PolicyTable pi_star;
    LayeredValues pi_star_layered;  // H-step value of pi_star with terminal cost
};

class SegmentCache {
public:
    SegmentCache(const DriftSequence& seq, const HorizonConfig& cfg)
        : seq_(seq), cfg_(cfg), cache_(seq.segments.size()) {}

    const SegmentSolution& for_episode(long long k) {
        std::size_t idx = seq_.segment_index(k);
        if (!cache_[idx]) {
            const SspInstance& inst = seq_.segments[idx].instance;
            SolveResult sol = ssp_optimal_values(inst);
            auto entry = std::make_unique<SegmentSolution>();
            entry->v_star = std::move(sol.values);
            entry->pi_star = std::move(sol.policy);
            entry->pi_star_layered = finite_horizon_policy_value(
                inst, entry->pi_star, cfg_.H,
                terminal_cost_vector(inst.num_states, cfg_.terminal_cost_scale));
            cache_[idx] = std::move(entry);
        }
        return *cache_[idx];
    }

private:
    const DriftSequence& seq_;
    const HorizonConfig& cfg_;
    std::vector<std::unique_ptr<SegmentSolution>> cache_;
};

inline int sample_outcome(const double* row, int n, Rng& gen) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(gen);
    double acc = 0.0;
    for (int o = 0; o < n; ++o) {
        acc += row[o];
        if (u < acc) return o;
    }
    return n - 1;
}

}  // namespace detail

// Runs K episodes of the interval protocol: each episode starts an interval at
// the initial state; an interval ends on goal, horizon H, or on the learner's
// request, and the next interval resumes from the current state. The ledger
// tracks per-episode dynamic regret against exact optima and the interval
// regret against the H-step value of each episode's optimal policy.
inline RunResult run_experiment(const DriftSequence& seq, LearnerContract& learner,
                                const HorizonConfig& cfg, std::uint64_t rng_seed,
                                const RunOptions& opts = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng env = make_stream(rng_seed, "env");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    detail::SegmentCache cache(seq, cfg);

    const std::uint64_t cap = opts.step_cap > 0
        ? opts.step_cap
        : 100ULL * static_cast<std::uint64_t>(cfg.H) * static_cast<std::uint64_t>(cfg.K);

    RunResult out;
    out.ledger.rows.reserve(static_cast<std::size_t>(seq.horizon_episodes));
    long long m = 0;
    double cum_regret = 0.0;
    double ring_regret = 0.0;

    for (long long k = 1; k <= seq.horizon_episodes; ++k) {
        const SspInstance& inst = seq.at(k);
        const detail::SegmentSolution& sol = cache.for_episode(k);
        const int goal = inst.goal();
        int state = 0;  // s_init
        double suffered = 0.0;
        std::uint64_t episode_steps = 0;
        long long intervals_this_episode = 0;

        while (state != goal) {
            ++m;
            ++intervals_this_episode;
            IntervalRecord rec;
            rec.m = m;
            rec.episode = k;
            rec.start_state = state;
            learner.on_interval_start(m, state);

            bool requested = false;
            long long h = 1;
            for (; h <= cfg.H; ++h) {
                int a = learner.choose_action(h, state);
                double mean = inst.cost_at(state, a);
                double c = opts.noise == CostNoise::Bernoulli
                               ? (unif(env) < mean ? 1.0 : 0.0)
                               : mean;
                int next = detail::sample_outcome(inst.row(state, a), inst.num_outcomes(), env);
                requested = learner.observe(h, state, a, c, next);
                suffered += c;
                rec.total_cost += c;
                if (opts.capture_steps) rec.steps.push_back({h, state, a, c, next});
                state = next;
                ++episode_steps;
                if (state == goal || requested) break;
            }
            rec.length = std::min(h, cfg.H);
            if (state == goal) {
                rec.end = EndReason::GoalReached;
            } else if (requested) {
                rec.end = EndReason::LearnerRequested;
            } else {
                rec.end = EndReason::HorizonHit;
            }
            rec.terminal_cost = state == goal ? 0.0 : cfg.terminal_cost_scale;
            rec.total_cost += rec.terminal_cost;
            ring_regret += rec.total_cost - sol.pi_star_layered.at(1, rec.start_state);
            learner.on_interval_end(rec);
            out.intervals.push_back(std::move(rec));

            if (episode_steps > cap) {
                throw StepCapExceeded("episode " + std::to_string(k) + " exceeded " +
                                      std::to_string(cap) + " steps");
            }
        }

        EpisodeRow row;
        row.episode = k;
        row.suffered = suffered;
        row.v_star = sol.v_star[0];
        cum_regret += suffered - row.v_star;
        row.cum_regret = cum_regret;
        row.intervals = m;
        row.learner = learner.stats();
        out.ledger.rows.push_back(row);
    }

    out.ledger.final_regret = cum_regret;
    out.ledger.interval_regret = ring_regret;
    out.ledger.total_intervals = m;
    out.ledger.wallclock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// Per-episode regret increments and the cumulative series.
struct RegretSeries {
    std::vector<double> increments;
    std::vector<double> cumulative;
    double total = 0.0;
};

inline RegretSeries dynamic_regret(const RegretLedger& ledger) {
    RegretSeries series;
    series.increments.reserve(ledger.rows.size());
    series.cumulative.reserve(ledger.rows.size());
    double prev = 0.0;
    for (const auto& row : ledger.rows) {
        series.increments.push_back(row.cum_regret - prev);
        series.cumulative.push_back(row.cum_regret);
        prev = row.cum_regret;
    }
    series.total = prev;
    return series;
}

}  // namespace nsslab
