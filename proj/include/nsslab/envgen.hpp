#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "nsslab/model.hpp"
#include "nsslab/rng.hpp"

namespace nsslab {

// Hard-instance family parameters. N plays the role of the state-action count
// in the construction; the good indices select which arm has the lower cost
// mean (i_good) and which has the boosted goal probability (j_good). Index 0
// means "no good arm".
struct LowerBoundSpec {
    int n_arms = 10;        // N
    double b_star = 1.0;
    double t_star = 3.0;
    long long episodes = 0;  // K used inside the epsilon formulas
    int good_cost_index = 0;   // i* in {0..N}
    int good_trans_index = 0;  // j* in {0..N}

    void check() const {
        if (b_star < 1.0) throw InvalidSpec("lower bound spec: need b_star >= 1");
        if (t_star < 3.0 * b_star) throw InvalidSpec("lower bound spec: need t_star >= 3*b_star");
        if (n_arms < 10) throw InvalidSpec("lower bound spec: need N >= 10");
        if (episodes < n_arms) throw InvalidSpec("lower bound spec: need K >= N");
        if (good_cost_index < 0 || good_cost_index > n_arms ||
            good_trans_index < 0 || good_trans_index > n_arms)
            throw InvalidSpec("lower bound spec: good index out of range");
    }
};

inline double epsilon_cost(int n_arms, double b_star, long long episodes) {
    return (1.0 - 1.0 / n_arms) / 4.0 *
           std::sqrt(static_cast<double>(n_arms) * b_star / static_cast<double>(episodes));
}

inline double epsilon_trans(int n_arms, long long episodes) {
    return (1.0 - 1.0 / n_arms) / 4.0 *
           std::sqrt(static_cast<double>(n_arms) / static_cast<double>(episodes));
}

// N+1 states: the initial hub (index 0) and arms s_1..s_N. At the hub, action
// a_i moves deterministically to arm i at zero cost. At an arm there is a
// single real action with mean cost (b_star + eps_c * 1{i != i_good})/t_star
// and goal probability (1 + eps_p * 1{i == j_good})/t_star, self-loop
// otherwise. All arm rows are replicated across the action axis so the table
// stays rectangular.
inline SspInstance make_lower_bound_instance(const LowerBoundSpec& spec) {
    spec.check();
    const int N = spec.n_arms;
    const double eps_c = epsilon_cost(N, spec.b_star, spec.episodes);
    const double eps_p = epsilon_trans(N, spec.episodes);
    if ((spec.b_star + eps_c) / spec.t_star > 1.0)
        throw InvalidSpec("lower bound spec: cost mean would exceed 1");

    SspInstance inst(N + 1, N);
    for (int a = 0; a < N; ++a) {
        inst.cost_at(0, a) = 0.0;
        inst.row(0, a)[a + 1] = 1.0;  // hub action a_i -> arm i
    }
    for (int i = 1; i <= N; ++i) {
        double c = (spec.b_star + (i != spec.good_cost_index ? eps_c : 0.0)) / spec.t_star;
        double pg = (1.0 + (i == spec.good_trans_index ? eps_p : 0.0)) / spec.t_star;
        for (int a = 0; a < N; ++a) {
            inst.cost_at(i, a) = c;
            inst.row(i, a)[inst.goal()] = pg;
            inst.row(i, a)[i] = 1.0 - pg;
        }
    }
    return inst;
}

namespace detail {
inline long long round_epoch_count(double value) {
    long long r = static_cast<long long>(std::llround(value));
    return std::max<long long>(1, r);
}
}  // namespace detail

// Piecewise-stationary schedule: a block of cost-perturbed epochs followed by
// a block of transition-perturbed epochs. Epoch counts follow the budget
// inversion L_c = (4*dc*T/(1-1/N))^{2/3} (K/(2 N B))^{1/3} and the transition
// analogue; a zero budget clamps the block to one epoch with no good arm.
// Epoch lengths are floored, remainder episodes go to the final epoch.
inline DriftSequence make_hard_sequence(double b_star, double t_star, int n_arms, long long K,
                                        double delta_c_budget, double delta_p_budget,
                                        std::uint64_t rng_seed) {
    if (K < 2) throw InvalidSpec("make_hard_sequence: need K >= 2");
    if (delta_c_budget < 0 || delta_p_budget < 0)
        throw InvalidSpec("make_hard_sequence: negative budget");
    const double shape = 1.0 - 1.0 / n_arms;

    long long L_c = 1, L_p = 1;
    if (delta_c_budget > 0) {
        L_c = detail::round_epoch_count(
            std::pow(4.0 * delta_c_budget * t_star / shape, 2.0 / 3.0) *
            std::cbrt(static_cast<double>(K) / (2.0 * n_arms * b_star)));
    }
    if (delta_p_budget > 0) {
        L_p = detail::round_epoch_count(
            std::pow(2.0 * delta_p_budget * t_star / shape, 2.0 / 3.0) *
            std::cbrt(static_cast<double>(K) / (2.0 * n_arms)));
    }
    L_c = std::min(L_c, K / 2);
    L_p = std::min(L_p, K - K / 2);
    if (L_c < 1 || L_p < 1) throw InvalidSpec("make_hard_sequence: K too small for budgets");

    const long long cost_block = K / 2;
    const long long trans_block = K - cost_block;
    const long long len_c = cost_block / L_c;
    const long long len_p = trans_block / L_p;
    if (len_c < 1 || len_p < 1) throw InvalidSpec("make_hard_sequence: epochs would be empty");

    // The nominal per-epoch episode count K/(2L) feeds the epsilon formulas.
    const long long eps_k_c = std::max<long long>(n_arms, K / (2 * L_c));
    const long long eps_k_p = std::max<long long>(n_arms, K / (2 * L_p));

    Rng gen = make_stream(rng_seed, "hard-sequence");
    std::uniform_int_distribution<int> pick(1, n_arms);

    DriftSequence seq;
    seq.horizon_episodes = K;
    long long start = 1;
    for (long long e = 0; e < L_c; ++e) {
        LowerBoundSpec spec;
        spec.n_arms = n_arms;
        spec.b_star = b_star;
        spec.t_star = t_star;
        spec.episodes = eps_k_c;
        spec.good_cost_index = delta_c_budget > 0 ? pick(gen) : 0;
        spec.good_trans_index = 0;
        seq.append_segment(start, make_lower_bound_instance(spec));
        start += len_c;
    }
    start = cost_block + 1;
    for (long long e = 0; e < L_p; ++e) {
        LowerBoundSpec spec;
        spec.n_arms = n_arms;
        spec.b_star = b_star;
        spec.t_star = t_star;
        spec.episodes = eps_k_p;
        spec.good_cost_index = 0;
        spec.good_trans_index = delta_p_budget > 0 ? pick(gen) : 0;
        seq.append_segment(start, make_lower_bound_instance(spec));
        start += len_p;
    }
    return seq;
}

// Two-segment schedule around the single-state example: base instance
// (c = B/T, p_g = 1/T) followed by (c + dc, p_g - dp/2). The switch happens
// after episode floor(K/2).
inline DriftSequence make_perturbation_pair(double b_star, double t_star, double dc, double dp,
                                            long long K = 2) {
    if (b_star < 1.0 || t_star < b_star)
        throw InvalidSpec("perturbation pair: need 1 <= b_star <= t_star");
    if (std::max(dc, dp) > 1.0 / t_star)
        throw InvalidSpec("perturbation pair: need max(dc,dp) <= 1/t_star");
    if (dc < 0 || dp < 0) throw InvalidSpec("perturbation pair: negative perturbation");
    if (K < 2) throw InvalidSpec("perturbation pair: need K >= 2");

    auto single = [](double c, double pg) {
        SspInstance inst(1, 1);
        inst.cost_at(0, 0) = c;
        inst.row(0, 0)[1] = pg;
        inst.row(0, 0)[0] = 1.0 - pg;
        return inst;
    };
    DriftSequence seq;
    seq.horizon_episodes = K;
    seq.append_segment(1, single(b_star / t_star, 1.0 / t_star));
    seq.append_segment(K / 2 + 1, single(b_star / t_star + dc, 1.0 / t_star - dp / 2.0));
    return seq;
}

// Random proper instance: Dirichlet(1,..,1) rows reshaped so every action has
// goal probability at least goal_prob_floor, uniform costs.
inline SspInstance make_random_proper(int num_states, int num_actions, double goal_prob_floor,
                                      std::uint64_t rng_seed) {
    if (goal_prob_floor <= 0.0 || goal_prob_floor > 1.0)
        throw InvalidSpec("make_random_proper: goal_prob_floor must be in (0,1]");
    Rng gen = make_stream(rng_seed, "random-proper");
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    SspInstance inst(num_states, num_actions);
    const int n = inst.num_outcomes();
    std::vector<double> raw(n);
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            double sum = 0.0;
            for (int o = 0; o < n; ++o) {
                raw[o] = expo(gen);
                sum += raw[o];
            }
            double pg = raw[n - 1] / sum;
            double new_pg = goal_prob_floor + (1.0 - goal_prob_floor) * pg;
            double rest = sum - raw[n - 1];
            double* row = inst.row(s, a);
            for (int o = 0; o < n - 1; ++o) {
                row[o] = rest > 0.0 ? raw[o] / rest * (1.0 - new_pg) : 0.0;
            }
            if (rest <= 0.0) new_pg = 1.0;
            row[n - 1] = new_pg;
            // renormalize exactly against accumulated rounding
            double total = 0.0;
            for (int o = 0; o < n; ++o) total += row[o];
            for (int o = 0; o < n; ++o) row[o] /= total;
            inst.cost_at(s, a) = unif(gen);
        }
    }
    return inst;
}

inline DriftSequence stationary_sequence(SspInstance inst, long long K) {
    DriftSequence seq;
    seq.horizon_episodes = K;
    seq.append_segment(1, std::move(inst));
    return seq;
}

}  // namespace nsslab
