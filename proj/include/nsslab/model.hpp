#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace nsslab {

struct NonConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidSpec : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kRowSumTol = 1e-12;
constexpr double kValueIterTol = 1e-10;
constexpr long long kValueIterMaxIters = 1'000'000;

// One stationary goal-oriented instance. States are 0..S-1 with the goal as a
// virtual extra outcome at index S; transition rows span all S+1 outcomes.
// The initial state is index 0 by convention.
struct SspInstance {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> cost;   // S*A mean costs in [0,1]
    std::vector<double> trans;  // S*A*(S+1) probabilities, last outcome = goal

    SspInstance() = default;
    SspInstance(int s, int a)
        : num_states(s), num_actions(a),
          cost(static_cast<std::size_t>(s) * a, 0.0),
          trans(static_cast<std::size_t>(s) * a * (s + 1), 0.0) {}

    int goal() const { return num_states; }
    int num_outcomes() const { return num_states + 1; }

    double& cost_at(int s, int a) { return cost[static_cast<std::size_t>(s) * num_actions + a]; }
    double cost_at(int s, int a) const { return cost[static_cast<std::size_t>(s) * num_actions + a]; }

    double* row(int s, int a) {
        return trans.data() + (static_cast<std::size_t>(s) * num_actions + a) * num_outcomes();
    }
    const double* row(int s, int a) const {
        return trans.data() + (static_cast<std::size_t>(s) * num_actions + a) * num_outcomes();
    }

    bool operator==(const SspInstance& o) const {
        return num_states == o.num_states && num_actions == o.num_actions &&
               cost == o.cost && trans == o.trans;
    }
};

// Stationary (one action per state) or layered (one action per state per layer).
struct PolicyTable {
    int num_states = 0;
    int num_layers = 0;  // 0 means stationary
    std::vector<int> actions;

    static PolicyTable stationary(std::vector<int> acts) {
        PolicyTable p;
        p.num_states = static_cast<int>(acts.size());
        p.actions = std::move(acts);
        return p;
    }

    int at(int s) const { return actions[s]; }
    int at(int h, int s) const {
        return num_layers == 0 ? actions[s]
                               : actions[static_cast<std::size_t>(h - 1) * num_states + s];
    }
};

struct ValidationReport {
    std::vector<std::string> defects;
    bool ok() const { return defects.empty(); }
};

// Checks row sums, cost ranges, and that the goal is reachable from every
// state along positive-probability edges under some choice of actions.
inline ValidationReport validate_instance(const SspInstance& inst) {
    ValidationReport report;
    if (inst.num_states < 1 || inst.num_actions < 1) {
        report.defects.push_back("empty state or action space");
        return report;
    }
    for (int s = 0; s < inst.num_states; ++s) {
        for (int a = 0; a < inst.num_actions; ++a) {
            double c = inst.cost_at(s, a);
            if (!(c >= 0.0 && c <= 1.0)) {
                report.defects.push_back("cost out of [0,1] at (s=" + std::to_string(s) +
                                         ",a=" + std::to_string(a) + ")");
            }
            const double* p = inst.row(s, a);
            double sum = 0.0;
            bool negative = false;
            for (int o = 0; o < inst.num_outcomes(); ++o) {
                if (p[o] < 0.0) negative = true;
                sum += p[o];
            }
            if (negative) {
                report.defects.push_back("negative transition probability at (s=" +
                                         std::to_string(s) + ",a=" + std::to_string(a) + ")");
            }
            if (std::abs(sum - 1.0) > kRowSumTol) {
                report.defects.push_back("row sum " + std::to_string(sum) + " at (s=" +
                                         std::to_string(s) + ",a=" + std::to_string(a) + ")");
            }
        }
    }
    // Backward reachability from the goal over positive-probability edges.
    std::vector<char> reaches(inst.num_states, 0);
    std::deque<int> frontier;
    for (int s = 0; s < inst.num_states; ++s) {
        for (int a = 0; a < inst.num_actions && !reaches[s]; ++a) {
            if (inst.row(s, a)[inst.goal()] > 0.0) {
                reaches[s] = 1;
                frontier.push_back(s);
            }
        }
    }
    while (!frontier.empty()) {
        int t = frontier.front();
        frontier.pop_front();
        for (int s = 0; s < inst.num_states; ++s) {
            if (reaches[s]) continue;
            for (int a = 0; a < inst.num_actions; ++a) {
                if (inst.row(s, a)[t] > 0.0) {
                    reaches[s] = 1;
                    frontier.push_back(s);
                    break;
                }
            }
        }
    }
    for (int s = 0; s < inst.num_states; ++s) {
        if (!reaches[s]) {
            report.defects.push_back("goal unreachable from state " + std::to_string(s));
        }
    }
    return report;
}

struct SolveResult {
    std::vector<double> values;  // over states (goal excluded, implicitly 0)
    PolicyTable policy;
    long long iterations = 0;
};

// Value iteration for the optimal stationary values, fixed point of
// V(s) = min_a [ c(s,a) + sum_{s'} P(s'|s,a) V(s') ] with V(goal) = 0.
// Greedy ties break toward the lowest action index.
inline SolveResult ssp_optimal_values(const SspInstance& inst, double tol = kValueIterTol,
                                      long long max_iters = kValueIterMaxIters) {
    const int S = inst.num_states;
    const int A = inst.num_actions;
    std::vector<double> v(S, 0.0), next(S, 0.0);
    long long it = 0;
    for (; it < max_iters; ++it) {
        double change = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                const double* p = inst.row(s, a);
                double q = inst.cost_at(s, a);
                for (int o = 0; o < S; ++o) q += p[o] * v[o];
                best = std::min(best, q);
            }
            next[s] = best;
            change = std::max(change, std::abs(next[s] - v[s]));
        }
        v.swap(next);
        if (change <= tol) break;
    }
    if (it >= max_iters) {
        throw NonConvergence("ssp_optimal_values: no fixed point within iteration budget "
                             "(improper or near-improper instance)");
    }
    std::vector<int> acts(S, 0);
    for (int s = 0; s < S; ++s) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int a = 0; a < A; ++a) {
            const double* p = inst.row(s, a);
            double q = inst.cost_at(s, a);
            for (int o = 0; o < S; ++o) q += p[o] * v[o];
            if (q < best) {
                best = q;
                arg = a;
            }
        }
        acts[s] = arg;
    }
    SolveResult res;
    res.values = std::move(v);
    res.policy = PolicyTable::stationary(std::move(acts));
    res.iterations = it + 1;
    return res;
}

// Expected steps to goal under a stationary policy, T(s) = 1 + sum_{s'!=g} P T(s').
inline std::vector<double> policy_hitting_times(const SspInstance& inst, const PolicyTable& pi,
                                                double tol = kValueIterTol,
                                                long long max_iters = kValueIterMaxIters) {
    const int S = inst.num_states;
    std::vector<double> t(S, 0.0), next(S, 0.0);
    for (long long it = 0; it < max_iters; ++it) {
        double change = 0.0;
        for (int s = 0; s < S; ++s) {
            const double* p = inst.row(s, pi.at(s));
            double val = 1.0;
            for (int o = 0; o < S; ++o) val += p[o] * t[o];
            next[s] = val;
            change = std::max(change, std::abs(next[s] - t[s]));
        }
        t.swap(next);
        if (change <= tol) return t;
    }
    throw NonConvergence("policy_hitting_times: policy appears improper");
}

// Per-episode environment schedule, stored change-point compressed. Identical
// consecutive segments are merged on construction.
struct DriftSequence {
    long long horizon_episodes = 0;  // K
    struct Segment {
        long long start = 1;  // first episode covered, 1-based
        SspInstance instance;
    };
    std::vector<Segment> segments;

    void append_segment(long long start, SspInstance inst) {
        if (segments.empty()) {
            if (start != 1) throw InvalidSpec("first segment must start at episode 1");
        } else {
            if (start <= segments.back().start)
                throw InvalidSpec("segment starts must be strictly increasing");
            if (inst.num_states != segments.back().instance.num_states ||
                inst.num_actions != segments.back().instance.num_actions)
                throw InvalidSpec("all segments must share state and action counts");
            if (inst == segments.back().instance) return;  // merge
        }
        segments.push_back({start, std::move(inst)});
    }

    int num_states() const { return segments.front().instance.num_states; }
    int num_actions() const { return segments.front().instance.num_actions; }

    // Index of the segment covering episode k (1-based).
    std::size_t segment_index(long long k) const {
        std::size_t lo = 0, hi = segments.size();
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            if (segments[mid].start <= k) lo = mid; else hi = mid;
        }
        return lo;
    }
    const SspInstance& at(long long k) const { return segments[segment_index(k)].instance; }
};

struct DriftStats {
    double delta_c = 0.0;
    double delta_p = 0.0;
    long long num_pieces = 1;  // L
    double b_star = 1.0;
    double t_star = 0.0;
    double t_max = 0.0;
};

inline double sup_norm_cost_diff(const SspInstance& a, const SspInstance& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.cost.size(); ++i) d = std::max(d, std::abs(a.cost[i] - b.cost[i]));
    return d;
}

inline double max_row_l1_trans_diff(const SspInstance& a, const SspInstance& b) {
    double d = 0.0;
    const int n = a.num_outcomes();
    for (int s = 0; s < a.num_states; ++s) {
        for (int act = 0; act < a.num_actions; ++act) {
            const double* pa = a.row(s, act);
            const double* pb = b.row(s, act);
            double l1 = 0.0;
            for (int o = 0; o < n; ++o) l1 += std::abs(pa[o] - pb[o]);
            d = std::max(d, l1);
        }
    }
    return d;
}

// Drift budgets, piece count, and the scale parameters of a schedule. Costs
// and transitions only change at segment boundaries, so the per-episode sums
// collapse to sums over boundaries. b_star is floored at 1.
inline DriftStats drift_stats(const DriftSequence& seq, double tol = kValueIterTol) {
    DriftStats st;
    st.num_pieces = static_cast<long long>(seq.segments.size());
    for (std::size_t i = 0; i + 1 < seq.segments.size(); ++i) {
        if (seq.segments[i + 1].start > seq.horizon_episodes) break;
        st.delta_c += sup_norm_cost_diff(seq.segments[i].instance, seq.segments[i + 1].instance);
        st.delta_p += max_row_l1_trans_diff(seq.segments[i].instance, seq.segments[i + 1].instance);
    }
    double b = 0.0, ts = 0.0, tm = 0.0;
    for (const auto& seg : seq.segments) {
        SolveResult sol = ssp_optimal_values(seg.instance, tol);
        for (double v : sol.values) b = std::max(b, v);
        std::vector<double> hit = policy_hitting_times(seg.instance, sol.policy, tol);
        ts = std::max(ts, hit[0]);
        for (double t : hit) tm = std::max(tm, t);
    }
    st.b_star = std::max(b, 1.0);
    st.t_star = ts;
    st.t_max = tm;
    return st;
}

// Layered values over outcomes (goal included, always 0). Layer h runs 1..H+1.
struct LayeredValues {
    long long horizon = 0;  // H
    int num_outcomes = 0;
    std::vector<double> v;  // (H+1) * num_outcomes, layer-major

    double at(long long h, int s) const {
        return v[static_cast<std::size_t>(h - 1) * num_outcomes + s];
    }
    double& at(long long h, int s) {
        return v[static_cast<std::size_t>(h - 1) * num_outcomes + s];
    }
};

// Backward induction of the H-step value of a fixed policy with a terminal
// cost charged at layer H+1; V_h(goal) = 0 at every layer.
inline LayeredValues finite_horizon_policy_value(const SspInstance& inst, const PolicyTable& pi,
                                                 long long H,
                                                 const std::vector<double>& terminal_cost) {
    if (H < 1) throw InvalidSpec("finite_horizon_policy_value: H must be >= 1");
    const int S = inst.num_states;
    const int n = inst.num_outcomes();
    LayeredValues lv;
    lv.horizon = H;
    lv.num_outcomes = n;
    lv.v.assign(static_cast<std::size_t>(H + 1) * n, 0.0);
    for (int s = 0; s < S; ++s) lv.at(H + 1, s) = terminal_cost[s];
    lv.at(H + 1, inst.goal()) = 0.0;
    for (long long h = H; h >= 1; --h) {
        for (int s = 0; s < S; ++s) {
            int a = pi.at(static_cast<int>(h), s);
            const double* p = inst.row(s, a);
            double val = inst.cost_at(s, a);
            for (int o = 0; o < n; ++o) val += p[o] * lv.at(h + 1, o);
            lv.at(h, s) = val;
        }
        lv.at(h, inst.goal()) = 0.0;
    }
    return lv;
}

// Same recursion with a min over actions per layer.
inline LayeredValues finite_horizon_optimal_value(const SspInstance& inst, long long H,
                                                  const std::vector<double>& terminal_cost) {
    if (H < 1) throw InvalidSpec("finite_horizon_optimal_value: H must be >= 1");
    const int S = inst.num_states;
    const int A = inst.num_actions;
    const int n = inst.num_outcomes();
    LayeredValues lv;
    lv.horizon = H;
    lv.num_outcomes = n;
    lv.v.assign(static_cast<std::size_t>(H + 1) * n, 0.0);
    for (int s = 0; s < S; ++s) lv.at(H + 1, s) = terminal_cost[s];
    lv.at(H + 1, inst.goal()) = 0.0;
    for (long long h = H; h >= 1; --h) {
        for (int s = 0; s < S; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                const double* p = inst.row(s, a);
                double q = inst.cost_at(s, a);
                for (int o = 0; o < n; ++o) q += p[o] * lv.at(h + 1, o);
                best = std::min(best, q);
            }
            lv.at(h, s) = best;
        }
        lv.at(h, inst.goal()) = 0.0;
    }
    return lv;
}

inline std::vector<double> terminal_cost_vector(int num_states, double scale) {
    return std::vector<double>(num_states, scale);
}

// --- JSON schema: {K, segments:[{start, cost:[[..]], trans:[[[..]]]}]} ---

inline nlohmann::json to_json(const SspInstance& inst) {
    nlohmann::json jc = nlohmann::json::array();
    nlohmann::json jt = nlohmann::json::array();
    for (int s = 0; s < inst.num_states; ++s) {
        nlohmann::json rowc = nlohmann::json::array();
        nlohmann::json rowt = nlohmann::json::array();
        for (int a = 0; a < inst.num_actions; ++a) {
            rowc.push_back(inst.cost_at(s, a));
            nlohmann::json probs = nlohmann::json::array();
            const double* p = inst.row(s, a);
            for (int o = 0; o < inst.num_outcomes(); ++o) probs.push_back(p[o]);
            rowt.push_back(std::move(probs));
        }
        jc.push_back(std::move(rowc));
        jt.push_back(std::move(rowt));
    }
    return nlohmann::json{{"cost", std::move(jc)}, {"trans", std::move(jt)}};
}

inline SspInstance instance_from_json(const nlohmann::json& j) {
    const auto& jc = j.at("cost");
    const auto& jt = j.at("trans");
    int S = static_cast<int>(jc.size());
    if (S < 1) throw IoError("instance json: empty cost table");
    int A = static_cast<int>(jc.at(0).size());
    SspInstance inst(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            inst.cost_at(s, a) = jc.at(s).at(a).get<double>();
            const auto& probs = jt.at(s).at(a);
            if (static_cast<int>(probs.size()) != S + 1)
                throw IoError("instance json: transition row has wrong arity");
            for (int o = 0; o <= S; ++o) inst.row(s, a)[o] = probs.at(o).get<double>();
        }
    }
    return inst;
}

inline nlohmann::json to_json(const DriftSequence& seq) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& seg : seq.segments) {
        nlohmann::json js = to_json(seg.instance);
        js["start"] = seg.start;
        segs.push_back(std::move(js));
    }
    return nlohmann::json{{"K", seq.horizon_episodes}, {"segments", std::move(segs)}};
}

inline DriftSequence sequence_from_json(const nlohmann::json& j) {
    DriftSequence seq;
    seq.horizon_episodes = j.at("K").get<long long>();
    for (const auto& js : j.at("segments")) {
        seq.append_segment(js.at("start").get<long long>(), instance_from_json(js));
    }
    if (seq.segments.empty()) throw IoError("sequence json: no segments");
    return seq;
}

}  // namespace nsslab
