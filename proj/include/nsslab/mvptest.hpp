#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>

#include "nsslab/mvp.hpp"

namespace nsslab {

struct MvpTestConfig {
    MvpConfig core;  // W_c/W_P here are the periodic reset windows
    double c1 = 0.0;          // cost correction coefficient
    double c2 = 0.0;          // transition correction coefficient
    double sample_prob = 1.0; // p, transition-reset probability under Test 3
    double t_star = 1.0;
    double kappa_c = 3.0;  // explicit multiplier standing in for the test-1 log factor
    double kappa_p = 3.0;  // same for test 2
    bool tests_enabled = true;
    bool force_eta_zero = false;

    // Published tuning: c1 = sqrt(B S A)/T, c2 = sqrt(S A)/T, p = 1/B, and
    // windows from the K-horizon budget inversion.
    static MvpTestConfig recommended(const MvpConfig& core, double t_star, double delta_c,
                                     double delta_p) {
        MvpTestConfig cfg;
        cfg.core = core;
        cfg.t_star = t_star;
        double sa = static_cast<double>(core.S) * core.A;
        cfg.c1 = std::sqrt(core.b_star * sa) / t_star;
        cfg.c2 = std::sqrt(sa) / t_star;
        cfg.sample_prob = 1.0 / core.b_star;
        cfg.core.W_c = window_from_budget(core.b_star * sa, static_cast<double>(core.K),
                                          delta_c, t_star);
        cfg.core.W_P = window_from_budget(sa, static_cast<double>(core.K), delta_p, t_star);
        return cfg;
    }
};

// Window accumulators feeding the two detection thresholds. The cost window
// spans intervals since the last cost reset, the transition window since the
// last transition reset.
struct CostWindowStats {
    double suffered = 0.0;     // window cost including terminal costs
    double ci_sum = 0.0;       // sum of sqrt(c_bar iota / M+) + iota / M+ over steps
    double rho_h_sum = 0.0;    // sum of H_m * rho^c_m over intervals
};

struct TransWindowStats {
    double suffered = 0.0;          // window cost including terminal costs
    double var_sum = 0.0;           // sum of Var(p_hat, V) over steps
    double sqrt_var_over_n = 0.0;   // sum of sqrt(Var / N+) over steps
    double eta_h_sum = 0.0;         // sum of H_m * eta_m over intervals
    long long l_c_window = 1;       // 1 + cost resets inside the window
    long long nu_p = 1;             // intervals since the transition reset
};

inline double threshold_chi_c(const CostWindowStats& w, double kappa_c) {
    return kappa_c * (std::sqrt(w.suffered) + w.ci_sum) + w.rho_h_sum;
}

inline double threshold_chi_p(const TransWindowStats& w, double kappa_p, int S, int A,
                              double b_star, long long H) {
    double bulk = std::sqrt(w.var_sum) + w.sqrt_var_over_n +
                  std::sqrt(static_cast<double>(S) * A *
                            (b_star + static_cast<double>(w.l_c_window)) * w.suffered) +
                  std::sqrt(b_star * S * A * static_cast<double>(w.nu_p)) +
                  std::pow(b_star, 2.5) * S * S * A * static_cast<double>(H) *
                      static_cast<double>(w.l_c_window);
    return kappa_p * bulk + 4.0 * w.eta_h_sum;
}

// Per-interval telemetry of the detection machinery.
struct MvpTestTelemetry {
    long long m = 0;
    long long nu_c = 0;
    long long nu_p = 0;
    double eta = 0.0;
    double chi_c_hat = 0.0;
    double chi_c_threshold = 0.0;
    double chi_p_hat = 0.0;
    double chi_p_threshold = 0.0;
    unsigned tests_fired = 0;  // bit 0 = test 1, bit 1 = test 2, bit 2 = test 3
};

// Optimistic learner with a cost correction term and three online
// non-stationarity tests. Cost statistics (C, M) and transition statistics
// (N, N(s,a,s')) keep independent reset lineages: ResetC clears the cost side
// and its window accumulators, ResetP the transition side.
class MvpWithTests : public LearnerContract {
public:
    explicit MvpWithTests(const MvpTestConfig& cfg, std::uint64_t rng_seed = 0)
        : cfg_(cfg), counters_(cfg.core.S, cfg.core.A),
          gen_(make_stream(rng_seed, "mvp-test")) {
        cfg_.core.widening = false;
        reset_cost_side(true);
        reset_trans_side(true);
        stats_ = {};  // initialization is not a reset event
        update_tables();
    }

    void on_interval_start(long long, int) override {}

    int choose_action(long long h, int state) override { return tables_.greedy_action(h, state); }

    bool observe(long long h, int state, int action, double cost, int next) override {
        std::size_t i = counters_.idx(state, action);
        counters_.add_cost(state, action, cost);
        counters_.add_transition(state, action, next);

        // detection statistics, all against the tables frozen at Update(m)
        chi_c_hat_ += cost - tables_.c_hat[i];
        const double* p = tables_.p_row(state, action);
        chi_p_hat_ += tables_.v_at(h + 1, next) - tables_.dot_v(h + 1, p);
        cost_window_.ci_sum += std::sqrt(tables_.c_bar[i] * tables_.iota / tables_.m_plus[i]) +
                               tables_.iota / tables_.m_plus[i];
        double var = tables_.variance_v(h + 1, p);
        trans_window_.var_sum += var;
        trans_window_.sqrt_var_over_n += std::sqrt(var / tables_.n_plus[i]);
        cost_window_.suffered += cost;
        trans_window_.suffered += cost;

        if (next == cfg_.core.S) return true;
        return is_power_of_two(counters_.cost_count[i]) ||
               is_power_of_two(counters_.trans_count[i]);
    }

    void on_interval_end(const IntervalRecord& rec) override {
        cost_window_.suffered += rec.terminal_cost;
        trans_window_.suffered += rec.terminal_cost;
        cost_window_.rho_h_sum += static_cast<double>(rec.length) * rho_c_;
        trans_window_.eta_h_sum += static_cast<double>(rec.length) * eta_;
        trans_window_.nu_p = nu_p_;

        MvpTestTelemetry tele;
        tele.m = m_;
        tele.nu_c = nu_c_;
        tele.nu_p = nu_p_;
        tele.eta = eta_;
        tele.chi_c_hat = chi_c_hat_;
        tele.chi_c_threshold = threshold_chi_c();
        tele.chi_p_hat = chi_p_hat_;
        tele.chi_p_threshold = threshold_chi_p();

        bool reset_c = false, reset_p = false;
        if (cfg_.tests_enabled && chi_c_hat_ > tele.chi_c_threshold) {
            tele.tests_fired |= 1u;
            ++stats_.tests1;
            reset_c = true;
        }
        if (cfg_.tests_enabled && chi_p_hat_ > tele.chi_p_threshold) {
            tele.tests_fired |= 2u;
            ++stats_.tests2;
            reset_c = reset_p = true;
        }
        if (nu_c_ == cfg_.core.W_c) reset_c = true;
        if (nu_p_ == cfg_.core.W_P) reset_c = reset_p = true;
        if (reset_c) reset_cost_side(false);
        if (reset_p) reset_trans_side(false);
        ++nu_c_;
        ++nu_p_;
        ++m_;
        update_tables();

        if (cfg_.tests_enabled && sup_norm_exceeds_half_bound()) {
            tele.tests_fired |= 4u;
            ++stats_.tests3;
            reset_cost_side(true);
            if (bernoulli_(gen_) < cfg_.sample_prob) reset_trans_side(true);
            update_tables();
        }
        // every transition reset is accompanied by a cost reset, so the cost
        // window can never be the older of the two
        if (nu_c_ > nu_p_) throw std::logic_error("reset lineage invariant violated");
        if (telemetry) telemetry(tele);
    }

    LearnerStats stats() const override { return stats_; }

    double threshold_chi_c() const { return nsslab::threshold_chi_c(cost_window_, cfg_.kappa_c); }
    double threshold_chi_p() const {
        TransWindowStats w = trans_window_;
        w.nu_p = nu_p_;
        return nsslab::threshold_chi_p(w, cfg_.kappa_p, cfg_.core.S, cfg_.core.A,
                                       cfg_.core.b_star, cfg_.core.H);
    }

    const ValueTables& tables() const { return tables_; }
    long long nu_c() const { return nu_c_; }
    long long nu_p() const { return nu_p_; }
    double eta() const { return eta_; }
    double rho_c() const { return rho_c_; }
    double rho_p() const { return rho_p_; }
    double chi_c_hat() const { return chi_c_hat_; }
    double chi_p_hat() const { return chi_p_hat_; }
    long long interval() const { return m_; }

    std::function<void(const MvpTestTelemetry&)> telemetry;

private:
    // after_increment: resets fired by test 3 land after the nu increments, so
    // the window clock restarts at 1 instead of 0.
    void reset_cost_side(bool after_increment) {
        nu_c_ = after_increment ? 1 : 0;
        chi_c_hat_ = 0.0;
        counters_.reset_cost();
        cost_window_ = CostWindowStats{};
        ++trans_window_.l_c_window;
        ++stats_.resets_c;
    }
    void reset_trans_side(bool after_increment) {
        nu_p_ = after_increment ? 1 : 0;
        chi_p_hat_ = 0.0;
        counters_.reset_transition();
        trans_window_ = TransWindowStats{};
        trans_window_.nu_p = nu_p_;
        ++stats_.resets_p;
    }

    void update_tables() {
        const double cap = 1.0 / (256.0 * static_cast<double>(cfg_.core.H));
        rho_c_ = std::min(cfg_.c1 / std::sqrt(static_cast<double>(std::max<long long>(1, nu_c_))),
                          cap);
        rho_p_ = std::min(cfg_.c2 / std::sqrt(static_cast<double>(std::max<long long>(1, nu_p_))),
                          cap);
        eta_ = cfg_.force_eta_zero ? 0.0 : rho_c_ + cfg_.core.value_bound() * rho_p_;
        tables_ = optimistic_update(counters_, cfg_.core, m_, 8.0 * eta_);
    }

    bool sup_norm_exceeds_half_bound() const {
        const double half = cfg_.core.value_bound() / 2.0;
        for (long long h = 1; h <= tables_.H; ++h) {
            for (int s = 0; s < tables_.S; ++s) {
                if (tables_.v_at(h, s) > half) return true;
            }
        }
        return false;
    }

    MvpTestConfig cfg_;
    Counters counters_;
    Rng gen_;
    std::uniform_real_distribution<double> bernoulli_{0.0, 1.0};
    ValueTables tables_;
    LearnerStats stats_;

    long long m_ = 1;
    long long nu_c_ = 1;
    long long nu_p_ = 1;
    double rho_c_ = 0.0, rho_p_ = 0.0, eta_ = 0.0;
    double chi_c_hat_ = 0.0, chi_p_hat_ = 0.0;
    CostWindowStats cost_window_;
    TransWindowStats trans_window_;
};

// Routes the first interval of every episode to one learner and all later
// intervals of the episode to another. Episode boundaries are inferred from
// interval end reasons, which is information the learner itself observes.
class TwoPhaseRouter : public LearnerContract {
public:
    TwoPhaseRouter(std::unique_ptr<LearnerContract> first_phase,
                   std::unique_ptr<LearnerContract> rest_phase)
        : first_(std::move(first_phase)), rest_(std::move(rest_phase)) {}

    void on_interval_start(long long, int state) override {
        use_first_ = next_starts_episode_;
        active_m_ = use_first_ ? ++m_first_ : ++m_rest_;
        active().on_interval_start(active_m_, state);
    }
    int choose_action(long long h, int state) override { return active().choose_action(h, state); }
    bool observe(long long h, int state, int action, double cost, int next) override {
        return active().observe(h, state, action, cost, next);
    }
    void on_interval_end(const IntervalRecord& rec) override {
        IntervalRecord local = rec;
        local.m = active_m_;
        active().on_interval_end(local);
        next_starts_episode_ = rec.end == EndReason::GoalReached;
    }
    LearnerStats stats() const override {
        LearnerStats a = first_->stats();
        LearnerStats b = rest_->stats();
        return {a.resets_c + b.resets_c, a.resets_p + b.resets_p,
                a.tests1 + b.tests1, a.tests2 + b.tests2, a.tests3 + b.tests3};
    }

    LearnerContract& first_phase() { return *first_; }
    LearnerContract& rest_phase() { return *rest_; }

private:
    LearnerContract& active() { return use_first_ ? *first_ : *rest_; }

    std::unique_ptr<LearnerContract> first_;
    std::unique_ptr<LearnerContract> rest_;
    bool next_starts_episode_ = true;
    bool use_first_ = true;
    long long m_first_ = 0;
    long long m_rest_ = 0;
    long long active_m_ = 0;
};

}  // namespace nsslab
