#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "nsslab/mvp.hpp"

namespace nsslab {

// Regret envelope R(m) = min{c1 sqrt(m) + c2, c3 m} assumed of a base
// algorithm in a near-stationary stretch, with r(m) = R(m)/m its density and
// c4 a bound on the base's per-interval prediction.
struct BaseRunGuarantee {
    double c1 = 1.0;
    double c2 = 0.0;
    double c3 = 1.0;
    double c4 = 1.0;

    double envelope(double m) const { return std::min(c1 * std::sqrt(m) + c2, c3 * m); }
    double density(double m) const { return envelope(m) / m; }

    void check() const {
        if (c3 < 1.0) throw InvalidSpec("base envelope: need c3 >= 1");
        if (c4 > c3) throw InvalidSpec("base envelope: need c4 <= c3");
        if (c1 < 1.0) throw InvalidSpec("base envelope: need c1 >= 1 so r(m) >= 1/sqrt(m)");
    }

    // Envelope of the synchronized-estimation base learner, scaled by a single
    // calibration multiplier.
    static BaseRunGuarantee mvp_base(double kappa, double b_star, int S, int A, long long H) {
        BaseRunGuarantee g;
        g.c1 = kappa * b_star * S * std::sqrt(static_cast<double>(A));
        g.c2 = kappa * b_star * S * S * A;
        g.c3 = static_cast<double>(H);
        g.c4 = kappa * b_star;
        g.check();
        return g;
    }
};

// A base algorithm schedulable by the multi-scale machinery: a learner that
// additionally outputs a per-interval prediction of its incurred cost and may
// terminate itself.
class BaseLearner : public LearnerContract {
public:
    virtual double prediction() const = 0;  // f~ for the interval in progress
    virtual bool terminated() const = 0;
};

struct MvpBaseConfig {
    MvpConfig core;
    double t_star = 1.0;
    double kappa_b = 3.0;  // multiplier in the termination threshold
    bool tests_enabled = true;
};

// Synchronized-estimation optimistic base learner: one correction term
// eta = min{B S sqrt(A) / (T sqrt(m)), 1/(2^8 H)} added to the cost, a single
// accumulated prediction-error statistic, and two termination tests. Counters
// are never reset; on a failed test the instance terminates and the caller
// (the scheduler) reacts.
class MvpBase : public BaseLearner {
public:
    explicit MvpBase(const MvpBaseConfig& cfg) : cfg_(cfg), counters_(cfg.core.S, cfg.core.A) {
        cfg_.core.widening = false;
        cfg_.core.W_c = kWindowCap;
        cfg_.core.W_P = kWindowCap;
        update_tables();
    }

    void on_interval_start(long long, int start_state) override {
        prediction_ = tables_.v_at(1, start_state);
    }

    int choose_action(long long h, int state) override { return tables_.greedy_action(h, state); }

    bool observe(long long, int state, int action, double cost, int next) override {
        std::size_t i = counters_.idx(state, action);
        counters_.add_cost(state, action, cost);
        counters_.add_transition(state, action, next);
        if (next == cfg_.core.S) return true;
        return is_power_of_two(counters_.cost_count[i]) ||
               is_power_of_two(counters_.trans_count[i]);
    }

    void on_interval_end(const IntervalRecord& rec) override {
        if (terminated_) return;
        chi_hat_ += rec.total_cost - prediction_;
        if (cfg_.tests_enabled && chi_hat_ > threshold(m_)) {
            terminated_ = true;  // test 1
            return;
        }
        ++m_;
        update_tables();
        if (cfg_.tests_enabled && sup_norm_exceeds_half_bound()) {
            terminated_ = true;  // test 2
        }
    }

    double prediction() const override { return prediction_; }
    bool terminated() const override { return terminated_; }

    double threshold(long long m) const {
        double S = cfg_.core.S, A = cfg_.core.A, B = cfg_.core.b_star;
        return cfg_.kappa_b * (B * S * std::sqrt(A * static_cast<double>(m)) + B * S * S * A);
    }

    const ValueTables& tables() const { return tables_; }
    double chi_hat() const { return chi_hat_; }
    long long interval() const { return m_; }

private:
    void update_tables() {
        double cap = 1.0 / (256.0 * static_cast<double>(cfg_.core.H));
        double S = cfg_.core.S, A = cfg_.core.A;
        eta_ = std::min(cfg_.core.b_star * S * std::sqrt(A) /
                            (cfg_.t_star * std::sqrt(static_cast<double>(m_))),
                        cap);
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

    MvpBaseConfig cfg_;
    Counters counters_;
    ValueTables tables_;
    double eta_ = 0.0;
    double chi_hat_ = 0.0;
    double prediction_ = 0.0;
    long long m_ = 1;
    bool terminated_ = false;
};

// The plain optimistic learner as a schedulable base: no restarts, keeps its
// widening bias, predicts its own first-layer value, never terminates.
class MvpSspBase : public BaseLearner {
public:
    explicit MvpSspBase(const MvpConfig& core) : inner_(frozen_windows(core)) {}

    void on_interval_start(long long m, int state) override {
        prediction_ = inner_.tables().v_at(1, state);
        inner_.on_interval_start(m, state);
    }
    int choose_action(long long h, int state) override { return inner_.choose_action(h, state); }
    bool observe(long long h, int state, int action, double cost, int next) override {
        return inner_.observe(h, state, action, cost, next);
    }
    void on_interval_end(const IntervalRecord& rec) override { inner_.on_interval_end(rec); }
    double prediction() const override { return prediction_; }
    bool terminated() const override { return false; }

private:
    static MvpConfig frozen_windows(MvpConfig cfg) {
        cfg.W_c = kWindowCap;
        cfg.W_P = kWindowCap;
        return cfg;
    }
    NonStationaryMvp inner_;
    double prediction_ = 0.0;
};

// One scheduled base-algorithm slot of the multi-scale scheduler.
struct MalgSlot {
    int order = 0;         // l, slot length 2^l
    long long start = 0;   // block-local, 1-based
    long long end = 0;
    std::unique_ptr<BaseLearner> instance;
    long long local_m = 0;
};

// Draws the multi-scale schedule for a block of order n: for every order
// l = 0..n and every aligned offset, a slot is created with probability
// r(2^n)/r(2^l); the full-block slot always exists.
inline std::vector<MalgSlot> malg_schedule(int order_n, const BaseRunGuarantee& envelope, Rng& gen,
                                           bool top_only = false) {
    std::vector<MalgSlot> slots;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double r_n = envelope.density(std::pow(2.0, order_n));
    for (int l = 0; l <= order_n; ++l) {
        const long long len = 1LL << l;
        const double prob = l == order_n ? 1.0 : r_n / envelope.density(static_cast<double>(len));
        for (long long start = 1; start + len - 1 <= (1LL << order_n); start += len) {
            bool take = l == order_n || (!top_only && unif(gen) < prob);
            if (take) {
                MalgSlot slot;
                slot.order = l;
                slot.start = start;
                slot.end = start + len - 1;
                slots.push_back(std::move(slot));
            }
        }
    }
    return slots;
}

struct MasterTelemetry {
    long long m = 0;         // interval index as seen by this learner
    long long epoch = 0;
    int block_order = 0;
    int active_order = 0;
    double g_tilde = 0.0;
    double u_top = 0.0;      // U^l at the block order
    bool test1_fired = false;
    bool test2_fired = false;
    bool base_terminated = false;
};

struct MasterConfig {
    BaseRunGuarantee envelope;
    double delta = 0.1;
    // test-only hooks: start the first block of every epoch at this order, and
    // optionally suppress all sub-slots so only the full-block base runs
    int initial_order = 0;
    bool force_top_only = false;
};

// Doubling blocks of multi-scale base schedules plus running-average
// non-stationarity detection. Within a block, running averages of the active
// predictions are kept at every dyadic window size; Test 1 compares each
// finished slot's average cost against the best matching-scale average, and
// Test 2 compares the block's accumulated cost against its predictions. Any
// failure, or a base terminating, restarts the epoch from order zero.
class Master : public LearnerContract {
public:
    using BaseFactory = std::function<std::unique_ptr<BaseLearner>()>;

    Master(const MasterConfig& cfg, BaseFactory factory, std::uint64_t rng_seed)
        : cfg_(cfg), factory_(std::move(factory)), gen_(make_stream(rng_seed, "master")) {
        cfg_.envelope.check();
        begin_epoch(1);
    }

    void on_interval_start(long long, int state) override {
        ++m_total_;
        if (restart_pending_) {
            ++restarts_;
            begin_epoch(m_total_);
        } else if (m_total_ == block_start_ + (1LL << block_order_)) {
            begin_block(block_order_ + 1, m_total_);
        }
        const long long j = m_total_ - block_start_ + 1;
        active_ = find_active(j);
        if (!active_->instance) active_->instance = factory_();
        active_->instance->on_interval_start(++active_->local_m, state);
        g_current_ = active_->instance->prediction();
    }

    int choose_action(long long h, int state) override {
        return active_->instance->choose_action(h, state);
    }
    bool observe(long long h, int state, int action, double cost, int next) override {
        return active_->instance->observe(h, state, action, cost, next);
    }

    void on_interval_end(const IntervalRecord& rec) override {
        IntervalRecord local = rec;
        local.m = active_->local_m;
        active_->instance->on_interval_end(local);
        bool base_terminated = active_->instance->terminated();
        if (base_terminated) ++base_terminations_;

        const long long j = m_total_ - block_start_ + 1;
        g_prefix_.push_back(g_prefix_.back() + g_current_);
        c_prefix_.push_back(c_prefix_.back() + rec.total_cost);
        for (int l = 0; l <= block_order_; ++l) {
            const long long len = 1LL << l;
            if (j >= len) {
                double avg = (g_prefix_[j] - g_prefix_[j - len]) / static_cast<double>(len);
                u_[l] = std::max(u_[l], avg);
            }
        }

        MasterTelemetry tele;
        tele.m = m_total_;
        tele.epoch = epoch_;
        tele.block_order = block_order_;
        tele.active_order = active_->order;
        tele.g_tilde = g_current_;
        tele.u_top = u_[block_order_];
        tele.base_terminated = base_terminated;

        // test 1 at every slot end: a finished slot whose average cost sits
        // far below the best matching-scale running average of predictions
        // signals that the environment has drifted
        for (const auto& slot : slots_) {
            if (slot.end != j) continue;
            const long long len = 1LL << slot.order;
            double mean_cost =
                (c_prefix_[j] - c_prefix_[slot.start - 1]) / static_cast<double>(len);
            if (mean_cost <= u_[slot.order] - 9.0 * r_hat(static_cast<double>(len))) {
                tele.test1_fired = true;
            }
        }
        // test 2 every interval on the block-cumulative prediction error
        double err = (c_prefix_[j] - g_prefix_[j]) / static_cast<double>(j);
        if (err >= 3.0 * r_hat(static_cast<double>(j))) tele.test2_fired = true;

        if (tele.test1_fired) ++test1_fires_;
        if (tele.test2_fired) ++test2_fires_;
        if (tele.test1_fired || tele.test2_fired || base_terminated) restart_pending_ = true;

        release_finished_slots(j);
        if (telemetry) telemetry(tele);
    }

    LearnerStats stats() const override {
        LearnerStats st;
        st.resets_c = restarts_;
        st.resets_p = restarts_;
        st.tests1 = test1_fires_;
        st.tests2 = test2_fires_;
        st.tests3 = base_terminations_;
        return st;
    }

    long long restarts() const { return restarts_; }
    long long epoch() const { return epoch_; }
    int block_order() const { return block_order_; }
    const std::vector<MalgSlot>& slots() const { return slots_; }
    const std::vector<double>& u_levels() const { return u_; }
    const std::vector<double>& prediction_prefix() const { return g_prefix_; }

    // r-hat: the inflated density used by both tests, tied to the planned end
    // of the current block.
    double r_hat(double m) const {
        double planned_end = static_cast<double>(block_start_ + (1LL << block_order_) - 1);
        double n_hat = std::log2(std::max(2.0, planned_end)) + 1.0;
        double inflate = 1024.0 * n_hat * std::log(2.0 * planned_end / cfg_.delta);
        return inflate * cfg_.envelope.envelope(m) / m;
    }

    std::function<void(const MasterTelemetry&)> telemetry;

private:
    void begin_epoch(long long first_interval) {
        ++epoch_;
        restart_pending_ = false;
        begin_block(cfg_.initial_order, first_interval);
    }

    void begin_block(int order, long long first_interval) {
        block_order_ = order;
        block_start_ = first_interval;
        slots_ = malg_schedule(order, cfg_.envelope, gen_, cfg_.force_top_only);
        g_prefix_.assign(1, 0.0);
        c_prefix_.assign(1, 0.0);
        u_.assign(static_cast<std::size_t>(order) + 1, 0.0);
    }

    MalgSlot* find_active(long long j) {
        MalgSlot* best = nullptr;
        for (auto& slot : slots_) {
            if (slot.start <= j && j <= slot.end) {
                if (!best || slot.order < best->order) best = &slot;
            }
        }
        if (!best) throw std::logic_error("no scheduled base covers the interval");
        return best;
    }

    void release_finished_slots(long long j) {
        for (auto& slot : slots_) {
            if (slot.end <= j && slot.instance) slot.instance.reset();
        }
    }

    MasterConfig cfg_;
    BaseFactory factory_;
    Rng gen_;

    long long m_total_ = 0;   // intervals seen by this learner
    long long epoch_ = 0;
    int block_order_ = 0;
    long long block_start_ = 1;  // m_total_ value of the block's first interval
    bool restart_pending_ = false;

    std::vector<MalgSlot> slots_;
    MalgSlot* active_ = nullptr;
    double g_current_ = 0.0;
    std::vector<double> g_prefix_;  // block-local prefix sums of predictions
    std::vector<double> c_prefix_;  // block-local prefix sums of suffered cost
    std::vector<double> u_;         // U^l running maxima

    long long restarts_ = 0;
    long long test1_fires_ = 0;
    long long test2_fires_ = 0;
    long long base_terminations_ = 0;
};

}  // namespace nsslab
