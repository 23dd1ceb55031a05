#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "nsslab/baselines.hpp"
#include "nsslab/envgen.hpp"
#include "nsslab/master.hpp"
#include "nsslab/mvptest.hpp"

namespace nsslab {

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr const char* kCsvHeader =
    "nsslab-v1,k,cost,vstar,regret,intervals,resets_c,resets_p,t1,t2,t3";

inline std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

inline std::string serialize_ledger_csv(const RegretLedger& ledger) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& row : ledger.rows) {
        out += std::to_string(row.episode);
        out += ',' + format_double(row.suffered);
        out += ',' + format_double(row.v_star);
        out += ',' + format_double(row.cum_regret);
        out += ',' + std::to_string(row.intervals);
        out += ',' + std::to_string(row.learner.resets_c);
        out += ',' + std::to_string(row.learner.resets_p);
        out += ',' + std::to_string(row.learner.tests1);
        out += ',' + std::to_string(row.learner.tests2);
        out += ',' + std::to_string(row.learner.tests3);
        out += '\n';
    }
    return out;
}

inline RegretLedger parse_ledger_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw IoError("ledger csv: missing or unknown header");
    }
    RegretLedger ledger;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        EpisodeRow row;
        auto next = [&]() -> std::string {
            if (!std::getline(ss, field, ',')) throw IoError("ledger csv: short row");
            return field;
        };
        row.episode = std::stoll(next());
        row.suffered = std::stod(next());
        row.v_star = std::stod(next());
        row.cum_regret = std::stod(next());
        row.intervals = std::stoll(next());
        row.learner.resets_c = std::stoll(next());
        row.learner.resets_p = std::stoll(next());
        row.learner.tests1 = std::stoll(next());
        row.learner.tests2 = std::stoll(next());
        row.learner.tests3 = std::stoll(next());
        ledger.rows.push_back(row);
    }
    if (!ledger.rows.empty()) {
        ledger.final_regret = ledger.rows.back().cum_regret;
        ledger.total_intervals = ledger.rows.back().intervals;
    }
    return ledger;
}

inline RegretLedger load_ledger(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ledger " + path);
    return parse_ledger_csv(in);
}

inline bool rows_equal(const RegretLedger& a, const RegretLedger& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const auto& x = a.rows[i];
        const auto& y = b.rows[i];
        if (x.episode != y.episode || x.suffered != y.suffered || x.v_star != y.v_star ||
            x.cum_regret != y.cum_regret || x.intervals != y.intervals ||
            x.learner.resets_c != y.learner.resets_c ||
            x.learner.resets_p != y.learner.resets_p || x.learner.tests1 != y.learner.tests1 ||
            x.learner.tests2 != y.learner.tests2 || x.learner.tests3 != y.learner.tests3)
            return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// experiment configuration

struct ExperimentConfig {
    // instance: either a preset with parameters or a path to a sequence file
    std::string preset;  // lb-cost | lb-trans | lb-mixed | pair | random | "" (path)
    std::string instance_path;
    double b_star = 2.0;
    double t_star = 10.0;
    int n_arms = 10;
    double dc = 0.0;
    double dp = 0.0;
    int s_states = 3;
    int a_actions = 2;
    double goal_floor = 0.25;
    std::uint64_t gen_seed = 1;

    std::string algorithm = "mvp-test";
    long long K = 1000;
    double delta = 0.1;
    std::vector<std::uint64_t> seeds{1};
    double kappa_c = 3.0;
    double kappa_p = 3.0;
    double kappa_b = 4.0;  // chosen by the stationary false-alarm calibration
    double kappa_master = 1.0;
    double iota_scale = 1.0;
    std::string cost_noise = "bernoulli";
    std::uint64_t step_cap = 0;
    long long w_c_override = 0;  // 0 = derive
    long long w_p_override = 0;
    bool telemetry = false;
    bool capture_trajectories = false;
    std::string out = "nsslab-run";

    void validate() const {
        if (K < 1) throw InvalidSpec("config: K must be >= 1");
        if (!(delta > 0.0 && delta < 1.0)) throw InvalidSpec("config: delta must be in (0,1)");
        if (seeds.empty()) throw InvalidSpec("config: need at least one seed");
        static const char* known[] = {"ns-mvp",     "ns-mvp-doubling", "mvp-test",
                                      "two-phase",  "master-mvp",      "master-two-phase",
                                      "uniform-random", "fixed-optimal-first"};
        bool ok = false;
        for (const char* name : known) ok |= algorithm == name;
        if (!ok) throw InvalidSpec("config: unknown algorithm '" + algorithm + "'");
    }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    if (!c.instance_path.empty()) {
        j["instance"] = {{"path", c.instance_path}};
    } else {
        j["instance"] = {{"preset", c.preset},
                         {"b_star", c.b_star},
                         {"t_star", c.t_star},
                         {"n_arms", c.n_arms},
                         {"dc", c.dc},
                         {"dp", c.dp},
                         {"s", c.s_states},
                         {"a", c.a_actions},
                         {"goal_floor", c.goal_floor},
                         {"gen_seed", c.gen_seed}};
    }
    j["algorithm"] = c.algorithm;
    j["K"] = c.K;
    j["delta"] = c.delta;
    j["seeds"] = c.seeds;
    j["kappa_c"] = c.kappa_c;
    j["kappa_p"] = c.kappa_p;
    j["kappa_b"] = c.kappa_b;
    j["kappa_master"] = c.kappa_master;
    j["iota_scale"] = c.iota_scale;
    j["cost_noise"] = c.cost_noise;
    j["step_cap"] = c.step_cap;
    j["w_c"] = c.w_c_override;
    j["w_p"] = c.w_p_override;
    j["telemetry"] = c.telemetry;
    j["capture_trajectories"] = c.capture_trajectories;
    j["out"] = c.out;
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    const auto& inst = j.at("instance");
    if (inst.contains("path")) {
        c.instance_path = inst.at("path").get<std::string>();
    } else {
        c.preset = inst.at("preset").get<std::string>();
        if (inst.contains("b_star")) c.b_star = inst.at("b_star").get<double>();
        if (inst.contains("t_star")) c.t_star = inst.at("t_star").get<double>();
        if (inst.contains("n_arms")) c.n_arms = inst.at("n_arms").get<int>();
        if (inst.contains("dc")) c.dc = inst.at("dc").get<double>();
        if (inst.contains("dp")) c.dp = inst.at("dp").get<double>();
        if (inst.contains("s")) c.s_states = inst.at("s").get<int>();
        if (inst.contains("a")) c.a_actions = inst.at("a").get<int>();
        if (inst.contains("goal_floor")) c.goal_floor = inst.at("goal_floor").get<double>();
        if (inst.contains("gen_seed")) c.gen_seed = inst.at("gen_seed").get<std::uint64_t>();
    }
    c.algorithm = j.at("algorithm").get<std::string>();
    c.K = j.at("K").get<long long>();
    if (j.contains("delta")) c.delta = j.at("delta").get<double>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("kappa_c")) c.kappa_c = j.at("kappa_c").get<double>();
    if (j.contains("kappa_p")) c.kappa_p = j.at("kappa_p").get<double>();
    if (j.contains("kappa_b")) c.kappa_b = j.at("kappa_b").get<double>();
    if (j.contains("kappa_master")) c.kappa_master = j.at("kappa_master").get<double>();
    if (j.contains("iota_scale")) c.iota_scale = j.at("iota_scale").get<double>();
    if (j.contains("cost_noise")) c.cost_noise = j.at("cost_noise").get<std::string>();
    if (j.contains("step_cap")) c.step_cap = j.at("step_cap").get<std::uint64_t>();
    if (j.contains("w_c")) c.w_c_override = j.at("w_c").get<long long>();
    if (j.contains("w_p")) c.w_p_override = j.at("w_p").get<long long>();
    if (j.contains("telemetry")) c.telemetry = j.at("telemetry").get<bool>();
    if (j.contains("capture_trajectories"))
        c.capture_trajectories = j.at("capture_trajectories").get<bool>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    c.validate();
    return c;
}

inline DriftSequence build_instance(const ExperimentConfig& c) {
    if (!c.instance_path.empty()) {
        std::ifstream in(c.instance_path);
        if (!in) throw IoError("cannot open sequence " + c.instance_path);
        nlohmann::json j;
        in >> j;
        return sequence_from_json(j);
    }
    if (c.preset == "lb-cost")
        return make_hard_sequence(c.b_star, c.t_star, c.n_arms, c.K, c.dc, 0.0, c.gen_seed);
    if (c.preset == "lb-trans")
        return make_hard_sequence(c.b_star, c.t_star, c.n_arms, c.K, 0.0, c.dp, c.gen_seed);
    if (c.preset == "lb-mixed")
        return make_hard_sequence(c.b_star, c.t_star, c.n_arms, c.K, c.dc, c.dp, c.gen_seed);
    if (c.preset == "pair") return make_perturbation_pair(c.b_star, c.t_star, c.dc, c.dp, c.K);
    if (c.preset == "random")
        return stationary_sequence(
            make_random_proper(c.s_states, c.a_actions, c.goal_floor, c.gen_seed), c.K);
    throw InvalidSpec("unknown preset '" + c.preset + "'");
}

// ---------------------------------------------------------------------------
// learner construction

struct LearnerBundle {
    std::unique_ptr<LearnerContract> learner;
    // non-owning views for telemetry wiring
    MvpWithTests* mvp_test = nullptr;
    Master* master = nullptr;
};

inline MvpConfig make_core_config(const ExperimentConfig& c, const DriftSequence& seq,
                                  const DriftStats& stats, const HorizonConfig& hcfg) {
    MvpConfig core;
    core.S = seq.num_states();
    core.A = seq.num_actions();
    core.H = hcfg.H;
    core.K = c.K;
    core.delta = c.delta;
    core.b_star = stats.b_star;
    core.iota_scale = c.iota_scale;
    return core;
}

inline LearnerBundle make_learner(const ExperimentConfig& c, const DriftSequence& seq,
                                  const DriftStats& stats, const HorizonConfig& hcfg,
                                  std::uint64_t learner_seed) {
    LearnerBundle bundle;
    MvpConfig core = make_core_config(c, seq, stats, hcfg);
    const double sa = static_cast<double>(core.S) * core.A;

    auto make_mvp_test = [&]() {
        MvpTestConfig cfg =
            MvpTestConfig::recommended(core, stats.t_star, stats.delta_c, stats.delta_p);
        cfg.kappa_c = c.kappa_c;
        cfg.kappa_p = c.kappa_p;
        return std::make_unique<MvpWithTests>(cfg, learner_seed);
    };
    auto make_doubling = [&]() {
        return std::make_unique<DoublingMvp>(core, stats.delta_c, stats.delta_p, stats.t_max);
    };
    auto mvp_base_factory = [core, t_star = stats.t_star, kappa_b = c.kappa_b]() {
        MvpBaseConfig bcfg;
        bcfg.core = core;
        bcfg.t_star = t_star;
        bcfg.kappa_b = kappa_b;
        return std::unique_ptr<BaseLearner>(new MvpBase(bcfg));
    };
    auto mvp_ssp_factory = [core]() {
        return std::unique_ptr<BaseLearner>(new MvpSspBase(core));
    };
    auto make_master = [&](Master::BaseFactory factory, std::string_view label) {
        MasterConfig mcfg;
        mcfg.envelope =
            BaseRunGuarantee::mvp_base(c.kappa_master, stats.b_star, core.S, core.A, core.H);
        mcfg.delta = c.delta;
        return std::make_unique<Master>(mcfg, std::move(factory),
                                        derive_seed(learner_seed, label));
    };

    if (c.algorithm == "ns-mvp") {
        MvpConfig cfg = core;
        cfg.W_c = c.w_c_override > 0
                      ? c.w_c_override
                      : window_from_budget(core.b_star * sa, static_cast<double>(c.K),
                                           stats.delta_c, stats.t_max);
        cfg.W_P = c.w_p_override > 0
                      ? c.w_p_override
                      : window_from_budget(sa, static_cast<double>(c.K), stats.delta_p,
                                           stats.t_max);
        bundle.learner = std::make_unique<NonStationaryMvp>(cfg);
    } else if (c.algorithm == "ns-mvp-doubling") {
        bundle.learner = make_doubling();
    } else if (c.algorithm == "mvp-test") {
        auto l = make_mvp_test();
        bundle.mvp_test = l.get();
        bundle.learner = std::move(l);
    } else if (c.algorithm == "two-phase") {
        auto first = make_mvp_test();
        bundle.mvp_test = first.get();
        bundle.learner = std::make_unique<TwoPhaseRouter>(std::move(first), make_doubling());
    } else if (c.algorithm == "master-mvp") {
        auto m = make_master(mvp_base_factory, "phase1");
        bundle.master = m.get();
        bundle.learner = std::move(m);
    } else if (c.algorithm == "master-two-phase") {
        auto first = make_master(mvp_base_factory, "phase1");
        bundle.master = first.get();
        bundle.learner = std::make_unique<TwoPhaseRouter>(
            std::move(first), make_master(mvp_ssp_factory, "phase2"));
    } else if (c.algorithm == "uniform-random") {
        bundle.learner = std::make_unique<UniformRandomLearner>(core.A, learner_seed);
    } else if (c.algorithm == "fixed-optimal-first") {
        SolveResult sol = ssp_optimal_values(seq.segments.front().instance);
        bundle.learner = std::make_unique<FixedPolicyLearner>(std::move(sol.policy));
    } else {
        throw InvalidSpec("unknown algorithm '" + c.algorithm + "'");
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// orchestration

struct SeedResult {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    RegretLedger ledger;
};

struct ExperimentResult {
    std::vector<SeedResult> per_seed;
    double mean_final_regret = 0.0;
    double stddev_final_regret = 0.0;
    bool any_failed = false;
};

inline int harness_thread_budget(std::size_t jobs) {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("NSSLAB_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) hw = static_cast<unsigned>(std::min<long>(v, 256));
    }
    return static_cast<int>(std::min<std::size_t>(hw, jobs));
}

inline SeedResult run_one_seed(const ExperimentConfig& c, const DriftSequence& seq,
                               const DriftStats& stats, const HorizonConfig& hcfg,
                               std::uint64_t seed, std::ostream* telemetry_out = nullptr,
                               std::ostream* trajectory_out = nullptr) {
    SeedResult result;
    result.seed = seed;
    try {
        LearnerBundle bundle =
            make_learner(c, seq, stats, hcfg, derive_seed(seed, "learner"));
        if (telemetry_out && bundle.mvp_test) {
            *telemetry_out << "m,nu_c,nu_p,eta,chi_c_hat,chi_c,chi_p_hat,chi_p,tests\n";
            bundle.mvp_test->telemetry = [telemetry_out](const MvpTestTelemetry& t) {
                *telemetry_out << t.m << ',' << t.nu_c << ',' << t.nu_p << ','
                               << format_double(t.eta) << ',' << format_double(t.chi_c_hat) << ','
                               << format_double(t.chi_c_threshold) << ','
                               << format_double(t.chi_p_hat) << ','
                               << format_double(t.chi_p_threshold) << ',' << t.tests_fired << '\n';
            };
        }
        if (telemetry_out && bundle.master) {
            *telemetry_out << "m,epoch,block_n,active_l,g_tilde,u_top,test1,test2,base_term\n";
            bundle.master->telemetry = [telemetry_out](const MasterTelemetry& t) {
                *telemetry_out << t.m << ',' << t.epoch << ',' << t.block_order << ','
                               << t.active_order << ',' << format_double(t.g_tilde) << ','
                               << format_double(t.u_top) << ',' << t.test1_fired << ','
                               << t.test2_fired << ',' << t.base_terminated << '\n';
            };
        }
        RunOptions opts;
        opts.noise = c.cost_noise == "deterministic" ? CostNoise::Deterministic
                                                     : CostNoise::Bernoulli;
        opts.step_cap = c.step_cap;
        opts.capture_steps = trajectory_out != nullptr;
        RunResult run = run_experiment(seq, *bundle.learner, hcfg, seed, opts);
        if (trajectory_out) {
            for (const auto& rec : run.intervals) {
                for (const auto& step : rec.steps) {
                    nlohmann::json j{{"m", rec.m},      {"k", rec.episode}, {"h", step.h},
                                     {"s", step.state}, {"a", step.action}, {"c", step.cost},
                                     {"s'", step.next}};
                    *trajectory_out << j.dump() << '\n';
                }
            }
        }
        result.ledger = std::move(run.ledger);
    } catch (const std::exception& e) {
        result.failed = true;
        result.error = e.what();
    }
    return result;
}

// Runs every seed (possibly in parallel), writes one CSV per seed plus a
// summary JSON. Individual seed failures are recorded without aborting the
// remaining seeds.
inline ExperimentResult run_experiment_config(const ExperimentConfig& c,
                                              bool write_files = true) {
    c.validate();
    DriftSequence seq = build_instance(c);
    DriftStats stats = drift_stats(seq);
    HorizonConfig hcfg = HorizonConfig::derive(stats, seq.horizon_episodes);

    ExperimentResult result;
    result.per_seed.resize(c.seeds.size());
    std::atomic<std::size_t> cursor{0};
    int threads = harness_thread_budget(c.seeds.size());
    auto worker = [&]() {
        while (true) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= c.seeds.size()) break;
            std::ofstream telemetry_file;
            std::ofstream trajectory_file;
            std::ostream* tele = nullptr;
            std::ostream* traj = nullptr;
            if (write_files && c.telemetry) {
                telemetry_file.open(c.out + "_seed" + std::to_string(c.seeds[i]) +
                                    ".telemetry.csv");
                tele = &telemetry_file;
            }
            if (write_files && c.capture_trajectories) {
                trajectory_file.open(c.out + "_seed" + std::to_string(c.seeds[i]) +
                                     ".trajectory.jsonl");
                traj = &trajectory_file;
            }
            result.per_seed[i] = run_one_seed(c, seq, stats, hcfg, c.seeds[i], tele, traj);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    double sum = 0.0, sq = 0.0;
    long long n = 0;
    for (auto& sr : result.per_seed) {
        if (sr.failed) {
            result.any_failed = true;
            continue;
        }
        sum += sr.ledger.final_regret;
        sq += sr.ledger.final_regret * sr.ledger.final_regret;
        ++n;
    }
    if (n > 0) {
        result.mean_final_regret = sum / n;
        double var = sq / n - result.mean_final_regret * result.mean_final_regret;
        result.stddev_final_regret = std::sqrt(std::max(0.0, var));
    }

    if (write_files) {
        for (const auto& sr : result.per_seed) {
            if (sr.failed) continue;
            std::ofstream out(c.out + "_seed" + std::to_string(sr.seed) + ".csv");
            if (!out) throw IoError("cannot write ledger for seed " + std::to_string(sr.seed));
            out << serialize_ledger_csv(sr.ledger);
        }
        nlohmann::json summary;
        summary["config"] = to_json(c);
        summary["drift_stats"] = {{"delta_c", stats.delta_c}, {"delta_p", stats.delta_p},
                                  {"L", stats.num_pieces},    {"b_star", stats.b_star},
                                  {"t_star", stats.t_star},   {"t_max", stats.t_max},
                                  {"H", hcfg.H}};
        summary["mean_regret"] = result.mean_final_regret;
        summary["stddev_regret"] = result.stddev_final_regret;
        nlohmann::json per_seed = nlohmann::json::array();
        for (const auto& sr : result.per_seed) {
            nlohmann::json js{{"seed", sr.seed}, {"failed", sr.failed}};
            if (sr.failed) {
                js["error"] = sr.error;
            } else {
                js["regret"] = sr.ledger.final_regret;
                js["interval_regret"] = sr.ledger.interval_regret;
                js["intervals"] = sr.ledger.total_intervals;
                js["wallclock_s"] = sr.ledger.wallclock_seconds;
            }
            per_seed.push_back(std::move(js));
        }
        summary["seeds"] = std::move(per_seed);
        std::ofstream out(c.out + "_summary.json");
        if (!out) throw IoError("cannot write summary");
        out << summary.dump(2) << '\n';
    }
    return result;
}

// ---------------------------------------------------------------------------
// trend evaluation

struct TrendFit {
    double slope = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::map<long long, double> mean_by_k;
    std::map<long long, double> ratio_vs_baseline;  // empty without a baseline
};

inline double fit_slope(const std::vector<std::pair<double, double>>& log_points) {
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : log_points) {
        mx += x;
        my += y;
    }
    mx /= log_points.size();
    my /= log_points.size();
    double num = 0.0, den = 0.0;
    for (auto [x, y] : log_points) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if (den == 0.0) throw InsufficientData("all ledgers share the same K; slope undefined");
    return num / den;
}

// Fits log(mean R_K) against log K across ledgers grouped by K, with a
// seed-resampling bootstrap CI.
inline TrendFit evaluate_trend(const std::vector<RegretLedger>& ledgers,
                               const std::vector<RegretLedger>& baseline = {},
                               int bootstrap_rounds = 1000, std::uint64_t bootstrap_seed = 7) {
    if (ledgers.size() < 2) throw InsufficientData("need at least two ledgers");
    std::map<long long, std::vector<double>> groups;
    for (const auto& led : ledgers) {
        if (led.rows.empty()) throw InsufficientData("empty ledger");
        groups[led.rows.back().episode].push_back(led.final_regret);
    }
    if (groups.size() < 2) throw InsufficientData("need ledgers at two or more distinct K");

    TrendFit fit;
    std::vector<std::pair<double, double>> pts;
    for (auto& [k, vals] : groups) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        fit.mean_by_k[k] = mean;
        if (mean <= 0.0) throw InsufficientData("non-positive mean regret; log fit undefined");
        pts.push_back({std::log(static_cast<double>(k)), std::log(mean)});
    }
    fit.slope = fit_slope(pts);

    Rng gen = make_stream(bootstrap_seed, "bootstrap");
    std::vector<double> slopes;
    slopes.reserve(bootstrap_rounds);
    for (int b = 0; b < bootstrap_rounds; ++b) {
        std::vector<std::pair<double, double>> resampled;
        bool ok = true;
        for (auto& [k, vals] : groups) {
            std::uniform_int_distribution<std::size_t> pick(0, vals.size() - 1);
            double mean = 0.0;
            for (std::size_t i = 0; i < vals.size(); ++i) mean += vals[pick(gen)];
            mean /= vals.size();
            if (mean <= 0.0) {
                ok = false;
                break;
            }
            resampled.push_back({std::log(static_cast<double>(k)), std::log(mean)});
        }
        if (ok) slopes.push_back(fit_slope(resampled));
    }
    if (!slopes.empty()) {
        std::sort(slopes.begin(), slopes.end());
        fit.ci_low = slopes[static_cast<std::size_t>(0.025 * (slopes.size() - 1))];
        fit.ci_high = slopes[static_cast<std::size_t>(0.975 * (slopes.size() - 1))];
    }

    if (!baseline.empty()) {
        std::map<long long, std::vector<double>> base_groups;
        for (const auto& led : baseline) {
            if (led.rows.empty()) continue;
            base_groups[led.rows.back().episode].push_back(led.final_regret);
        }
        for (auto& [k, vals] : base_groups) {
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= vals.size();
            auto it = fit.mean_by_k.find(k);
            if (it != fit.mean_by_k.end() && mean != 0.0) {
                fit.ratio_vs_baseline[k] = it->second / mean;
            }
        }
    }
    return fit;
}

}  // namespace nsslab
