#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "nsslab/harness.hpp"

using namespace nsslab;

namespace {

RegretLedger synthetic_ledger(long long K, double per_episode, std::uint64_t salt = 0) {
    RegretLedger ledger;
    double cum = 0.0;
    for (long long k = 1; k <= K; ++k) {
        EpisodeRow row;
        row.episode = k;
        row.suffered = per_episode + 0.1 * static_cast<double>((k + salt) % 3);
        row.v_star = 0.1;
        cum += per_episode;
        row.cum_regret = cum;
        row.intervals = 2 * k;
        row.learner.resets_c = k / 7;
        ledger.rows.push_back(row);
    }
    ledger.final_regret = cum;
    ledger.total_intervals = 2 * K;
    return ledger;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("nsslab-test-" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("ledger csv round trips exactly") {
    RegretLedger ledger = synthetic_ledger(17, 0.3333333333333333);
    ledger.rows[4].suffered = 1.0 / 3.0;
    ledger.rows[9].cum_regret = 0.1 + 0.2;  // not representable exactly, must survive
    std::string csv = serialize_ledger_csv(ledger);
    std::stringstream ss(csv);
    RegretLedger back = parse_ledger_csv(ss);
    REQUIRE(rows_equal(ledger, back));
    REQUIRE(back.final_regret == ledger.rows.back().cum_regret);
    REQUIRE(back.total_intervals == ledger.rows.back().intervals);
}

TEST_CASE("csv header is versioned and enforced") {
    std::string csv = serialize_ledger_csv(synthetic_ledger(3, 1.0));
    REQUIRE(csv.rfind("nsslab-v1,", 0) == 0);
    std::stringstream bad("bogus,k\n1,2\n");
    REQUIRE_THROWS_AS(parse_ledger_csv(bad), IoError);
}

TEST_CASE("config json round trips with defaults echoed") {
    ExperimentConfig cfg;
    cfg.preset = "lb-mixed";
    cfg.algorithm = "two-phase";
    cfg.K = 321;
    cfg.seeds = {4, 5, 6};
    cfg.iota_scale = 1e-6;
    nlohmann::json j = to_json(cfg);
    ExperimentConfig back = config_from_json(j);
    REQUIRE(back.preset == "lb-mixed");
    REQUIRE(back.algorithm == "two-phase");
    REQUIRE(back.K == 321);
    REQUIRE(back.seeds == std::vector<std::uint64_t>{4, 5, 6});
    REQUIRE(back.iota_scale == 1e-6);
    REQUIRE(back.kappa_c == 3.0);  // default preserved through the echo
}

TEST_CASE("config validation rejects nonsense") {
    ExperimentConfig cfg;
    cfg.preset = "random";
    cfg.K = 0;
    REQUIRE_THROWS_AS(cfg.validate(), InvalidSpec);
    cfg.K = 5;
    cfg.seeds.clear();
    REQUIRE_THROWS_AS(cfg.validate(), InvalidSpec);
    cfg.seeds = {1};
    cfg.delta = 1.5;
    REQUIRE_THROWS_AS(cfg.validate(), InvalidSpec);
}

TEST_CASE("every algorithm name constructs and completes a small run") {
    for (const char* name :
         {"ns-mvp", "ns-mvp-doubling", "mvp-test", "two-phase", "master-mvp",
          "master-two-phase", "uniform-random", "fixed-optimal-first"}) {
        ExperimentConfig cfg;
        cfg.preset = "random";
        cfg.s_states = 2;
        cfg.a_actions = 2;
        cfg.goal_floor = 0.4;
        cfg.algorithm = name;
        cfg.K = 15;
        cfg.seeds = {3};
        cfg.iota_scale = 1e-6;
        ExperimentResult res = run_experiment_config(cfg, /*write_files=*/false);
        INFO(name);
        REQUIRE_FALSE(res.any_failed);
        REQUIRE(res.per_seed[0].ledger.rows.size() == 15);
    }
}

TEST_CASE("unknown algorithm and preset are rejected") {
    ExperimentConfig cfg;
    cfg.preset = "no-such-preset";
    REQUIRE_THROWS_AS(build_instance(cfg), InvalidSpec);
    cfg.preset = "random";
    cfg.algorithm = "no-such-algorithm";
    REQUIRE_THROWS_AS(run_experiment_config(cfg, false), InvalidSpec);
}

TEST_CASE("identical seeds give identical ledgers") {
    ExperimentConfig cfg;
    cfg.preset = "lb-cost";
    cfg.b_star = 1.0;
    cfg.t_star = 3.0;
    cfg.dc = 0.2;
    cfg.algorithm = "uniform-random";
    cfg.K = 40;
    cfg.seeds = {9, 9};
    ExperimentResult res = run_experiment_config(cfg, false);
    REQUIRE_FALSE(res.any_failed);
    REQUIRE(rows_equal(res.per_seed[0].ledger, res.per_seed[1].ledger));
    REQUIRE(res.stddev_final_regret == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("per-seed results are independent of thread count") {
    ExperimentConfig cfg;
    cfg.preset = "random";
    cfg.s_states = 3;
    cfg.a_actions = 2;
    cfg.algorithm = "mvp-test";
    cfg.iota_scale = 1e-6;
    cfg.K = 25;
    cfg.seeds = {1, 2, 3, 4};

    setenv("NSSLAB_THREADS", "1", 1);
    ExperimentResult serial = run_experiment_config(cfg, false);
    setenv("NSSLAB_THREADS", "4", 1);
    ExperimentResult parallel = run_experiment_config(cfg, false);
    unsetenv("NSSLAB_THREADS");
    REQUIRE_FALSE(serial.any_failed);
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        REQUIRE(rows_equal(serial.per_seed[i].ledger, parallel.per_seed[i].ledger));
    }
}

TEST_CASE("seeds that blow the step cap fail alone without aborting the run") {
    TempDir dir;
    ExperimentConfig cfg;
    cfg.preset = "pair";
    cfg.b_star = 2.0;
    cfg.t_star = 10.0;
    cfg.algorithm = "uniform-random";
    cfg.K = 10;
    cfg.seeds = {1, 2};
    cfg.step_cap = 5;  // typical episodes need about t_star steps
    cfg.out = dir.file("run");
    ExperimentResult res = run_experiment_config(cfg);
    REQUIRE(res.any_failed);
    for (const auto& sr : res.per_seed) {
        REQUIRE(sr.failed);
        REQUIRE(sr.error.find("exceeded") != std::string::npos);
    }
    // the summary is still written with the failures recorded
    std::ifstream sin(dir.file("run_summary.json"));
    REQUIRE(sin.good());
    nlohmann::json summary;
    sin >> summary;
    REQUIRE(summary["seeds"][0]["failed"] == true);
}

TEST_CASE("run writes one csv per seed plus a summary echoing the config") {
    TempDir dir;
    ExperimentConfig cfg;
    cfg.preset = "pair";
    cfg.b_star = 2.0;
    cfg.t_star = 10.0;
    cfg.dc = 0.05;
    cfg.dp = 0.05;
    cfg.algorithm = "uniform-random";
    cfg.K = 30;
    cfg.seeds = {1, 2};
    cfg.out = dir.file("exp");
    ExperimentResult res = run_experiment_config(cfg);
    REQUIRE_FALSE(res.any_failed);

    RegretLedger led1 = load_ledger(dir.file("exp_seed1.csv"));
    REQUIRE(rows_equal(led1, res.per_seed[0].ledger));
    std::ifstream sin(dir.file("exp_summary.json"));
    REQUIRE(sin.good());
    nlohmann::json summary;
    sin >> summary;
    REQUIRE(summary["config"]["algorithm"] == "uniform-random");
    REQUIRE(summary["seeds"].size() == 2);
    REQUIRE(summary["drift_stats"]["L"] == 2);
}

TEST_CASE("telemetry and trajectory dumps are written on request") {
    TempDir dir;
    ExperimentConfig cfg;
    cfg.preset = "random";
    cfg.s_states = 2;
    cfg.a_actions = 2;
    cfg.goal_floor = 0.4;
    cfg.algorithm = "mvp-test";
    cfg.iota_scale = 1e-6;
    cfg.K = 12;
    cfg.seeds = {7};
    cfg.telemetry = true;
    cfg.capture_trajectories = true;
    cfg.out = dir.file("t");
    ExperimentResult res = run_experiment_config(cfg);
    REQUIRE_FALSE(res.any_failed);

    std::ifstream tele(dir.file("t_seed7.telemetry.csv"));
    REQUIRE(tele.good());
    std::string header;
    std::getline(tele, header);
    REQUIRE(header == "m,nu_c,nu_p,eta,chi_c_hat,chi_c,chi_p_hat,chi_p,tests");
    long long tele_rows = 0;
    for (std::string line; std::getline(tele, line);) ++tele_rows;
    REQUIRE(tele_rows == res.per_seed[0].ledger.total_intervals);

    std::ifstream traj(dir.file("t_seed7.trajectory.jsonl"));
    REQUIRE(traj.good());
    long long steps = 0;
    for (std::string line; std::getline(traj, line);) {
        nlohmann::json j = nlohmann::json::parse(line);
        REQUIRE(j.contains("m"));
        REQUIRE(j.contains("k"));
        REQUIRE(j.contains("h"));
        REQUIRE(j.contains("s'"));
        ++steps;
    }
    REQUIRE(steps > 0);

    // the restart driver writes its own telemetry schema
    cfg.algorithm = "master-mvp";
    cfg.out = dir.file("m");
    ExperimentResult res2 = run_experiment_config(cfg);
    REQUIRE_FALSE(res2.any_failed);
    std::ifstream mtele(dir.file("m_seed7.telemetry.csv"));
    REQUIRE(mtele.good());
    std::getline(mtele, header);
    REQUIRE(header == "m,epoch,block_n,active_l,g_tilde,u_top,test1,test2,base_term");
}

TEST_CASE("trend fit recovers exact power laws") {
    std::vector<RegretLedger> linear, twothirds;
    for (long long K : {100, 400, 1600}) {
        RegretLedger a = synthetic_ledger(K, 1.0);
        a.final_regret = static_cast<double>(K);
        a.rows.back().cum_regret = a.final_regret;
        linear.push_back(a);
        RegretLedger b = synthetic_ledger(K, 1.0);
        b.final_regret = std::pow(static_cast<double>(K), 2.0 / 3.0);
        b.rows.back().cum_regret = b.final_regret;
        twothirds.push_back(b);
    }
    TrendFit f1 = evaluate_trend(linear);
    REQUIRE(f1.slope == Catch::Approx(1.0).margin(1e-9));
    TrendFit f2 = evaluate_trend(twothirds);
    REQUIRE(f2.slope == Catch::Approx(2.0 / 3.0).margin(1e-3));
    REQUIRE(f2.ci_low <= f2.slope);
    REQUIRE(f2.ci_high >= f2.slope);
}

TEST_CASE("trend fit needs at least two distinct horizons") {
    std::vector<RegretLedger> same = {synthetic_ledger(100, 1.0), synthetic_ledger(100, 1.0)};
    REQUIRE_THROWS_AS(evaluate_trend(same), InsufficientData);
    std::vector<RegretLedger> one = {synthetic_ledger(100, 1.0)};
    REQUIRE_THROWS_AS(evaluate_trend(one), InsufficientData);
}

TEST_CASE("trend fit reports ratios against a baseline") {
    std::vector<RegretLedger> main_runs, base_runs;
    for (long long K : {100, 400}) {
        RegretLedger a = synthetic_ledger(K, 1.0);
        a.final_regret = 0.5 * static_cast<double>(K);
        a.rows.back().cum_regret = a.final_regret;
        main_runs.push_back(a);
        RegretLedger b = synthetic_ledger(K, 1.0);
        b.final_regret = static_cast<double>(K);
        b.rows.back().cum_regret = b.final_regret;
        base_runs.push_back(b);
    }
    TrendFit fit = evaluate_trend(main_runs, base_runs);
    REQUIRE(fit.ratio_vs_baseline.at(100) == Catch::Approx(0.5));
    REQUIRE(fit.ratio_vs_baseline.at(400) == Catch::Approx(0.5));
}
