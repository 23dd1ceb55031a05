#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "nsslab/harness.hpp"

namespace {

int cmd_generate(const std::string& preset, const nsslab::ExperimentConfig& params,
                 const std::string& out_path) {
    nsslab::ExperimentConfig cfg = params;
    cfg.preset = preset;
    nsslab::DriftSequence seq = nsslab::build_instance(cfg);
    for (const auto& seg : seq.segments) {
        nsslab::ValidationReport report = nsslab::validate_instance(seg.instance);
        if (!report.ok()) {
            std::cerr << "generated segment failed validation:\n";
            for (const auto& d : report.defects) std::cerr << "  " << d << "\n";
            return 1;
        }
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "cannot write " << out_path << "\n";
        return 1;
    }
    out << nsslab::to_json(seq).dump(2) << '\n';

    nsslab::DriftStats stats = nsslab::drift_stats(seq);
    std::cout << "wrote " << out_path << "\n"
              << "  K=" << seq.horizon_episodes << " S=" << seq.num_states()
              << " A=" << seq.num_actions() << " segments=" << seq.segments.size() << "\n"
              << "  delta_c=" << stats.delta_c << " delta_p=" << stats.delta_p
              << " L=" << stats.num_pieces << "\n"
              << "  b_star=" << stats.b_star << " t_star=" << stats.t_star
              << " t_max=" << stats.t_max << "\n";
    if (preset.rfind("lb", 0) == 0) {
        std::cout << "  note: arm rows replicate one real action across the " << seq.num_actions()
                  << "-action table\n";
    }
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            const std::string& seeds_override) {
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "cannot open config " << config_path << "\n";
        return 1;
    }
    nlohmann::json j;
    in >> j;
    nsslab::ExperimentConfig cfg = nsslab::config_from_json(j);
    if (!out_override.empty()) cfg.out = out_override;
    if (!seeds_override.empty()) {
        cfg.seeds.clear();
        std::stringstream ss(seeds_override);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.seeds.push_back(std::stoull(tok));
    }

    nsslab::ExperimentResult result = nsslab::run_experiment_config(cfg);
    for (const auto& sr : result.per_seed) {
        if (sr.failed) {
            std::cout << "seed " << sr.seed << ": FAILED (" << sr.error << ")\n";
        } else {
            std::cout << "seed " << sr.seed << ": R_K=" << sr.ledger.final_regret
                      << " intervals=" << sr.ledger.total_intervals << " ("
                      << sr.ledger.wallclock_seconds << " s)\n";
        }
    }
    std::cout << "mean R_K=" << result.mean_final_regret
              << " stddev=" << result.stddev_final_regret << "\n";
    return result.any_failed ? 1 : 0;
}

int cmd_eval(const std::vector<std::string>& ledger_paths,
             const std::vector<std::string>& baseline_paths) {
    try {
        std::vector<nsslab::RegretLedger> ledgers, baseline;
        for (const auto& p : ledger_paths) ledgers.push_back(nsslab::load_ledger(p));
        for (const auto& p : baseline_paths) baseline.push_back(nsslab::load_ledger(p));
        nsslab::TrendFit fit = nsslab::evaluate_trend(ledgers, baseline);
        std::cout << "log-log slope of mean R_K vs K: " << fit.slope << " (95% bootstrap CI ["
                  << fit.ci_low << ", " << fit.ci_high << "])\n";
        for (const auto& [k, mean] : fit.mean_by_k) {
            std::cout << "  K=" << k << " mean R_K=" << mean;
            auto it = fit.ratio_vs_baseline.find(k);
            if (it != fit.ratio_vs_baseline.end()) std::cout << " ratio_vs_baseline=" << it->second;
            std::cout << "\n";
        }
        return 0;
    } catch (const nsslab::InsufficientData& e) {
        std::cerr << "eval: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"non-stationary shortest-path regret lab"};
    app.require_subcommand(1);

    nsslab::ExperimentConfig params;
    std::string preset = "random";
    std::string out_path = "sequence.json";
    auto* gen = app.add_subcommand("generate", "construct a drifting environment file");
    gen->add_option("--preset", preset, "lb-cost | lb-trans | lb-mixed | pair | random")
        ->required();
    gen->add_option("--out", out_path, "output path");
    gen->add_option("--k", params.K, "episodes");
    gen->add_option("--bstar", params.b_star, "target optimal-cost scale");
    gen->add_option("--tstar", params.t_star, "target hitting-time scale");
    gen->add_option("--n", params.n_arms, "arm count of the hard family");
    gen->add_option("--dc", params.dc, "cost drift budget / perturbation");
    gen->add_option("--dp", params.dp, "transition drift budget / perturbation");
    gen->add_option("--s", params.s_states, "random preset: states");
    gen->add_option("--a", params.a_actions, "random preset: actions");
    gen->add_option("--goal-floor", params.goal_floor, "random preset: goal probability floor");
    gen->add_option("--seed", params.gen_seed, "generator seed");

    std::string config_path, run_out, run_seeds;
    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("--config", config_path, "experiment config JSON")->required();
    run->add_option("--out", run_out, "override output prefix");
    run->add_option("--seeds", run_seeds, "override seeds, comma separated");

    std::vector<std::string> ledger_paths, baseline_paths;
    auto* eval = app.add_subcommand("eval", "fit the regret growth trend across ledgers");
    eval->add_option("ledgers", ledger_paths, "ledger CSV files")->required();
    eval->add_option("--baseline", baseline_paths, "baseline ledger CSV files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(preset, params, out_path);
        if (run->parsed()) return cmd_run(config_path, run_out, run_seeds);
        if (eval->parsed()) return cmd_eval(ledger_paths, baseline_paths);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
