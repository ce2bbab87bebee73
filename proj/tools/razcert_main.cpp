#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "razcert/certificate_io.hpp"
#include "razcert/config.hpp"
#include "razcert/evaluate.hpp"

using namespace razcert;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<long long> seed;
    int threads = 0;
    bool serial = false;
    bool dry_run = false;
};

ExecMode exec_mode(const GlobalArgs& g) { return g.serial ? ExecMode::Serial : ExecMode::Parallel; }

RunConfig load_config(const GlobalArgs& g) {
    if (g.config_path.empty()) throw ConfigError("missing required --config");
    RunConfig cfg = RunConfig::from_file(g.config_path);
    if (g.seed) cfg.seed = std::uint64_t(*g.seed);
    return cfg;
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write output file: " + name);
    out << content;
}

int cmd_synthesize(const GlobalArgs& g) {
    RunConfig cfg = load_config(g);
    if (g.dry_run) {
        std::cout << cfg.to_toml();
        return 0;
    }
    BuiltEnv env = cfg.build_env();
    Certificate cert = make_certificate(env.system, cfg.constants, cfg.hidden_v, cfg.hidden_pi,
                                        cfg.share_by_class, cfg.seed);
    cert.config_hash = cfg.hash();

    TrainingSet dataset =
        generate_dataset(env.system, *env.nominal, cfg.trajectories, cfg.horizon,
                         cfg.training_boxes(env.system), derive_seed(cfg.seed, "dataset", 0),
                         exec_mode(g));

    CegisOptions opts = cfg.cegis_options(env.system, exec_mode(g));
    opts.seed = cfg.seed;

    std::ostringstream progress;
    CegisResult result =
        run_cegis(env.system, *env.nominal, std::move(cert), std::move(dataset), opts, &progress);

    write_file(g.out_dir, "certificate.json", certificate_to_json(result.certificate) + "\n");
    write_file(g.out_dir, "report.json", report_json(result.report) + "\n");
    write_file(g.out_dir, "cegis_log.ndjson", progress.str());
    std::cout << "verdict: " << verdict_name(result.report.verdict) << " after "
              << result.state.iterations << " iteration(s)\n";
    return result.report.verdict == Verdict::Verified ? 0 : 1;
}

int cmd_verify(const GlobalArgs& g, const std::string& cert_path) {
    RunConfig cfg = load_config(g);
    if (g.dry_run) {
        std::cout << cfg.to_toml();
        return 0;
    }
    BuiltEnv env = cfg.build_env();
    Certificate cert = load_certificate(cert_path);
    VerificationReport report =
        verify_certificate(cert, env.system, cfg.verify_options(env.system, exec_mode(g)));
    write_file(g.out_dir, "report.json", report_json(report) + "\n");
    std::cout << "verdict: " << verdict_name(report.verdict) << "\n";
    return report.exit_code();
}

DisturbanceSignal scenario_signal(const RunConfig& cfg, const std::string& name) {
    if (name == "zero") return {};
    for (const auto& s : disturbance_presets(cfg.env_kind))
        if (s.name == name) return s.disturbance;
    throw ConfigError("unknown scenario '" + name + "' (use zero or a preset name)");
}

int cmd_simulate(const GlobalArgs& g, const std::string& cert_path, const std::string& scenario,
                 int horizon) {
    RunConfig cfg = load_config(g);
    if (g.dry_run) {
        std::cout << cfg.to_toml();
        return 0;
    }
    BuiltEnv env = cfg.build_env();
    std::optional<Certificate> cert;
    if (!cert_path.empty()) cert = load_certificate(cert_path);

    std::vector<Vec> x0;
    Rng rng(derive_seed(cfg.seed, "simulate", 0));
    auto boxes = cfg.training_boxes(env.system);
    for (int i = 0; i < env.system.agent_count(); ++i)
        x0.push_back(rng.uniform_in(boxes[std::size_t(i)]));
    DelayHistory h0 = pad_history(env.system, x0);

    DisturbanceSignal signal = scenario_signal(cfg, scenario);
    Trajectory traj;
    if (cert) {
        CertificateController controller(*cert, env.system);
        traj = rollout(env.system, controller, h0, signal, horizon, env.sample_period);
    } else {
        traj = rollout(env.system, *env.nominal, h0, signal, horizon, env.sample_period);
    }
    if (traj.clipped_samples > 0)
        std::cerr << "warning: " << traj.clipped_samples
                  << " disturbance samples clipped to the agent boxes\n";
    write_file(g.out_dir, "trajectory.csv", trajectory_csv(traj));
    std::cout << "wrote trajectory.csv (" << traj.states.size() << " steps)\n";
    return 0;
}

int cmd_evaluate(const GlobalArgs& g, const std::string& cert_path, int horizon) {
    RunConfig cfg = load_config(g);
    if (g.dry_run) {
        std::cout << cfg.to_toml();
        return 0;
    }
    BuiltEnv env = cfg.build_env();
    Certificate cert = load_certificate(cert_path);
    auto [rho, c] = compute_rho_c(cert.constants.p, cert.constants.epsilon, env.system.graph.tau_max);
    if (cfg.rho_override) rho = *cfg.rho_override;

    std::ostringstream rmse_csv;
    rmse_csv << "scenario,controller,value\n";
    rmse_csv.precision(17);
    std::vector<Vec> equilibria;
    for (const auto& a : env.system.agents) equilibria.push_back(a.equilibrium);

    std::string lyap_csv, env_csv;
    for (const auto& scenario : disturbance_presets(cfg.env_kind)) {
        Rng rng(derive_seed(cfg.seed, "evaluate_" + scenario.name, 0));
        auto boxes = cfg.training_boxes(env.system);
        std::vector<Vec> x0;
        for (int i = 0; i < env.system.agent_count(); ++i)
            x0.push_back(rng.uniform_in(boxes[std::size_t(i)]));
        DelayHistory h0 = pad_history(env.system, x0);

        CertificateController controller(cert, env.system);
        Trajectory certified =
            rollout(env.system, controller, h0, scenario.disturbance, horizon, env.sample_period);
        Trajectory nominal =
            rollout(env.system, *env.nominal, h0, scenario.disturbance, horizon, env.sample_period);

        rmse_csv << scenario.name << ",certificate," << rmse(certified, equilibria) << "\n";
        rmse_csv << scenario.name << ",nominal," << rmse(nominal, equilibria) << "\n";

        if (lyap_csv.empty()) {
            LyapunovTrace trace = lyapunov_trace(certified, cert, env.system);
            lyap_csv = lyapunov_trace_csv(trace);
            EnvelopeCheck check = siss_envelope_check(certified, cert, env.system, rho, cert.constants.p);
            env_csv = envelope_check_csv(check);
            std::cout << scenario.name << ": envelope " << (check.pass ? "holds" : "violated")
                      << ", worst slack " << check.worst_slack << "\n";
        }
    }
    write_file(g.out_dir, "rmse.csv", rmse_csv.str());
    write_file(g.out_dir, "lyap.csv", lyap_csv);
    write_file(g.out_dir, "envelope.csv", env_csv);
    return 0;
}

int cmd_reduce(const GlobalArgs& g) {
    RunConfig cfg = load_config(g);
    if (g.dry_run) {
        std::cout << cfg.to_toml();
        return 0;
    }
    BuiltEnv env = cfg.build_env();
    EquivalenceClasses classes = partition_equivalent(env.system);
    std::ostringstream out;
    out << "{\n  \"class_count\": " << classes.class_count() << ",\n  \"classes\": [\n";
    for (int c = 0; c < classes.class_count(); ++c) {
        out << "    {\"id\": " << c << ", \"representative\": "
            << classes.representative[std::size_t(c)] << ", \"members\": [";
        const auto& m = classes.members[std::size_t(c)];
        for (std::size_t q = 0; q < m.size(); ++q) out << (q ? ", " : "") << m[q];
        out << "]}" << (c + 1 < classes.class_count() ? "," : "") << "\n";
    }
    out << "  ]\n}\n";
    std::cout << out.str();
    write_file(g.out_dir, "classes.json", out.str());
    return 0;
}

int cmd_transfer(const GlobalArgs& g, const std::string& cert_path,
                 const std::string& target_config_path) {
    RunConfig cfg = load_config(g);
    if (g.dry_run) {
        std::cout << cfg.to_toml();
        return 0;
    }
    RunConfig target_cfg = RunConfig::from_file(target_config_path);
    BuiltEnv source = cfg.build_env();
    BuiltEnv target = target_cfg.build_env();
    Certificate cert = load_certificate(cert_path);

    SubstructureMap map = derive_substructure_map(source.system, target.system);
    IsoCheckResult check = check_substructure_iso(source.system, target.system, map);
    if (!check.valid) {
        std::cerr << "substructure map invalid: " << check.violation << "\n";
        return 1;
    }
    Certificate transferred = transfer_certificate(cert, map, source.system, target.system);
    transferred.config_hash = target_cfg.hash();
    write_file(g.out_dir, "certificate.json", certificate_to_json(transferred) + "\n");
    std::cout << "transferred certificate to " << target.system.agent_count() << " agents\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural vector Lyapunov-Razumikhin certificates for delayed interconnected systems"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "TOML configuration file")->required(false);
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--seed", g.seed, "override the configured root seed");
    app.add_option("--threads", g.threads, "cap the worker pool");
    app.add_flag("--serial", g.serial, "run kernels on the serial reference path");
    app.add_flag("--dry-run", g.dry_run, "print the resolved configuration and exit");

    auto* synth = app.add_subcommand("synthesize", "train and verify a certificate (CEGIS)");
    std::string cert_path, target_config, scenario = "zero";
    int horizon = 500;

    auto* verify = app.add_subcommand("verify", "verify a stored certificate");
    verify->add_option("--certificate", cert_path, "certificate file")->required();

    auto* simulate = app.add_subcommand("simulate", "roll out the closed loop and export CSV");
    simulate->add_option("--certificate", cert_path, "certificate file (nominal controller if omitted)");
    simulate->add_option("--scenario", scenario, "zero or a disturbance preset name");
    simulate->add_option("--horizon", horizon, "number of steps");

    auto* evaluate = app.add_subcommand("evaluate", "RMSE and Lyapunov traces under the presets");
    evaluate->add_option("--certificate", cert_path, "certificate file")->required();
    evaluate->add_option("--horizon", horizon, "number of steps");

    auto* reduce = app.add_subcommand("reduce", "print structural equivalence classes");

    auto* transfer = app.add_subcommand("transfer", "map a certificate onto a larger system");
    transfer->add_option("--certificate", cert_path, "source certificate")->required();
    transfer->add_option("--target", target_config, "target system configuration")->required();

    CLI11_PARSE(app, argc, argv);

    set_thread_cap(g.threads);

    try {
        if (synth->parsed()) return cmd_synthesize(g);
        if (verify->parsed()) return cmd_verify(g, cert_path);
        if (simulate->parsed()) return cmd_simulate(g, cert_path, scenario, horizon);
        if (evaluate->parsed()) return cmd_evaluate(g, cert_path, horizon);
        if (reduce->parsed()) return cmd_reduce(g);
        if (transfer->parsed()) return cmd_transfer(g, cert_path, target_config);
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    }
    return 0;
}
