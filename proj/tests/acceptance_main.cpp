// Acceptance suite: runs every primary criterion at its stated tolerance and
// prints one pass/fail line each. Exit code 0 only if all criteria hold.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "verify_fixture.hpp"
#include "razcert/cegis.hpp"
#include "razcert/config.hpp"
#include "razcert/evaluate.hpp"

using namespace razcert;
using namespace razcert::testing;

namespace {

struct Harness {
    int failures = 0;

    void run(int id, const std::string& name, const std::function<std::string()>& body) {
        auto t0 = std::chrono::steady_clock::now();
        bool pass = true;
        std::string detail;
        try {
            detail = body();
        } catch (const std::exception& e) {
            pass = false;
            detail = std::string("exception: ") + e.what();
        }
        if (detail.rfind("FAIL", 0) == 0) pass = false;
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s  criterion %2d  %-28s %s [%.1f s]\n", pass ? "PASS" : "FAIL", id,
                    name.c_str(), detail.c_str(), secs);
        std::fflush(stdout);
        if (!pass) ++failures;
    }
};

std::string fail(const std::string& why) { return "FAIL: " + why; }

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), pattern, a, b);
    return buf;
}

// --- criterion 1: gradient correctness ------------------------------------------------

std::string criterion_gradients() {
    auto t0 = std::chrono::steady_clock::now();
    ToyParams tp;
    BuiltEnv env = make_toy_pair(tp);
    CertificateConstants constants;
    constants.p = 1.2;
    constants.epsilon = 0.3;
    constants.psi = 0.4;
    constants.a1 = 0.2;
    constants.a2 = 2.0;
    Certificate cert = make_certificate(env.system, constants, {6}, {}, true, 97);
    jitter_biases(cert, 98);

    auto boxes = std::vector<Box>(2, Box::centered(1, 0.5));
    TrainingSet data = generate_dataset(env.system, *env.nominal, 8, 4, boxes, 5, ExecMode::Serial);
    LossWeights weights{1.0, 5.0, 3.0};

    Rng rng(55);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> batch;
        for (int q = 0; q < 4; ++q) batch.push_back(rng.next_u64() % data.size());
        worst = std::max(worst,
                         gradient_check(env.system, *env.nominal, cert, data, batch, weights));
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (worst >= 1e-3) return fail(fmt("max relative error %.2e", worst));
    if (secs >= 10.0) return fail(fmt("runtime %.1f s exceeds 10 s", secs));
    return fmt("20 micro-batches, max rel err %.2e", worst);
}

// --- criterion 2: small-gain projection ------------------------------------------------

std::string criterion_small_gain() {
    Rng rng(2024);
    double worst_excess = -1.0;
    for (int trial = 0; trial < 10000; ++trial) {
        int n = 2 + int(rng.next_u64() % 19);  // N <= 20
        std::vector<std::array<int, 3>> edges;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j && rng.uniform() < 0.3) edges.push_back({i, j, 1});
        InterconnectionGraph g = InterconnectionGraph::from_edges(n, edges);
        double eps = rng.uniform(0.01, 0.9);
        const std::size_t nn = std::size_t(n);
        Matrix pure(nn, nn, 0.0);
        for (double& v : pure.data) v = rng.uniform(-2.0, 4.0);
        Matrix p = project_gains(pure, g, eps);
        for (int i = 0; i < n; ++i) {
            double row = p.at(std::size_t(i), std::size_t(i));
            for (int j : g.neighbors[std::size_t(i)]) row += p.at(std::size_t(i), std::size_t(j));
            worst_excess = std::max(worst_excess, row - (1.0 - eps));
        }
    }
    if (worst_excess > 1e-9) return fail(fmt("row sum exceeds 1-eps by %.2e", worst_excess));
    return fmt("10^4 matrices, worst excess %.2e", worst_excess);
}

// --- criterion 3: closed-form constants -------------------------------------------------

std::string criterion_constants() {
    auto [rho, c] = compute_rho_c(1.01, 0.05, 5);
    if (std::abs(rho - 0.998343) > 1e-6) return fail(fmt("rho = %.7f", rho));
    if (c != 1.01) return fail(fmt("c = %.7f", c));
    long long tr = compute_tr(0.15, 1.01, 1.0, 0.95);
    if (tr != 38) return fail(fmt("T_R = %.0f", double(tr)));
    return fmt("rho = %.6f, T_R = %.0f", rho, double(tr));
}

// --- criterion 4: margin formulas ---------------------------------------------------------

std::string criterion_margins() {
    InterconnectionGraph g = InterconnectionGraph::from_edges(2, {{0, 1, 1}});
    CertificateConstants constants;
    constants.p = 1.01;
    constants.psi = 0.1;
    Matrix gamma(2, 2);
    gamma.at(0, 0) = 0.4;
    gamma.at(0, 1) = 0.3;
    Margins m = compute_margins(constants, gamma, {2.0, 3.0}, {1.5, 1.0}, g);
    double eh = std::abs(m.l_h_upper[0] - 5.02);
    double er = std::abs(m.l_r_upper[0] - 4.8);
    if (eh > 1e-12) return fail(fmt("L_h error %.2e", eh));
    if (er > 1e-12) return fail(fmt("L_r error %.2e", er));
    return fmt("L_h err %.1e, L_r err %.1e", eh, er);
}

// --- criterion 5: soundness vs dense oracle ------------------------------------------------

std::string criterion_soundness() {
    auto t0 = std::chrono::steady_clock::now();
    int tau_of[5] = {1, 2, 1, 2, 1};
    unsigned long long checked = 0;
    for (int instance = 0; instance < 5; ++instance) {
        SoundnessFixture f =
            make_soundness_fixture(1000 + std::uint64_t(instance) * 17, tau_of[instance]);
        VerificationReport report = verify_certificate(f.cert, f.env.system, f.opts);
        if (report.verdict != Verdict::Verified)
            return fail("instance " + std::to_string(instance) + " not verified");
        OracleResult oracle = dense_oracle(f, report, 10);
        checked += oracle.checked;
        if (oracle.violations != 0)
            return fail("instance " + std::to_string(instance) + " has " +
                        std::to_string(oracle.violations) + " dense violations");
        Certificate corrupted = scale_certificate(f.cert, 1.5);
        if (verify_certificate(corrupted, f.env.system, f.opts).verdict != Verdict::Refuted)
            return fail("corrupted instance " + std::to_string(instance) + " not refuted");
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= 300.0) return fail(fmt("runtime %.0f s exceeds 5 min", secs));
    std::ostringstream out;
    out << "5 systems verified, " << checked << " dense points clean, corruptions refuted";
    return out.str();
}

// --- criterion 6: end-to-end CEGIS on the shipped fixture -----------------------------------

std::string criterion_cegis(Certificate* trained_out, RunConfig* cfg_out) {
    RunConfig cfg = RunConfig::from_file("fixtures/toy_pair.toml");
    BuiltEnv env = cfg.build_env();
    Certificate initial = make_certificate(env.system, cfg.constants, cfg.hidden_v, cfg.hidden_pi,
                                           cfg.share_by_class, cfg.seed);
    TrainingSet dataset =
        generate_dataset(env.system, *env.nominal, cfg.trajectories, cfg.horizon,
                         cfg.training_boxes(env.system), derive_seed(cfg.seed, "dataset", 0),
                         ExecMode::Parallel);
    CegisOptions opts = cfg.cegis_options(env.system, ExecMode::Parallel);
    CegisResult result =
        run_cegis(env.system, *env.nominal, std::move(initial), std::move(dataset), opts, nullptr);

    if (result.report.verdict != Verdict::Verified)
        return fail("toy fixture not verified within the cap (" +
                    std::to_string(result.state.iterations) + " iterations)");
    if (result.state.iterations > 20)
        return fail(fmt("needed %.0f iterations", double(result.state.iterations)));

    // 500-step closed loop under a bounded sinusoidal disturbance
    DisturbanceSignal sig;
    sig.kind = DisturbanceSignal::Kind::Sinusoidal;
    sig.frequency_hz = 1.0 / 15.0;
    sig.amplitude = cfg.custom.disturbance_max;
    Rng rng(17);
    std::vector<Vec> x0;
    for (int i = 0; i < env.system.agent_count(); ++i)
        x0.push_back({rng.uniform(-0.05, 0.05)});
    DelayHistory h0 = pad_history(env.system, x0);
    CertificateController controller(result.certificate, env.system);
    Trajectory traj = rollout(env.system, controller, h0, sig, 500, env.sample_period);

    EnvelopeCheck check = siss_envelope_check(traj, result.certificate, env.system,
                                              result.report.rho, result.report.c);
    if (!check.pass || check.worst_slack <= 0.0)
        return fail(fmt("envelope slack %.4f", check.worst_slack));

    LyapunovTrace trace = lyapunov_trace(traj, result.certificate, env.system);
    for (std::size_t k = std::size_t(result.report.t_r); k < trace.vmax.size(); ++k)
        if (trace.vmax[k] > cfg.R) return fail(fmt("V_max %.4f above R after T_R", trace.vmax[k]));

    *trained_out = result.certificate;
    *cfg_out = cfg;
    return fmt("verified in %.0f iterations, envelope slack %.4f",
               double(result.state.iterations), check.worst_slack);
}

// --- criterion 7: equivalence reduction --------------------------------------------------------

BuiltEnv chain_env(int n, const ToyParams& tp) { return make_toy_chain(n, tp); }

std::string criterion_reduction() {
    ToyParams tp;
    tp.a = 0.4;
    tp.b = 0.05;
    tp.gamma_self = tp.a + 0.05;
    tp.gamma_nbr = tp.b + 0.02;
    tp.constants.p = 1.2;
    tp.constants.epsilon = 0.3;
    tp.constants.psi = 0.65;
    tp.constants.a1 = 0.35;
    tp.constants.a2 = 0.85;

    CustomParams star;
    star.agent_count = 10;
    star.a = tp.a;
    star.b = tp.b;
    star.disturbance_max = tp.d_max;
    for (int i = 1; i < 10; ++i) star.edges.push_back({i, 0, 1});
    CustomParams ring = star;
    ring.edges.clear();
    for (int i = 0; i < 10; ++i) ring.edges.push_back({i, (i + 9) % 10, 1});

    BuiltEnv star_env = build_custom(star);
    BuiltEnv ring_env = build_custom(ring);
    BuiltEnv chain = chain_env(10, tp);

    int star_classes = partition_equivalent(star_env.system).class_count();
    int ring_classes = partition_equivalent(ring_env.system).class_count();
    int chain_classes = partition_equivalent(chain.system).class_count();
    if (star_classes != 2) return fail(fmt("star classes %.0f", double(star_classes)));
    if (ring_classes != 1) return fail(fmt("ring classes %.0f", double(ring_classes)));
    if (chain_classes != 3) return fail(fmt("chain classes %.0f", double(chain_classes)));

    // representative-only and all-agent verification verdicts must coincide
    for (const BuiltEnv* env : {&star_env, &ring_env, &chain}) {
        Certificate cert = make_analytic_certificate(env->system, tp);
        VerifyOptions opts;
        opts.R = 0.09;
        opts.grids.delta_out = 0.02;
        opts.grids.delta_in = 0.004;
        opts.grids.delta_classk = 0.002;
        opts.reach_samples = 4096;
        opts.seed = 3;
        opts.s0 = Box::centered(std::size_t(2 * 10), 0.05);
        VerifyOptions full = opts;
        full.reduction = false;
        Verdict reduced = verify_certificate(cert, env->system, opts).verdict;
        Verdict all = verify_certificate(cert, env->system, full).verdict;
        if (reduced != all) return fail("verdicts diverge on a fixture topology");
        Certificate corrupted = scale_certificate(cert, 1.5);
        Verdict reduced_bad = verify_certificate(corrupted, env->system, opts).verdict;
        Verdict all_bad = verify_certificate(corrupted, env->system, full).verdict;
        if (reduced_bad != all_bad) return fail("corrupted verdicts diverge on a fixture topology");
    }
    return "star 2, ring 1, chain 3; representative and full verdicts identical";
}

// --- criterion 8: scaling of verification time ---------------------------------------------------

double verify_seconds(const Certificate& cert, const InterconnectedSystem& system,
                      const VerifyOptions& opts) {
    auto t0 = std::chrono::steady_clock::now();
    VerificationReport report = verify_certificate(cert, system, opts);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (report.verdict != Verdict::Verified) return -1.0;
    return secs;
}

std::string criterion_scaling() {
    ToyParams tp;
    tp.a = 0.4;
    tp.b = 0.05;
    tp.gamma_self = tp.a + 0.05;
    tp.gamma_nbr = tp.b + 0.02;
    tp.constants.p = 1.2;
    tp.constants.epsilon = 0.3;
    tp.constants.psi = 0.65;
    tp.constants.a1 = 0.35;
    tp.constants.a2 = 0.85;

    BuiltEnv small = chain_env(10, tp);
    BuiltEnv large = chain_env(50, tp);
    Certificate cert_small = make_analytic_certificate(small.system, tp);
    Certificate cert_large = make_analytic_certificate(large.system, tp);

    auto options = [&](const BuiltEnv& env, bool reduction) {
        VerifyOptions opts;
        opts.R = 0.09;
        opts.grids.delta_out = 0.02;
        opts.grids.delta_in = 0.0015;  // sizes each inside task at ~1 s
        opts.grids.delta_classk = 0.002;
        opts.reach_samples = 4096;
        opts.seed = 11;
        opts.reduction = reduction;
        opts.exec = ExecMode::Serial;  // single-threaded timing is steadier
        opts.s0 = Box::centered(std::size_t(2 * env.system.agent_count()), 0.05);
        return opts;
    };

    double on_small = verify_seconds(cert_small, small.system, options(small, true));
    double on_large = verify_seconds(cert_large, large.system, options(large, true));
    double off_small = verify_seconds(cert_small, small.system, options(small, false));
    double off_large = verify_seconds(cert_large, large.system, options(large, false));
    if (on_small < 0 || on_large < 0 || off_small < 0 || off_large < 0)
        return fail("a scaling instance failed to verify");

    double on_ratio = on_large / on_small;
    double off_ratio = off_large / off_small;
    if (on_ratio > 1.5) return fail(fmt("reduced verify time ratio %.2f exceeds 1.5", on_ratio));
    if (off_ratio < 2.5)
        return fail(fmt("unreduced ratio %.2f shows no linear growth", off_ratio));
    return fmt("reduced ratio %.2f, unreduced ratio %.2f", on_ratio, off_ratio);
}

// --- criterion 9: benchmark sanity ------------------------------------------------------------------

std::string criterion_benchmarks() {
    // fixed points
    PlatoonParams pp;
    pp.cav_set = {0, 2};
    pp.hdv_set = {1};
    pp.eq_spacing = pp.ovm_shalf;
    pp.eq_velocity = 0.5 * pp.ovm_vfree;
    DroneParams dp;
    MicrogridParams mp;

    auto drift = [](const BuiltEnv& env) {
        std::vector<Vec> eq;
        for (const auto& a : env.system.agents) eq.push_back(a.equilibrium);
        DelayHistory h0 = pad_history(env.system, eq);
        Trajectory t = rollout(env.system, *env.nominal, h0, {}, 3, env.sample_period);
        double worst = 0.0;
        for (const auto& step : t.states)
            for (std::size_t i = 0; i < step.size(); ++i)
                for (std::size_t q = 0; q < step[i].size(); ++q)
                    worst = std::max(worst, std::abs(step[i][q] - eq[i][q]));
        return worst;
    };
    BuiltEnv platoon = build_platoon(pp, 3);
    BuiltEnv drone = build_drone(dp);
    BuiltEnv grid = build_microgrid(mp);
    double worst_drift = std::max({drift(platoon), drift(drone), drift(grid)});
    if (worst_drift >= 1e-12) return fail(fmt("equilibrium drift %.2e", worst_drift));

    // secant bounds, 1e5 samples per agent family
    auto secants = [](const InterconnectedSystem& system, int agent, const Box& state_box,
                      const Box& control_box, std::uint64_t seed) {
        Rng rng(seed);
        const AgentSpec& a = system.agents[std::size_t(agent)];
        const auto& nbrs = system.graph.neighbors[std::size_t(agent)];
        double worst = 0.0;
        for (int t = 0; t < 100000; ++t) {
            auto draw = [&]() {
                std::vector<Vec> nb;
                for (int j : nbrs) {
                    Box b(system.agents[std::size_t(j)].equilibrium,
                          system.agents[std::size_t(j)].equilibrium);
                    for (std::size_t q = 0; q < b.dim(); ++q) {
                        double half = 0.5 * (state_box.hi[q] - state_box.lo[q]);
                        b.lo[q] -= half;
                        b.hi[q] += half;
                    }
                    nb.push_back(rng.uniform_in(b));
                }
                return std::tuple(rng.uniform_in(state_box), rng.uniform_in(control_box), nb,
                                  rng.uniform_in(a.disturbance_box));
            };
            auto [o1, u1, n1, d1] = draw();
            auto [o2, u2, n2, d2] = draw();
            double dz2 = 0.0;
            auto acc = [&](const Vec& x, const Vec& y) {
                for (std::size_t q = 0; q < x.size(); ++q) dz2 += (x[q] - y[q]) * (x[q] - y[q]);
            };
            acc(o1, o2);
            acc(u1, u2);
            for (std::size_t j = 0; j < n1.size(); ++j) acc(n1[j], n2[j]);
            acc(d1, d2);
            if (dz2 < 1e-16) continue;
            Vec f1 = a.dynamics->step(o1, u1, n1, d1);
            Vec f2 = a.dynamics->step(o2, u2, n2, d2);
            double df2 = 0.0;
            for (std::size_t q = 0; q < f1.size(); ++q) df2 += (f1[q] - f2[q]) * (f1[q] - f2[q]);
            worst = std::max(worst, std::sqrt(df2 / dz2) - a.lipschitz_f);
        }
        return worst;  // positive = bound violated
    };
    double worst_secant = -1.0;
    Box pbox({pp.eq_spacing - 10.0, pp.eq_velocity - 5.0}, {pp.eq_spacing + 10.0, pp.eq_velocity + 5.0});
    for (int agent : {0, 1, 2})
        worst_secant = std::max(worst_secant, secants(platoon.system, agent, pbox,
                                                      Box::centered(1, 3.0), 100 + agent));
    Box gbox({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5});
    for (int agent = 0; agent < grid.system.agent_count(); ++agent)
        worst_secant = std::max(worst_secant, secants(grid.system, agent, gbox,
                                                      Box::centered(1, 1.0), 200 + agent));
    Box dbox(Vec(6, -2.0), Vec(6, 2.0));
    worst_secant = std::max(worst_secant, secants(drone.system, 1, dbox, Box::centered(3, 2.0), 300));
    if (worst_secant > 0.0) return fail(fmt("secant exceeds declared L_f by %.2e", worst_secant));

    // microgrid power at equal angles equals the loads exactly
    MicrogridParams two;
    two.inverter_count = 2;
    two.loads = {0.2, 0.3};
    std::vector<double> voltages{1.0, 1.0};
    if (microgrid_power(two, {0.4, 0.4}, voltages, 0) != 0.2 ||
        microgrid_power(two, {0.4, 0.4}, voltages, 1) != 0.3)
        return fail("power at equal angles differs from the loads");

    return fmt("drift %.1e, secant margin %.1e", worst_drift, -worst_secant);
}

// --- criterion 10: evaluation under the disturbance presets -------------------------------------------

std::string criterion_evaluation(const Certificate& trained, const RunConfig& cfg) {
    if (trained.v_nets.empty()) return fail("no verified certificate from criterion 6");
    BuiltEnv env = cfg.build_env();
    auto [rho, c] = compute_rho_c(trained.constants.p, trained.constants.epsilon,
                                  env.system.graph.tau_max);
    std::vector<Vec> eq;
    for (const auto& a : env.system.agents) eq.push_back(a.equilibrium);

    double worst_rmse = 0.0;
    double worst_slack = std::numeric_limits<double>::infinity();
    for (const auto& scenario : disturbance_presets(cfg.env_kind)) {
        Rng rng(derive_seed(7, "eval", 0));
        std::vector<Vec> x0;
        for (int i = 0; i < env.system.agent_count(); ++i) x0.push_back({rng.uniform(-0.05, 0.05)});
        DelayHistory h0 = pad_history(env.system, x0);
        CertificateController controller(trained, env.system);
        Trajectory traj = rollout(env.system, controller, h0, scenario.disturbance, 500,
                                  env.sample_period);
        double value = rmse(traj, eq);
        if (!std::isfinite(value)) return fail("RMSE not finite under " + scenario.name);
        worst_rmse = std::max(worst_rmse, value);
        EnvelopeCheck check = siss_envelope_check(traj, trained, env.system, rho, c);
        if (!check.pass) return fail("A.1 envelope violated under " + scenario.name);
        worst_slack = std::min(worst_slack, check.worst_slack);
        for (double v : check.vmax)
            if (!std::isfinite(v)) return fail("Lyapunov trace unbounded under " + scenario.name);
    }
    return fmt("finite RMSE (worst %.4f), envelope slack %.4f", worst_rmse, worst_slack);
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    Harness h;
    Certificate trained;
    RunConfig toy_cfg;

    h.run(1, "gradient correctness", criterion_gradients);
    h.run(2, "small-gain projection", criterion_small_gain);
    h.run(3, "closed-form constants", criterion_constants);
    h.run(4, "margin formulas", criterion_margins);
    h.run(5, "soundness vs dense oracle", criterion_soundness);
    h.run(6, "end-to-end CEGIS", [&] { return criterion_cegis(&trained, &toy_cfg); });
    h.run(7, "equivalence reduction", criterion_reduction);
    h.run(8, "verification scaling", criterion_scaling);
    h.run(9, "benchmark sanity", criterion_benchmarks);
    h.run(10, "evaluation under presets", [&] { return criterion_evaluation(trained, toy_cfg); });

    if (h.failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", h.failures);
    return 1;
}
