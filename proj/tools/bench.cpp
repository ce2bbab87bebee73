// Benchmark of the OpenMP grid/rollout/gradient kernels against the serial
// reference path. Both paths share the chunk structure, so outputs are
// bit-identical; this target reports wall-clock speedups.

#include <chrono>
#include <cstdio>

#include "razcert/certificate.hpp"
#include "razcert/envs.hpp"
#include "razcert/reach.hpp"
#include "razcert/synthesis.hpp"
#include "razcert/verify.hpp"

using namespace razcert;

namespace {

double seconds(const std::function<void()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

struct BenchSetup {
    BuiltEnv env;
    Certificate cert;
};

BenchSetup make_setup(int agents) {
    CustomParams params;
    params.agent_count = agents;
    params.a = 0.4;
    params.b = 0.05;
    params.k_feedback = 0.0;
    params.disturbance_max = 0.02;
    for (int i = 1; i < agents; ++i) params.edges.push_back({i, i - 1, 1});

    BenchSetup s{build_custom(params), {}};
    CertificateConstants constants;
    constants.a1 = 0.1;
    constants.a2 = 2.0;
    constants.epsilon = 0.3;
    constants.psi = 0.5;
    s.cert = make_certificate(s.env.system, constants, {16, 16}, {}, true, 7);
    return s;
}

}  // namespace

int main() {
    BenchSetup s = make_setup(8);
    const InterconnectedSystem& system = s.env.system;

    GridSpec grids;
    grids.delta_in = 0.004;
    Margins margins;
    {
        std::vector<double> l_v(std::size_t(system.agent_count())),
            l_f(std::size_t(system.agent_count()));
        for (int i = 0; i < system.agent_count(); ++i) {
            l_v[std::size_t(i)] = s.cert.lipschitz_v_of(i);
            double l_pi = s.cert.lipschitz_pi[std::size_t(i)];
            l_f[std::size_t(i)] = system.agents[std::size_t(i)].lipschitz_f *
                                  std::sqrt(1.0 + l_pi * l_pi);
        }
        margins = compute_margins(s.cert.constants, s.cert.gamma, l_v, l_f, system.graph);
    }

    EquivalenceClasses classes = partition_equivalent(system);
    VerifyClass cls;
    cls.representative = classes.representative[1];  // interior chain class
    cls.members = classes.members[1];
    for (int m : cls.members) cls.slot_map.push_back(classes.slot_map[std::size_t(m)]);

    std::printf("%-28s %12s %12s %8s\n", "kernel", "serial [s]", "openmp [s]", "speedup");

    {
        Stage2Stats a, b;
        double ts = seconds([&] { a = stage2_verify(s.cert, system, cls, 0.15, grids, margins, ExecMode::Serial); });
        double tp = seconds([&] { b = stage2_verify(s.cert, system, cls, 0.15, grids, margins, ExecMode::Parallel); });
        bool same = a.via_decrement == b.via_decrement && a.via_invariance == b.via_invariance &&
                    a.worst_slack == b.worst_slack;
        std::printf("%-28s %12.3f %12.3f %7.2fx%s\n", "stage-2 grid sweep", ts, tp, ts / tp,
                    same ? "" : "  MISMATCH");
    }

    {
        Box s0 = Box::centered(system.agents.size() * 2, 0.3);
        ReachEnvelope ea, eb;
        double ts = seconds([&] {
            ea = build_envelope(system, *s.env.nominal, s0, 40, 4096, 0.05, 1, ExecMode::Serial);
        });
        double tp = seconds([&] {
            eb = build_envelope(system, *s.env.nominal, s0, 40, 4096, 0.05, 1, ExecMode::Parallel);
        });
        bool same = true;
        for (std::size_t k = 0; k < ea.boxes.size(); ++k)
            same &= ea.boxes[k].lo == eb.boxes[k].lo && ea.boxes[k].hi == eb.boxes[k].hi;
        std::printf("%-28s %12.3f %12.3f %7.2fx%s\n", "reach envelope rollouts", ts, tp, ts / tp,
                    same ? "" : "  MISMATCH");
    }

    {
        auto boxes = std::vector<Box>(system.agents.size(), Box::centered(1, 0.3));
        TrainingSet data = generate_dataset(system, *s.env.nominal, 400, 30, boxes, 11,
                                            ExecMode::Parallel);
        std::vector<std::size_t> batch(data.train_idx.begin(), data.train_idx.end());
        LossWeights weights;
        LossGradients ga, gb;
        LossBreakdown la, lb;
        double ts = seconds([&] {
            la = total_loss(system, *s.env.nominal, s.cert, data, batch, weights, &ga, ExecMode::Serial);
        });
        double tp = seconds([&] {
            lb = total_loss(system, *s.env.nominal, s.cert, data, batch, weights, &gb, ExecMode::Parallel);
        });
        bool same = la.total == lb.total;
        std::printf("%-28s %12.3f %12.3f %7.2fx%s\n", "batch loss + gradients", ts, tp, ts / tp,
                    same ? "" : "  MISMATCH");
    }
    return 0;
}
