#pragma once

// Shared fixtures: scalar linear systems and analytic |x|-shaped certificates
// whose exact values are known in closed form.

#include "razcert/certificate.hpp"
#include "razcert/envs.hpp"
#include "razcert/gains.hpp"

namespace razcert::testing {

/// Network computing alpha*|x| exactly for scalar input:
/// relu(x) + relu(-x) scaled by alpha on the output layer.
inline Mlp make_abs_net(double alpha) {
    Mlp net;
    Layer l1;
    l1.w = Matrix(2, 1);
    l1.w.at(0, 0) = 1.0;
    l1.w.at(1, 0) = -1.0;
    l1.b = {0.0, 0.0};
    Layer l2;
    l2.w = Matrix(1, 2);
    l2.w.at(0, 0) = alpha;
    l2.w.at(0, 1) = alpha;
    l2.b = {0.0};
    net.layers = {l1, l2};
    return net;
}

/// Zero affine policy of the given input width (single output).
inline Mlp make_zero_policy(std::size_t input_dim) {
    Mlp net;
    Layer l;
    l.w = Matrix(1, input_dim);
    l.b = {0.0};
    net.layers = {l};
    return net;
}

struct ToyParams {
    double a = 0.4;          // self coefficient
    double b = 0.08;         // coupling coefficient
    double d_max = 0.04;     // disturbance half width
    int delay = 1;
    int tau_max = 1;         // delay bound (== assignment here)
    double alpha = 0.6;      // V slope
    double gamma_self = 0.45;
    double gamma_nbr = 0.1;
    CertificateConstants constants{/*p=*/1.2, /*epsilon=*/0.3, /*psi=*/0.65,
                                   /*a1=*/0.35, /*a2=*/0.85, /*eps_p=*/1e-3, /*eps_d=*/1e-6};
};

/// Symmetric 2-agent scalar linear system x' = a x + b x_nbr(delayed) + u + d.
inline BuiltEnv make_toy_pair(const ToyParams& tp) {
    CustomParams params;
    params.agent_count = 2;
    params.a = tp.a;
    params.b = tp.b;
    params.c_u = 1.0;
    params.c_d = 1.0;
    params.k_feedback = 0.0;
    params.disturbance_max = tp.d_max;
    params.edges = {{0, 1, tp.delay}, {1, 0, tp.delay}};
    return build_custom(params);
}

/// Analytic certificate: V_i = alpha |x| exactly (shared across the class),
/// zero policies, explicit coupling row (gamma_self, gamma_nbr).
inline Certificate make_analytic_certificate(const InterconnectedSystem& system,
                                             const ToyParams& tp) {
    Certificate cert;
    cert.constants = tp.constants;
    cert.classes = partition_equivalent(system);

    const std::size_t n = std::size_t(system.agent_count());
    cert.gamma_pure = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        cert.gamma_pure.at(i, i) = tp.gamma_self;
        for (int j : system.graph.neighbors[i])
            cert.gamma_pure.at(i, std::size_t(j)) = tp.gamma_nbr;
    }
    cert.gamma = project_gains(cert.gamma_pure, system.graph, tp.constants.epsilon);

    for (int c = 0; c < cert.classes.class_count(); ++c) {
        LyapunovNet v;
        v.net = make_abs_net(tp.alpha);
        cert.v_nets.push_back(std::move(v));
    }
    for (int i = 0; i < system.agent_count(); ++i) {
        PolicyNet pi;
        std::size_t in_dim = 1 + system.graph.neighbors[std::size_t(i)].size();
        pi.net = make_zero_policy(in_dim);
        cert.pi_nets.push_back(std::move(pi));
    }
    cert.freeze(system);
    return cert;
}

/// Moves every network bias off zero so finite differences never straddle the
/// ReLU kink that the exact subgradient convention places there.
inline void jitter_biases(Certificate& cert, std::uint64_t seed) {
    Rng rng(seed);
    auto jitter = [&](Mlp& net) {
        for (auto& layer : net.layers)
            for (double& b : layer.b) b += rng.uniform(0.05, 0.25) * (rng.uniform() < 0.5 ? -1 : 1);
    };
    for (auto& v : cert.v_nets) {
        jitter(v.net);
        v.refresh_offset();
    }
    for (int c = 0; c < cert.classes.class_count(); ++c) {
        int rep = cert.classes.representative[std::size_t(c)];
        jitter(cert.pi_nets[std::size_t(rep)].net);
        cert.pi_nets[std::size_t(rep)].refresh_offset();
        for (int m : cert.classes.members[std::size_t(c)])
            if (m != rep) cert.pi_nets[std::size_t(m)] = cert.pi_nets[std::size_t(rep)];
    }
}

/// Chain of identical scalar linear agents (agent i depends on i-1).
inline BuiltEnv make_toy_chain(int n, const ToyParams& tp) {
    CustomParams params;
    params.agent_count = n;
    params.a = tp.a;
    params.b = tp.b;
    params.c_u = 1.0;
    params.c_d = 1.0;
    params.disturbance_max = tp.d_max;
    for (int i = 1; i < n; ++i) params.edges.push_back({i, i - 1, tp.delay});
    return build_custom(params);
}

}  // namespace razcert::testing
