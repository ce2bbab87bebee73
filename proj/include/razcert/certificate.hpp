#pragma once

#include <vector>

#include "razcert/equivalence.hpp"
#include "razcert/layout.hpp"
#include "razcert/mlp.hpp"
#include "razcert/system.hpp"

namespace razcert {

/// Scalars of the certificate: Razumikhin factor p > 1, small-gain slack
/// epsilon, disturbance gain psi, linear class-K slopes a1 < a2, and the
/// training margins eps_p / eps_d.
struct CertificateConstants {
    double p = 1.01;
    double epsilon = 0.05;
    double psi = 0.1;
    double a1 = 0.01;
    double a2 = 10.0;
    double eps_p = 1e-3;
    double eps_d = 1e-6;

    void validate() const;
};

/// Lyapunov head: V(x) = net(x - x_eq) - offset with offset = net(0), so the
/// equilibrium value is exactly zero.
struct LyapunovNet {
    Mlp net;
    double offset = 0.0;

    void refresh_offset() { offset = forward(net, Vec(net.input_dim(), 0.0))[0]; }
    double value(std::span<const double> shifted) const { return forward(net, shifted)[0] - offset; }
};

/// Policy head: pi(z) = net(z - z_eq) - offset with offset = net(0); the
/// control at the equilibrium input is exactly zero.
struct PolicyNet {
    Mlp net;
    Vec offset;

    void refresh_offset() { offset = forward(net, Vec(net.input_dim(), 0.0)); }
    Vec value(std::span<const double> shifted) const {
        Vec u = forward(net, shifted);
        for (std::size_t q = 0; q < u.size(); ++q) u[q] -= offset[q];
        return u;
    }
};

struct Certificate {
    CertificateConstants constants;
    Matrix gamma;       // projected coupling gains, N x N
    Matrix gamma_pure;  // learnable pre-projection matrix
    EquivalenceClasses classes;
    std::vector<LyapunovNet> v_nets;   // one per class
    std::vector<PolicyNet> pi_nets;    // one per agent (class members share weights)
    std::vector<double> lipschitz_v;   // per class, global norm-product bounds
    std::vector<double> lipschitz_pi;  // per agent

    // provenance
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string verdict = "unverified";
    std::string report_digest;

    const LyapunovNet& v_of(int agent) const {
        return v_nets[std::size_t(classes.class_of[std::size_t(agent)])];
    }
    double lipschitz_v_of(int agent) const {
        return lipschitz_v[std::size_t(classes.class_of[std::size_t(agent)])];
    }

    /// V_i evaluated on a raw state (shift by the agent's equilibrium).
    double v_value(const InterconnectedSystem& system, int agent,
                   std::span<const double> raw_state) const;

    /// pi_i evaluated on raw (own, delayed neighbor) inputs.
    Vec control(const InterconnectedSystem& system, int agent, std::span<const double> own,
                const std::vector<Vec>& delayed_neighbors) const;

    /// Recomputes offsets and Lipschitz bounds after training.
    void freeze(const InterconnectedSystem& system);

    /// Copies each representative's gamma_pure row to its class members
    /// through the witness slot maps, so shared certificates carry identical
    /// coupling rows.
    void sync_gamma_rows();
};

/// Fresh certificate with seeded Glorot-uniform networks, one V per class and
/// one policy per agent, and zero coupling seed.
Certificate make_certificate(const InterconnectedSystem& system, const CertificateConstants& constants,
                             const std::vector<std::size_t>& hidden_v,
                             const std::vector<std::size_t>& hidden_pi, bool share_by_class,
                             std::uint64_t seed);

/// Equilibrium input of agent i's policy (own equilibrium, then neighbor
/// equilibria ascending).
Vec policy_equilibrium_input(const InterconnectedSystem& system, int agent);

/// Builds a certificate for the target system from a source certificate and a
/// valid substructure map: target V networks reference the source class of
/// each node's image, policies follow the node images, and coupling gains are
/// copied through the local maps (row sums are preserved, so the small-gain
/// condition carries over). Rejects invalid maps with the violation message.
Certificate transfer_certificate(const Certificate& source_cert, const SubstructureMap& map,
                                 const InterconnectedSystem& source,
                                 const InterconnectedSystem& target);

struct CertificateController : Controller {
    const Certificate* cert;
    const InterconnectedSystem* system;

    CertificateController(const Certificate& c, const InterconnectedSystem& s)
        : cert(&c), system(&s) {}
    Vec control(int agent, std::span<const double> own,
                const std::vector<Vec>& delayed_neighbors) const override {
        return cert->control(*system, agent, own, delayed_neighbors);
    }
};

}  // namespace razcert
