#include "razcert/certificate.hpp"

#include <cmath>

namespace razcert {

void CertificateConstants::validate() const {
    if (!(p > 1.0)) throw ConfigError("constants: p must be > 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("constants: epsilon must lie in (0,1)");
    if (psi < 0.0) throw ConfigError("constants: psi must be >= 0");
    if (!(a1 > 0.0 && a2 > a1)) throw ConfigError("constants: need 0 < a1 < a2");
    if (eps_p < 0.0 || eps_d < 0.0) throw ConfigError("constants: margins must be >= 0");
}

Vec policy_equilibrium_input(const InterconnectedSystem& system, int agent) {
    Vec z = system.agents[std::size_t(agent)].equilibrium;
    for (int j : system.graph.neighbors[std::size_t(agent)]) {
        const Vec& e = system.agents[std::size_t(j)].equilibrium;
        z.insert(z.end(), e.begin(), e.end());
    }
    return z;
}

double Certificate::v_value(const InterconnectedSystem& system, int agent,
                            std::span<const double> raw_state) const {
    Vec shifted = sub(raw_state, system.agents[std::size_t(agent)].equilibrium);
    return v_of(agent).value(shifted);
}

Vec Certificate::control(const InterconnectedSystem& system, int agent,
                         std::span<const double> own,
                         const std::vector<Vec>& delayed_neighbors) const {
    Vec z(own.begin(), own.end());
    for (const Vec& nb : delayed_neighbors) z.insert(z.end(), nb.begin(), nb.end());
    Vec zeq = policy_equilibrium_input(system, agent);
    for (std::size_t q = 0; q < z.size(); ++q) z[q] -= zeq[q];
    return pi_nets[std::size_t(agent)].value(z);
}

void Certificate::sync_gamma_rows() {
    for (int c = 0; c < classes.class_count(); ++c) {
        int rep = classes.representative[std::size_t(c)];
        const auto& rep_slots = classes.slot_map[std::size_t(rep)];
        for (int m : classes.members[std::size_t(c)]) {
            if (m == rep) continue;
            const auto& mslots = classes.slot_map[std::size_t(m)];
            for (std::size_t col = 0; col < gamma_pure.cols; ++col)
                gamma_pure.at(std::size_t(m), col) = 0.0;
            for (std::size_t t = 0; t < rep_slots.size(); ++t)
                gamma_pure.at(std::size_t(m), std::size_t(mslots[t])) =
                    gamma_pure.at(std::size_t(rep), std::size_t(rep_slots[t]));
        }
    }
}

void Certificate::freeze(const InterconnectedSystem& system) {
    lipschitz_v.assign(v_nets.size(), 0.0);
    for (std::size_t c = 0; c < v_nets.size(); ++c) {
        v_nets[c].refresh_offset();
        lipschitz_v[c] = lipschitz_upper(v_nets[c].net, Box()).value;
    }
    lipschitz_pi.assign(pi_nets.size(), 0.0);
    for (std::size_t i = 0; i < pi_nets.size(); ++i) {
        pi_nets[i].refresh_offset();
        lipschitz_pi[i] = lipschitz_upper(pi_nets[i].net, Box()).value;
    }
    (void)system;
}

Certificate make_certificate(const InterconnectedSystem& system,
                             const CertificateConstants& constants,
                             const std::vector<std::size_t>& hidden_v,
                             const std::vector<std::size_t>& hidden_pi, bool share_by_class,
                             std::uint64_t seed) {
    constants.validate();
    Certificate cert;
    cert.constants = constants;
    cert.classes = share_by_class ? partition_equivalent(system)
                                  : EquivalenceClasses::singletons(system);
    cert.seed = seed;

    const int n = system.agent_count();
    cert.gamma_pure = Matrix(std::size_t(n), std::size_t(n));
    cert.gamma = Matrix(std::size_t(n), std::size_t(n));

    for (int c = 0; c < cert.classes.class_count(); ++c) {
        int rep = cert.classes.representative[std::size_t(c)];
        Rng rng(derive_seed(seed, "v_net", std::uint64_t(c)));
        LyapunovNet v;
        v.net = Mlp::create(std::size_t(system.agents[std::size_t(rep)].state_dim), hidden_v, 1, rng);
        v.refresh_offset();
        cert.v_nets.push_back(std::move(v));
    }

    cert.pi_nets.resize(std::size_t(n));
    for (int c = 0; c < cert.classes.class_count(); ++c) {
        int rep = cert.classes.representative[std::size_t(c)];
        Rng rng(derive_seed(seed, "pi_net", std::uint64_t(c)));
        std::size_t in_dim = std::size_t(system.agents[std::size_t(rep)].state_dim);
        for (int j : system.graph.neighbors[std::size_t(rep)])
            in_dim += std::size_t(system.agents[std::size_t(j)].state_dim);
        PolicyNet pi;
        pi.net = Mlp::create(in_dim, hidden_pi, std::size_t(system.agents[std::size_t(rep)].input_dim), rng);
        pi.refresh_offset();
        // class members share one policy so representative-only verification
        // covers the whole class
        for (int m : cert.classes.members[std::size_t(c)]) cert.pi_nets[std::size_t(m)] = pi;
    }

    // coupling seed: uniform positive weights on allowed entries, tied per class
    Rng grng(derive_seed(seed, "gamma", 0));
    for (int i = 0; i < n; ++i) {
        cert.gamma_pure.at(std::size_t(i), std::size_t(i)) = grng.uniform(0.1, 0.5);
        for (int j : system.graph.neighbors[std::size_t(i)])
            cert.gamma_pure.at(std::size_t(i), std::size_t(j)) = grng.uniform(0.05, 0.2);
    }
    cert.sync_gamma_rows();
    cert.freeze(system);
    return cert;
}

namespace {

bool same_network(const LyapunovNet& a, const LyapunovNet& b) {
    if (a.offset != b.offset) return false;
    if (a.net.layers.size() != b.net.layers.size()) return false;
    return serialize_weights(a.net) == serialize_weights(b.net);
}

}  // namespace

Certificate transfer_certificate(const Certificate& source_cert, const SubstructureMap& map,
                                 const InterconnectedSystem& source,
                                 const InterconnectedSystem& target) {
    IsoCheckResult check = check_substructure_iso(source, target, map);
    if (!check.valid) throw ConfigError("transfer rejected: " + check.violation);

    // certificate-level consistency: all source images of one target node must
    // carry one identical Lyapunov function (same class or equal weights)
    const int tn0 = target.agent_count();
    std::vector<int> first_image(std::size_t(tn0), -1);
    for (int j = 0; j < tn0; ++j) {
        for (const auto& [l, sl] : map.node_maps[std::size_t(j)]) {
            int& seen = first_image[std::size_t(l)];
            if (seen == -1) {
                seen = sl;
                continue;
            }
            int ca = source_cert.classes.class_of[std::size_t(seen)];
            int cb = source_cert.classes.class_of[std::size_t(sl)];
            if (ca != cb && !same_network(source_cert.v_nets[std::size_t(ca)],
                                          source_cert.v_nets[std::size_t(cb)]))
                throw ConfigError(
                    "transfer rejected: node " + std::to_string(l) +
                    " is covered by neighborhoods whose images carry different V networks");
        }
    }

    Certificate out;
    out.constants = source_cert.constants;
    out.classes = partition_equivalent(target);
    out.seed = source_cert.seed;
    out.verdict = "unverified";

    const int tn = target.agent_count();
    out.gamma = Matrix(std::size_t(tn), std::size_t(tn));
    out.gamma_pure = Matrix(std::size_t(tn), std::size_t(tn));
    for (int j = 0; j < tn; ++j) {
        const auto& m = map.node_maps[std::size_t(j)];
        int sj = m.at(j);
        out.gamma.at(std::size_t(j), std::size_t(j)) =
            source_cert.gamma.at(std::size_t(sj), std::size_t(sj));
        out.gamma_pure.at(std::size_t(j), std::size_t(j)) =
            source_cert.gamma_pure.at(std::size_t(sj), std::size_t(sj));
        for (int l : target.graph.neighbors[std::size_t(j)]) {
            int sl = m.at(l);
            out.gamma.at(std::size_t(j), std::size_t(l)) =
                source_cert.gamma.at(std::size_t(sj), std::size_t(sl));
            out.gamma_pure.at(std::size_t(j), std::size_t(l)) =
                source_cert.gamma_pure.at(std::size_t(sj), std::size_t(sl));
        }
    }

    // one V network per target class, taken from the source class of the
    // representative's image
    out.v_nets.resize(std::size_t(out.classes.class_count()));
    out.lipschitz_v.resize(std::size_t(out.classes.class_count()));
    for (int c = 0; c < out.classes.class_count(); ++c) {
        int rep = out.classes.representative[std::size_t(c)];
        int src = map.node_maps[std::size_t(rep)].at(rep);
        int src_class = source_cert.classes.class_of[std::size_t(src)];
        out.v_nets[std::size_t(c)] = source_cert.v_nets[std::size_t(src_class)];
        out.lipschitz_v[std::size_t(c)] = source_cert.lipschitz_v[std::size_t(src_class)];
    }
    out.pi_nets.resize(std::size_t(tn));
    out.lipschitz_pi.resize(std::size_t(tn));
    for (int j = 0; j < tn; ++j) {
        int sj = map.node_maps[std::size_t(j)].at(j);
        out.pi_nets[std::size_t(j)] = source_cert.pi_nets[std::size_t(sj)];
        out.lipschitz_pi[std::size_t(j)] = source_cert.lipschitz_pi[std::size_t(sj)];
    }
    return out;
}

// --- local layout ------------------------------------------------------------

LocalLayout LocalLayout::for_agent(const InterconnectedSystem& system, int agent) {
    LocalLayout lay;
    lay.agent = agent;
    lay.tau_max = system.graph.tau_max;
    lay.n_d = system.agents[std::size_t(agent)].disturbance_dim;
    lay.members.push_back(agent);
    for (int j : system.graph.neighbors[std::size_t(agent)]) lay.members.push_back(j);
    int off = 0;
    for (std::size_t m = 0; m < lay.members.size(); ++m) {
        int a = lay.members[m];
        lay.dims.push_back(system.agents[std::size_t(a)].state_dim);
        lay.delays.push_back(m == 0 ? 0 : system.graph.delay[std::size_t(agent)][std::size_t(a)]);
        lay.member_base.push_back(off);
        off += (lay.tau_max + 1) * system.agents[std::size_t(a)].state_dim;
    }
    lay.total = off + lay.n_d;
    return lay;
}

Vec LocalLayout::policy_input(std::span<const double> z) const {
    Vec in;
    policy_input_into(z, in);
    return in;
}

void LocalLayout::policy_input_into(std::span<const double> z, Vec& out) const {
    out.clear();
    auto self = block(z, 0, 0);
    out.insert(out.end(), self.begin(), self.end());
    for (std::size_t m = 1; m < members.size(); ++m) {
        auto nb = block(z, m, delays[m]);
        out.insert(out.end(), nb.begin(), nb.end());
    }
}

std::vector<Vec> LocalLayout::dynamics_neighbor_states(std::span<const double> z) const {
    std::vector<Vec> out;
    out.reserve(members.size() - 1);
    for (std::size_t m = 1; m < members.size(); ++m) {
        auto nb = block(z, m, delays[m]);
        out.emplace_back(nb.begin(), nb.end());
    }
    return out;
}

Vec LocalLayout::pack(const DelayHistory& history, std::span<const double> disturbance) const {
    Vec z(std::size_t(total), 0.0);
    for (std::size_t m = 0; m < members.size(); ++m)
        for (int s = 0; s <= tau_max; ++s) {
            const Vec& x = history.at(members[m], s);
            std::copy(x.begin(), x.end(), z.begin() + block_offset(m, s));
        }
    std::copy(disturbance.begin(), disturbance.end(), z.begin() + d_offset());
    return z;
}

}  // namespace razcert
