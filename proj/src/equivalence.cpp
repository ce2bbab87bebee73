#include "razcert/equivalence.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

namespace razcert {

namespace {

// One neighbor's role as seen from an agent: (label, state dim, fixed delay,
// delay bound). Sorted multisets of these make up the local signature.
using EdgeSig = std::tuple<std::string, int, int, int>;

struct LocalSignature {
    std::string label;
    int state_dim, input_dim, disturbance_dim;
    std::vector<EdgeSig> in_edges;
    std::vector<EdgeSig> out_edges;

    auto key() const { return std::tie(label, state_dim, input_dim, disturbance_dim, in_edges, out_edges); }
    bool operator<(const LocalSignature& o) const { return key() < o.key(); }
    bool operator==(const LocalSignature& o) const { return key() == o.key(); }
};

LocalSignature signature_of(const InterconnectedSystem& system, int i) {
    const auto& g = system.graph;
    LocalSignature sig;
    const AgentSpec& a = system.agents[std::size_t(i)];
    sig.label = a.dynamics_label;
    sig.state_dim = a.state_dim;
    sig.input_dim = a.input_dim;
    sig.disturbance_dim = a.disturbance_dim;
    for (int j : g.neighbors[std::size_t(i)]) {
        const AgentSpec& nb = system.agents[std::size_t(j)];
        sig.in_edges.emplace_back(nb.dynamics_label, nb.state_dim, g.delay[std::size_t(i)][std::size_t(j)],
                                  g.delay_bound[std::size_t(i)][std::size_t(j)]);
    }
    for (int j = 0; j < g.agent_count; ++j) {
        if (g.adjacency[std::size_t(j)][std::size_t(i)] == 0) continue;
        const AgentSpec& dep = system.agents[std::size_t(j)];
        sig.out_edges.emplace_back(dep.dynamics_label, dep.state_dim, g.delay[std::size_t(j)][std::size_t(i)],
                                   g.delay_bound[std::size_t(j)][std::size_t(i)]);
    }
    std::sort(sig.in_edges.begin(), sig.in_edges.end());
    std::sort(sig.out_edges.begin(), sig.out_edges.end());
    return sig;
}

/// Explicit local validation of a candidate merge: a bijection from the
/// representative's in-neighborhood onto the member's preserving label,
/// dimensions, and delays. Neighbors are paired in sorted (signature, index)
/// order; equal multisets guarantee the pairing is a valid bijection.
bool validate_pair(const InterconnectedSystem& system, int rep, int member,
                   std::vector<int>& member_order) {
    const auto& g = system.graph;
    const auto& rn = g.neighbors[std::size_t(rep)];
    const auto& mn = g.neighbors[std::size_t(member)];
    if (rn.size() != mn.size()) return false;
    auto edge_key = [&](int i, int j) {
        const AgentSpec& nb = system.agents[std::size_t(j)];
        return std::tuple(nb.dynamics_label, nb.state_dim,
                          g.delay[std::size_t(i)][std::size_t(j)],
                          g.delay_bound[std::size_t(i)][std::size_t(j)], j);
    };
    std::vector<int> rs(rn.begin(), rn.end()), ms(mn.begin(), mn.end());
    std::sort(rs.begin(), rs.end(), [&](int a, int b) { return edge_key(rep, a) < edge_key(rep, b); });
    std::sort(ms.begin(), ms.end(),
              [&](int a, int b) { return edge_key(member, a) < edge_key(member, b); });
    for (std::size_t t = 0; t < rs.size(); ++t) {
        const AgentSpec& ra = system.agents[std::size_t(rs[t])];
        const AgentSpec& ma = system.agents[std::size_t(ms[t])];
        if (ra.dynamics_label != ma.dynamics_label || ra.state_dim != ma.state_dim) return false;
        if (g.delay[std::size_t(rep)][std::size_t(rs[t])] !=
            g.delay[std::size_t(member)][std::size_t(ms[t])])
            return false;
    }
    // member_order[t] = member-side agent matching the rep's t-th layout slot
    // (slot order is: self, then E_rep ascending)
    member_order.assign(rn.size() + 1, -1);
    member_order[0] = member;
    for (std::size_t t = 0; t < rs.size(); ++t) {
        auto pos = std::find(rn.begin(), rn.end(), rs[t]) - rn.begin();
        member_order[std::size_t(pos) + 1] = ms[t];
    }
    return true;
}

}  // namespace

EquivalenceClasses EquivalenceClasses::singletons(const InterconnectedSystem& system) {
    EquivalenceClasses c;
    int n = system.agent_count();
    for (int i = 0; i < n; ++i) {
        c.members.push_back({i});
        c.representative.push_back(i);
        c.class_of.push_back(i);
        std::vector<int> order;
        order.push_back(i);
        for (int j : system.graph.neighbors[std::size_t(i)]) order.push_back(j);
        c.slot_map.push_back(order);
    }
    return c;
}

EquivalenceClasses partition_equivalent(const InterconnectedSystem& system) {
    int n = system.agent_count();
    std::map<LocalSignature, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[signature_of(system, i)].push_back(i);

    EquivalenceClasses out;
    out.class_of.assign(std::size_t(n), -1);
    out.slot_map.assign(std::size_t(n), {});

    // deterministic class order: by lowest member index
    std::vector<std::vector<int>> candidate;
    for (auto& [sig, members] : groups) candidate.push_back(members);
    std::sort(candidate.begin(), candidate.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    for (auto& group : candidate) {
        // validate every member against the group's representative; failures
        // split into their own class (sound, never unsound)
        while (!group.empty()) {
            int rep = group.front();
            std::vector<int> cls{rep}, rest;
            std::vector<int> rep_order;
            validate_pair(system, rep, rep, rep_order);
            out.slot_map[std::size_t(rep)] = rep_order;
            for (std::size_t gi = 1; gi < group.size(); ++gi) {
                int m = group[gi];
                std::vector<int> order;
                if (validate_pair(system, rep, m, order)) {
                    cls.push_back(m);
                    out.slot_map[std::size_t(m)] = order;
                } else {
                    rest.push_back(m);
                }
            }
            int cid = int(out.members.size());
            for (int m : cls) out.class_of[std::size_t(m)] = cid;
            out.members.push_back(std::move(cls));
            out.representative.push_back(rep);
            group = std::move(rest);
        }
    }
    return out;
}

IsoCheckResult check_substructure_iso(const InterconnectedSystem& source,
                                      const InterconnectedSystem& target,
                                      const SubstructureMap& map) {
    auto fail = [](const std::string& msg) {
        IsoCheckResult r;
        r.valid = false;
        r.violation = msg;
        return r;
    };
    int tn = target.agent_count();
    if (int(map.node_maps.size()) != tn) return fail("map must cover every target node");

    for (int j = 0; j < tn; ++j) {
        const auto& m = map.node_maps[std::size_t(j)];
        auto it = m.find(j);
        if (it == m.end()) return fail("node " + std::to_string(j) + ": map does not cover the node itself");
        int sj = it->second;
        if (sj < 0 || sj >= source.agent_count())
            return fail("node " + std::to_string(j) + ": image out of range");
        if (target.agents[std::size_t(j)].dynamics_label != source.agents[std::size_t(sj)].dynamics_label)
            return fail("node " + std::to_string(j) + ": dynamics label differs from source node " +
                        std::to_string(sj));

        const auto& tn_nbrs = target.graph.neighbors[std::size_t(j)];
        std::set<int> image;
        for (int l : tn_nbrs) {
            auto lit = m.find(l);
            if (lit == m.end())
                return fail("node " + std::to_string(j) + ": neighbor " + std::to_string(l) +
                            " not covered by the local map");
            int sl = lit->second;
            if (!image.insert(sl).second)
                return fail("node " + std::to_string(j) + ": local map is not injective");
            if (source.graph.adjacency[std::size_t(sj)][std::size_t(sl)] == 0)
                return fail("node " + std::to_string(j) + ": image of neighbor " + std::to_string(l) +
                            " is not a neighbor of source node " + std::to_string(sj));
            if (target.agents[std::size_t(l)].dynamics_label !=
                source.agents[std::size_t(sl)].dynamics_label)
                return fail("node " + std::to_string(j) + ": neighbor " + std::to_string(l) +
                            " label differs from its image");
            int td = target.graph.delay[std::size_t(j)][std::size_t(l)];
            int sd = source.graph.delay[std::size_t(sj)][std::size_t(sl)];
            if (td != sd) {
                std::ostringstream msg;
                msg << "edge (" << j << "," << l << "): delay " << td
                    << " differs from source edge (" << sj << "," << sl << ") delay " << sd;
                return fail(msg.str());
            }
        }
        // onto: the image must exhaust the source neighborhood
        if (image.size() != source.graph.neighbors[std::size_t(sj)].size())
            return fail("node " + std::to_string(j) + ": neighborhood does not map onto E_" +
                        std::to_string(sj));
    }

    // cross-neighborhood consistency: where two closed neighborhoods overlap,
    // the images must at least share a dynamics label (certificate-level
    // consistency, identical V networks on the straddled images, is enforced
    // when a concrete certificate is transferred)
    std::vector<int> assigned(std::size_t(tn), -1);
    for (int j = 0; j < tn; ++j) {
        for (const auto& [l, sl] : map.node_maps[std::size_t(j)]) {
            if (assigned[std::size_t(l)] == -1) {
                assigned[std::size_t(l)] = sl;
            } else if (source.agents[std::size_t(assigned[std::size_t(l)])].dynamics_label !=
                       source.agents[std::size_t(sl)].dynamics_label) {
                return fail("node " + std::to_string(l) +
                            ": overlapping neighborhood maps disagree on the source dynamics");
            }
        }
    }
    return {};
}

SubstructureMap derive_substructure_map(const InterconnectedSystem& source,
                                        const InterconnectedSystem& target) {
    EquivalenceClasses scls = partition_equivalent(source);
    std::map<LocalSignature, int> sig_to_rep;
    for (int c = 0; c < scls.class_count(); ++c)
        sig_to_rep[signature_of(source, scls.representative[std::size_t(c)])] =
            scls.representative[std::size_t(c)];

    SubstructureMap map;
    map.node_maps.resize(std::size_t(target.agent_count()));
    for (int j = 0; j < target.agent_count(); ++j) {
        auto sig = signature_of(target, j);
        auto it = sig_to_rep.find(sig);
        if (it == sig_to_rep.end())
            throw ConfigError("transfer: no source node matches the local structure of target node " +
                              std::to_string(j));
        int rep = it->second;
        auto& m = map.node_maps[std::size_t(j)];
        m[j] = rep;
        // pair neighbors in sorted (label, dims, delay) order
        const auto& g = target.graph;
        const auto& sg = source.graph;
        auto key = [](const InterconnectedSystem& sys, int i, int nb) {
            const AgentSpec& a = sys.agents[std::size_t(nb)];
            return std::tuple(a.dynamics_label, a.state_dim,
                              sys.graph.delay[std::size_t(i)][std::size_t(nb)], nb);
        };
        std::vector<int> tn(g.neighbors[std::size_t(j)]);
        std::vector<int> sn(sg.neighbors[std::size_t(rep)]);
        if (tn.size() != sn.size())
            throw ConfigError("transfer: neighborhood size mismatch at target node " + std::to_string(j));
        std::sort(tn.begin(), tn.end(), [&](int a, int b) { return key(target, j, a) < key(target, j, b); });
        std::sort(sn.begin(), sn.end(), [&](int a, int b) { return key(source, rep, a) < key(source, rep, b); });
        for (std::size_t t = 0; t < tn.size(); ++t) m[tn[t]] = sn[t];
    }
    return map;
}

}  // namespace razcert
