#pragma once

#include <map>
#include <string>
#include <vector>

#include "razcert/system.hpp"

namespace razcert {

/// Partition of agents into structural-equivalence classes. Members of one
/// class have identical dynamics labels and isomorphic one-hop neighborhoods
/// (incoming and outgoing, labels and delays), so they may share a single
/// Lyapunov network and coupling row.
struct EquivalenceClasses {
    std::vector<std::vector<int>> members;   // per class, ascending agent indices
    std::vector<int> representative;         // per class: lowest member
    std::vector<int> class_of;               // per agent
    /// Witness bijections: slot_map[agent][t] = agent index playing the role of
    /// the representative's t-th local slot (0 = self, then E_rep ascending).
    std::vector<std::vector<int>> slot_map;

    int class_count() const { return int(members.size()); }
    static EquivalenceClasses singletons(const InterconnectedSystem& system);
};

/// Color-refinement-style partition: agents are grouped by (dynamics label,
/// dimensions) plus the multisets of (label, delay) over incoming and outgoing
/// edges, then every candidate merge is validated by an explicit local
/// bijection. Sound and possibly finer than optimal.
EquivalenceClasses partition_equivalent(const InterconnectedSystem& system);

/// For node j of the target, node_maps[j] injects {j} union E_j into the
/// source system's nodes.
struct SubstructureMap {
    std::vector<std::map<int, int>> node_maps;
};

struct IsoCheckResult {
    bool valid = true;
    std::string violation;
};

/// Checks that the map preserves dynamics labels, maps neighborhoods onto
/// neighborhoods, keeps every per-edge delay identical, and that overlapping
/// neighborhoods land in consistent source equivalence classes.
IsoCheckResult check_substructure_iso(const InterconnectedSystem& source,
                                      const InterconnectedSystem& target,
                                      const SubstructureMap& map);

/// Builds a candidate map by matching each target node's local signature to a
/// source equivalence class (the workhorse behind the transfer subcommand).
SubstructureMap derive_substructure_map(const InterconnectedSystem& source,
                                        const InterconnectedSystem& target);

}  // namespace razcert
