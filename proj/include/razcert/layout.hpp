#pragma once

#include <span>
#include <vector>

#include "razcert/system.hpp"

namespace razcert {

/// Canonical coordinate layout of the local delay-history variable z of one
/// agent: self first, then neighbors ascending, lags 0..tau_max ascending
/// within each agent, disturbance last. Every module (training tuples,
/// reachability projections, grid verification) uses this ordering.
struct LocalLayout {
    int agent = -1;
    std::vector<int> members;      // self, then E_i ascending
    std::vector<int> dims;         // state dim per member
    std::vector<int> delays;       // fixed delay s_ij per member (0 for self)
    std::vector<int> member_base;  // offset of each member's lag-0 block
    int tau_max = 0;
    int n_d = 0;
    int total = 0;                 // m_i^out

    static LocalLayout for_agent(const InterconnectedSystem& system, int agent);

    int block_offset(std::size_t member_pos, int lag) const {
        return member_base[member_pos] + lag * dims[member_pos];
    }
    int d_offset() const { return total - n_d; }

    std::span<const double> block(std::span<const double> z, std::size_t member_pos, int lag) const {
        return z.subspan(std::size_t(block_offset(member_pos, lag)), std::size_t(dims[member_pos]));
    }
    std::span<const double> d_block(std::span<const double> z) const {
        return z.subspan(std::size_t(d_offset()), std::size_t(n_d));
    }

    /// Controller input (own state, then each neighbor at its configured delay).
    Vec policy_input(std::span<const double> z) const;
    void policy_input_into(std::span<const double> z, Vec& out) const;
    /// Neighbor states fed to the dynamics, ascending neighbor order.
    std::vector<Vec> dynamics_neighbor_states(std::span<const double> z) const;

    /// Builds z from a delay history (plus a disturbance sample).
    Vec pack(const DelayHistory& history, std::span<const double> disturbance) const;
};

}  // namespace razcert
