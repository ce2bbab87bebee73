#pragma once

#include <string>
#include <vector>

#include "razcert/layout.hpp"
#include "razcert/parallel.hpp"
#include "razcert/system.hpp"

namespace razcert {

/// Per-step axis-aligned boxes over the delay-embedded global state
/// col(x_k, ..., x_{k-tau_max}); lag-major, agents ascending inside each lag.
struct ReachEnvelope {
    std::vector<Box> boxes;        // index k = 0..horizon
    std::vector<int> state_dims;   // per agent
    int tau_max = 0;
    double inflation = 0.0;
    int samples = 0;

    int horizon() const { return int(boxes.size()) - 1; }
    std::size_t embedded_dim() const;
    /// Offset of (agent, lag) inside the embedded layout.
    std::size_t slice_offset(int agent, int lag) const;
};

/// Samples M initial delay histories from s0 (box corners on the first
/// min(dim,12) coordinates first, remainder uniform), rolls the closed loop
/// out with zero disturbance, and hulls each step coordinate-wise. Every
/// interval is then widened symmetrically by eta * width (at least 1e-6 on
/// each side).
ReachEnvelope build_envelope(const InterconnectedSystem& system, const Controller& controller,
                             const Box& s0, int horizon, int samples, double inflation,
                             std::uint64_t seed, ExecMode mode);

/// Coordinates of agent j at lag s from the step-k box.
Box project(const ReachEnvelope& envelope, int k, int agent, int lag);

/// Hull of one agent's interval over every step and lag (the class-K domain).
Box agent_hull(const ReachEnvelope& envelope, int agent);

struct LocalDelayDomain {
    int agent = 0;
    int k = 0;
    LocalLayout layout;
    Box box;  // dimension m_i^out, disturbance intervals appended last
};

/// Assembles the reachability-constrained delay domain of one agent at step k:
/// intervals per (member, lag) in canonical layout order, then W_i.
LocalDelayDomain local_domain(const ReachEnvelope& envelope, const InterconnectedSystem& system,
                              int agent, int k);

/// Counts fresh validation rollouts leaving the envelope (expected 0).
long long envelope_violations(const ReachEnvelope& envelope, const InterconnectedSystem& system,
                              const Controller& controller, const Box& s0, int samples,
                              std::uint64_t seed);

/// CSV: k,coord,lo,hi
std::string envelope_csv(const ReachEnvelope& envelope);

}  // namespace razcert
