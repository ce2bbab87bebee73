#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "razcert/types.hpp"

namespace razcert {

/// Directed interconnection topology with per-edge communication delays.
/// adjacency[i][j] = 1 means agent i depends on agent j's (delayed) state.
struct InterconnectionGraph {
    int agent_count = 0;
    std::vector<std::vector<int>> adjacency;
    std::vector<std::vector<int>> neighbors;    // derived: ascending j with adjacency[i][j]=1
    std::vector<std::vector<int>> delay_bound;  // tau_ij, -1 where no edge
    std::vector<std::vector<int>> delay;        // fixed assignment s_ij in 1..tau_ij
    int tau_max = 0;                            // max over edges of tau_ij

    static InterconnectionGraph from_edges(int n, const std::vector<std::array<int, 3>>& edges);
    void finalize();  // derives neighbors and tau_max, validates invariants
};

/// One agent's local step map x' = f(x, u, {x_j delayed}, d). Neighbor states
/// arrive in ascending neighbor-index order.
struct Dynamics {
    virtual ~Dynamics() = default;
    virtual Vec step(std::span<const double> own, std::span<const double> control,
                     const std::vector<Vec>& neighbor_states,
                     std::span<const double> disturbance) const = 0;
    /// d(next state)/d(control), needed to backpropagate through the step.
    virtual Matrix control_jacobian(std::span<const double> own, std::span<const double> control,
                                    const std::vector<Vec>& neighbor_states,
                                    std::span<const double> disturbance) const = 0;
};

struct AgentSpec {
    int state_dim = 0;
    int input_dim = 0;
    int disturbance_dim = 0;
    Box disturbance_box;        // W_i, bounded
    std::string dynamics_label; // used for structural equivalence
    double lipschitz_f = 0.0;   // open-loop step-map bound on the operating box
    Vec equilibrium;            // x_i*
    std::shared_ptr<const Dynamics> dynamics;
};

struct InterconnectedSystem {
    InterconnectionGraph graph;
    std::vector<AgentSpec> agents;

    int agent_count() const { return graph.agent_count; }
    void validate() const;
};

/// Per-agent ring of the last tau_max+1 states, lag 0 (current) first.
/// Values are immutable once constructed; step_system returns a new history.
struct DelayHistory {
    // lags[s][i] = state of agent i at lag s
    std::vector<std::vector<Vec>> lags;

    int depth() const { return int(lags.size()); }
    const Vec& at(int agent, int lag) const { return lags[std::size_t(lag)][std::size_t(agent)]; }
};

/// lag 0 holds initial_state; lags 1..tau_max hold each agent's equilibrium.
DelayHistory pad_history(const InterconnectedSystem& system, const std::vector<Vec>& initial_state);

DelayHistory step_system(const InterconnectedSystem& system, const DelayHistory& history,
                         const std::vector<Vec>& controls, const std::vector<Vec>& disturbance);

/// Control policy interface shared by nominal and neural controllers. Delayed
/// neighbor states arrive in ascending neighbor-index order at the configured
/// per-edge delays.
struct Controller {
    virtual ~Controller() = default;
    virtual Vec control(int agent, std::span<const double> own,
                        const std::vector<Vec>& delayed_neighbors) const = 0;
};

struct ZeroController : Controller {
    const InterconnectedSystem* system;
    explicit ZeroController(const InterconnectedSystem& s) : system(&s) {}
    Vec control(int agent, std::span<const double>, const std::vector<Vec>&) const override {
        return Vec(std::size_t(system->agents[std::size_t(agent)].input_dim), 0.0);
    }
};

/// Exogenous disturbance presets. Samples outside W_i are clipped
/// component-wise (clip count reported on the trajectory).
struct DisturbanceSignal {
    enum class Kind { Zero, Sinusoidal, InitialImpulse, Custom };
    Kind kind = Kind::Zero;
    double frequency_hz = 0.0;  // sinusoidal
    double amplitude = 0.0;     // state units
    std::vector<int> targets;   // empty = all agents
    std::vector<std::vector<Vec>> custom;  // [k][agent]

    bool applies_to(int agent) const;
    /// Raw (unclipped) sample for one agent at step k; T is the sampling period.
    Vec sample(int agent, int k, int dim, double sample_period) const;
};

struct Trajectory {
    std::vector<std::vector<Vec>> states;        // [k][agent], k = 0..T
    std::vector<std::vector<Vec>> controls;      // [k][agent], k = 0..T-1
    std::vector<std::vector<Vec>> disturbances;  // [k][agent], clipped values actually applied
    std::vector<DelayHistory> histories;         // [k], full delay state at each step
    long long clipped_samples = 0;
};

Trajectory rollout(const InterconnectedSystem& system, const Controller& controller,
                   const DelayHistory& history0, const DisturbanceSignal& disturbance,
                   int horizon, double sample_period);

/// Collects the delayed neighbor states of one agent from a history.
std::vector<Vec> delayed_neighbor_states(const InterconnectedSystem& system,
                                         const DelayHistory& history, int agent);

/// CSV export: header step,agent,coord,value,control_flag; one row per scalar.
std::string trajectory_csv(const Trajectory& traj);

}  // namespace razcert
