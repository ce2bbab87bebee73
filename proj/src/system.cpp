#include "razcert/system.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace razcert {

InterconnectionGraph InterconnectionGraph::from_edges(int n,
                                                      const std::vector<std::array<int, 3>>& edges) {
    InterconnectionGraph g;
    g.agent_count = n;
    g.adjacency.assign(std::size_t(n), std::vector<int>(std::size_t(n), 0));
    g.delay_bound.assign(std::size_t(n), std::vector<int>(std::size_t(n), -1));
    g.delay.assign(std::size_t(n), std::vector<int>(std::size_t(n), -1));
    for (const auto& e : edges) {
        int i = e[0], j = e[1], s = e[2];
        if (i < 0 || i >= n || j < 0 || j >= n)
            throw ConfigError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                              ") out of range for N=" + std::to_string(n));
        if (i == j) throw ConfigError("self-loop on agent " + std::to_string(i) +
                                      " not allowed; self-coupling is implicit");
        if (s < 1)
            throw ConfigError("delay for edge (" + std::to_string(i) + "," + std::to_string(j) +
                              ") must be >= 1, got " + std::to_string(s));
        g.adjacency[std::size_t(i)][std::size_t(j)] = 1;
        g.delay_bound[std::size_t(i)][std::size_t(j)] = s;
        g.delay[std::size_t(i)][std::size_t(j)] = s;
    }
    g.finalize();
    return g;
}

void InterconnectionGraph::finalize() {
    const std::size_t n = std::size_t(agent_count);
    neighbors.assign(n, {});
    tau_max = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (adjacency[i][i] != 0) throw ConfigError("self-loop on agent " + std::to_string(i));
        for (std::size_t j = 0; j < n; ++j) {
            if (adjacency[i][j] == 0) continue;
            neighbors[i].push_back(int(j));
            int tau = delay_bound[i][j];
            int s = delay[i][j];
            if (tau < 1) throw ConfigError("edge delay bound must be >= 1");
            if (s < 1 || s > tau)
                throw ConfigError("fixed delay s_ij for edge (" + std::to_string(i) + "," +
                                  std::to_string(j) + ") must lie in 1..tau_ij");
            tau_max = std::max(tau_max, tau);
        }
    }
}

void InterconnectedSystem::validate() const {
    if (int(agents.size()) != graph.agent_count)
        throw ConfigError("agent spec count does not match graph agent count");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto& a = agents[i];
        if (a.state_dim <= 0) throw ConfigError("agent " + std::to_string(i) + ": state_dim must be positive");
        if (a.input_dim <= 0) throw ConfigError("agent " + std::to_string(i) + ": input_dim must be positive");
        if (int(a.equilibrium.size()) != a.state_dim)
            throw DimensionError("agent " + std::to_string(i), "equilibrium",
                                 std::size_t(a.state_dim), a.equilibrium.size());
        if (int(a.disturbance_box.dim()) != a.disturbance_dim)
            throw DimensionError("agent " + std::to_string(i), "disturbance_box",
                                 std::size_t(a.disturbance_dim), a.disturbance_box.dim());
        for (std::size_t q = 0; q < a.disturbance_box.dim(); ++q)
            if (!std::isfinite(a.disturbance_box.lo[q]) || !std::isfinite(a.disturbance_box.hi[q]) ||
                a.disturbance_box.lo[q] > a.disturbance_box.hi[q])
                throw ConfigError("agent " + std::to_string(i) + ": disturbance box must be bounded");
        if (!a.dynamics) throw ConfigError("agent " + std::to_string(i) + ": missing dynamics");
    }
}

DelayHistory pad_history(const InterconnectedSystem& system, const std::vector<Vec>& initial_state) {
    const std::size_t n = std::size_t(system.agent_count());
    if (initial_state.size() != n)
        throw DimensionError("pad_history", "initial_state", n, initial_state.size());
    for (std::size_t i = 0; i < n; ++i)
        if (int(initial_state[i].size()) != system.agents[i].state_dim)
            throw DimensionError("pad_history agent " + std::to_string(i), "state",
                                 std::size_t(system.agents[i].state_dim), initial_state[i].size());
    DelayHistory h;
    h.lags.resize(std::size_t(system.graph.tau_max) + 1);
    h.lags[0] = initial_state;
    for (int s = 1; s <= system.graph.tau_max; ++s) {
        h.lags[std::size_t(s)].resize(n);
        for (std::size_t i = 0; i < n; ++i) h.lags[std::size_t(s)][i] = system.agents[i].equilibrium;
    }
    return h;
}

std::vector<Vec> delayed_neighbor_states(const InterconnectedSystem& system,
                                         const DelayHistory& history, int agent) {
    std::vector<Vec> out;
    const auto& nbrs = system.graph.neighbors[std::size_t(agent)];
    out.reserve(nbrs.size());
    for (int j : nbrs) {
        int s = system.graph.delay[std::size_t(agent)][std::size_t(j)];
        if (s > system.graph.tau_max || s >= history.depth())
            throw ConfigError("delay s_ij=" + std::to_string(s) + " for edge (" +
                              std::to_string(agent) + "," + std::to_string(j) +
                              ") exceeds history depth");
        out.push_back(history.at(j, s));
    }
    return out;
}

DelayHistory step_system(const InterconnectedSystem& system, const DelayHistory& history,
                         const std::vector<Vec>& controls, const std::vector<Vec>& disturbance) {
    const std::size_t n = std::size_t(system.agent_count());
    if (controls.size() != n) throw DimensionError("step_system", "controls", n, controls.size());
    if (disturbance.size() != n)
        throw DimensionError("step_system", "disturbance", n, disturbance.size());
    if (history.depth() != system.graph.tau_max + 1)
        throw DimensionError("step_system", "history depth", std::size_t(system.graph.tau_max + 1),
                             std::size_t(history.depth()));

    std::vector<Vec> next(n);
    for (std::size_t i = 0; i < n; ++i) {
        const AgentSpec& a = system.agents[i];
        if (int(controls[i].size()) != a.input_dim)
            throw DimensionError("step_system agent " + std::to_string(i), "control",
                                 std::size_t(a.input_dim), controls[i].size());
        if (int(disturbance[i].size()) != a.disturbance_dim)
            throw DimensionError("step_system agent " + std::to_string(i), "disturbance",
                                 std::size_t(a.disturbance_dim), disturbance[i].size());
        std::vector<Vec> nbrs = delayed_neighbor_states(system, history, int(i));
        next[i] = a.dynamics->step(history.at(int(i), 0), controls[i], nbrs, disturbance[i]);
        if (int(next[i].size()) != a.state_dim)
            throw DimensionError("step_system agent " + std::to_string(i), "next state",
                                 std::size_t(a.state_dim), next[i].size());
    }

    DelayHistory out;
    out.lags.resize(history.lags.size());
    out.lags[0] = std::move(next);
    for (std::size_t s = 1; s < history.lags.size(); ++s) out.lags[s] = history.lags[s - 1];
    return out;
}

bool DisturbanceSignal::applies_to(int agent) const {
    if (targets.empty()) return true;
    return std::find(targets.begin(), targets.end(), agent) != targets.end();
}

Vec DisturbanceSignal::sample(int agent, int k, int dim, double sample_period) const {
    Vec d(std::size_t(dim), 0.0);
    switch (kind) {
        case Kind::Zero:
            break;
        case Kind::Sinusoidal:
            if (applies_to(agent)) {
                double v = amplitude *
                           std::sin(2.0 * 3.141592653589793 * frequency_hz * sample_period * k);
                for (double& q : d) q = v;
            }
            break;
        case Kind::InitialImpulse:
            if (applies_to(agent) && k == 0)
                for (double& q : d) q = amplitude;
            break;
        case Kind::Custom:
            if (k < int(custom.size()) && agent < int(custom[std::size_t(k)].size()))
                d = custom[std::size_t(k)][std::size_t(agent)];
            break;
    }
    return d;
}

Trajectory rollout(const InterconnectedSystem& system, const Controller& controller,
                   const DelayHistory& history0, const DisturbanceSignal& disturbance, int horizon,
                   double sample_period) {
    if (horizon < 0) throw ConfigError("rollout horizon must be >= 0");
    const std::size_t n = std::size_t(system.agent_count());
    Trajectory traj;
    traj.states.reserve(std::size_t(horizon) + 1);
    traj.histories.reserve(std::size_t(horizon) + 1);
    DelayHistory h = history0;
    traj.states.push_back(h.lags[0]);
    traj.histories.push_back(h);
    for (int k = 0; k < horizon; ++k) {
        std::vector<Vec> controls(n), dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<Vec> nbrs = delayed_neighbor_states(system, h, int(i));
            controls[i] = controller.control(int(i), h.at(int(i), 0), nbrs);
            Vec d = disturbance.sample(int(i), k, system.agents[i].disturbance_dim, sample_period);
            Vec clipped = d;
            system.agents[i].disturbance_box.clip(clipped);
            for (std::size_t q = 0; q < d.size(); ++q)
                if (clipped[q] != d[q]) ++traj.clipped_samples;
            dist[i] = std::move(clipped);
        }
        h = step_system(system, h, controls, dist);
        traj.states.push_back(h.lags[0]);
        traj.controls.push_back(std::move(controls));
        traj.disturbances.push_back(std::move(dist));
        traj.histories.push_back(h);
    }
    return traj;
}

std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream out;
    out.precision(17);
    out << "step,agent,coord,value,control_flag\n";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        for (std::size_t i = 0; i < traj.states[k].size(); ++i)
            for (std::size_t q = 0; q < traj.states[k][i].size(); ++q)
                out << k << ',' << i << ',' << q << ',' << traj.states[k][i][q] << ",0\n";
        if (k < traj.controls.size())
            for (std::size_t i = 0; i < traj.controls[k].size(); ++i)
                for (std::size_t q = 0; q < traj.controls[k][i].size(); ++q)
                    out << k << ',' << i << ',' << q << ',' << traj.controls[k][i][q] << ",1\n";
    }
    return out.str();
}

}  // namespace razcert
