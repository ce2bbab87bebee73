#include "razcert/envs.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace razcert {

namespace {

double frobenius(const std::vector<Vec>& rows) {
    double s = 0.0;
    for (const auto& r : rows)
        for (double v : r) s += v * v;
    return std::sqrt(s);
}

}  // namespace

// --- platoon -----------------------------------------------------------------

double PlatoonParams::ovm_desired_speed(double spacing) const {
    return 0.5 * ovm_vfree * (1.0 + std::tanh(ovm_shape * (spacing - ovm_shalf)));
}

double PlatoonParams::ovm_accel(double spacing, double velocity) const {
    return ovm_sensitivity * (ovm_desired_speed(spacing) - velocity);
}

std::array<double, 2> platoon_step(const PlatoonParams& p, double s, double v, double u,
                                   double v_prev, double d, bool hdv) {
    double accel = hdv ? p.ovm_accel(s, v) : u;
    return {s + p.sample_period * (v_prev - v), v + p.sample_period * accel + d};
}

namespace {

struct PlatoonDynamics : Dynamics {
    PlatoonParams params;
    bool hdv;
    bool head;  // no predecessor; tracks the equilibrium velocity

    Vec step(std::span<const double> own, std::span<const double> u, const std::vector<Vec>& nbrs,
             std::span<const double> d) const override {
        double v_prev = head ? params.eq_velocity : nbrs[0][1];
        auto [s2, v2] = platoon_step(params, own[0], own[1], u.empty() ? 0.0 : u[0], v_prev, d[0], hdv);
        return {s2, v2};
    }

    Matrix control_jacobian(std::span<const double>, std::span<const double>,
                            const std::vector<Vec>&, std::span<const double>) const override {
        Matrix j(2, 1);
        j.at(1, 0) = hdv ? 0.0 : params.sample_period;
        return j;
    }
};

struct PlatoonNominal : Controller {
    PlatoonParams params;
    std::vector<bool> is_hdv;
    std::vector<bool> is_head;

    Vec control(int agent, std::span<const double> own,
                const std::vector<Vec>& delayed_nbrs) const override {
        if (is_hdv[std::size_t(agent)]) return {0.0};
        double v_prev = is_head[std::size_t(agent)] ? params.eq_velocity : delayed_nbrs[0][1];
        double u = -params.k_s * (own[0] - params.eq_spacing) -
                   params.k_v * (own[1] - params.eq_velocity) + params.k_p * (v_prev - own[1]);
        return {u};
    }
};

}  // namespace

BuiltEnv build_platoon(const PlatoonParams& params, int vehicle_count) {
    if (params.sample_period <= 0.0) throw ConfigError("platoon: sample period must be positive");
    std::set<int> cav(params.cav_set.begin(), params.cav_set.end());
    std::set<int> hdv(params.hdv_set.begin(), params.hdv_set.end());
    for (int i : cav)
        if (hdv.count(i)) throw ConfigError("platoon: vehicle " + std::to_string(i) +
                                            " listed as both CAV and HDV");
    for (int i = 0; i < vehicle_count; ++i)
        if (!cav.count(i) && !hdv.count(i))
            throw ConfigError("platoon: vehicle " + std::to_string(i) + " is neither CAV nor HDV");

    std::vector<std::array<int, 3>> edges;
    for (int i = 1; i < vehicle_count; ++i) edges.push_back({i, i - 1, params.delay});

    BuiltEnv env;
    env.sample_period = params.sample_period;
    env.system.graph = InterconnectionGraph::from_edges(vehicle_count, edges);

    double T = params.sample_period;
    double vprime_max = 0.5 * params.ovm_vfree * params.ovm_shape;  // max |dV/ds|
    auto make_spec = [&](bool is_hdv, bool is_head) {
        AgentSpec a;
        a.state_dim = 2;
        a.input_dim = 1;
        a.disturbance_dim = 1;
        a.disturbance_box = Box::centered(1, params.disturbance_max);
        a.dynamics_label = is_hdv ? "platoon_hdv" : (is_head ? "platoon_head" : "platoon_cav");
        a.equilibrium = {params.eq_spacing, params.eq_velocity};
        auto dyn = std::make_shared<PlatoonDynamics>();
        dyn->params = params;
        dyn->hdv = is_hdv;
        dyn->head = is_head;
        a.dynamics = dyn;
        // Frobenius bound of the step Jacobian over (own, u, nbr, d)
        if (is_hdv) {
            double ta = T * params.ovm_sensitivity;
            std::vector<Vec> rows = {{1.0, -T, 0.0, 0.0, T, 0.0},
                                     {ta * vprime_max, 1.0 - ta, 0.0, 0.0, 0.0, 1.0}};
            a.lipschitz_f = frobenius(rows);
        } else {
            std::vector<Vec> rows = {{1.0, -T, 0.0, 0.0, T, 0.0}, {0.0, 1.0, T, 0.0, 0.0, 1.0}};
            a.lipschitz_f = frobenius(rows);
        }
        return a;
    };
    for (int i = 0; i < vehicle_count; ++i)
        env.system.agents.push_back(make_spec(hdv.count(i) > 0, i == 0));
    env.system.validate();

    auto nominal = std::make_shared<PlatoonNominal>();
    nominal->params = params;
    nominal->is_hdv.resize(std::size_t(vehicle_count));
    nominal->is_head.resize(std::size_t(vehicle_count));
    for (int i = 0; i < vehicle_count; ++i) {
        nominal->is_hdv[std::size_t(i)] = hdv.count(i) > 0;
        nominal->is_head[std::size_t(i)] = i == 0;
    }
    env.nominal = nominal;
    return env;
}

// --- drone ---------------------------------------------------------------------

std::array<Vec, 2> drone_step(double T, const Vec& p, const Vec& v, const Vec& u, const Vec& d) {
    Vec p2(3), v2(3);
    for (int q = 0; q < 3; ++q) {
        p2[std::size_t(q)] = p[std::size_t(q)] + T * v[std::size_t(q)];
        v2[std::size_t(q)] = v[std::size_t(q)] + T * u[std::size_t(q)] + d[std::size_t(q)];
    }
    return {p2, v2};
}

Vec leader_circle_control(const DroneParams& params, const Vec& velocity) {
    double th = params.circle_omega * params.sample_period;
    double c = std::cos(th), s = std::sin(th);
    double vx = velocity[0], vy = velocity[1];
    double rx = c * vx - s * vy;
    double ry = s * vx + c * vy;
    double T = params.sample_period;
    return {(rx - vx) / T, (ry - vy) / T, 0.0};
}

namespace {

struct DroneDynamics : Dynamics {
    double T;

    Vec step(std::span<const double> own, std::span<const double> u, const std::vector<Vec>&,
             std::span<const double> d) const override {
        Vec p(own.begin(), own.begin() + 3), v(own.begin() + 3, own.end());
        auto [p2, v2] = drone_step(T, p, v, Vec(u.begin(), u.end()), Vec(d.begin(), d.end()));
        p2.insert(p2.end(), v2.begin(), v2.end());
        return p2;
    }

    Matrix control_jacobian(std::span<const double>, std::span<const double>,
                            const std::vector<Vec>&, std::span<const double>) const override {
        Matrix j(6, 3);
        for (int q = 0; q < 3; ++q) j.at(std::size_t(3 + q), std::size_t(q)) = T;
        return j;
    }
};

struct DroneNominal : Controller {
    DroneParams params;
    std::vector<Vec> equilibria;       // per agent
    std::vector<Vec> ref_equilibrium;  // equilibrium of each agent's reference agent

    Vec control(int agent, std::span<const double> own,
                const std::vector<Vec>& delayed_nbrs) const override {
        const Vec& eq = equilibria[std::size_t(agent)];
        Vec u(3);
        if (agent == 0) {
            // hover regulation toward the leader's own equilibrium
            for (int q = 0; q < 3; ++q)
                u[std::size_t(q)] = -params.k_p * (own[std::size_t(q)] - eq[std::size_t(q)]) -
                                    params.k_v * own[std::size_t(3 + q)];
            return u;
        }
        const Vec& ref = delayed_nbrs[0];
        for (int q = 0; q < 3; ++q) {
            double off = eq[std::size_t(q)] - ref_equilibrium[std::size_t(agent)][std::size_t(q)];
            double p_err = own[std::size_t(q)] - (ref[std::size_t(q)] + off);
            double v_err = own[std::size_t(3 + q)] - ref[std::size_t(3 + q)];
            u[std::size_t(q)] = -params.k_p * p_err - params.k_v * v_err;
        }
        return u;
    }
};

}  // namespace

BuiltEnv build_drone(const DroneParams& params) {
    if (params.sample_period <= 0.0) throw ConfigError("drone: sample period must be positive");
    int n = params.follower_count + 1;
    std::vector<Vec> offsets = params.offsets;
    if (offsets.empty()) {
        for (int i = 1; i <= params.follower_count; ++i)
            offsets.push_back({-2.0 * i, 0.0, 0.0});
    }
    if (int(offsets.size()) != params.follower_count)
        throw ConfigError("drone: need one formation offset per follower");
    for (std::size_t a = 0; a < offsets.size(); ++a)
        for (std::size_t b = a + 1; b < offsets.size(); ++b)
            if (offsets[a] == offsets[b])
                throw ConfigError("drone: formation offsets must be distinct per follower");

    std::vector<std::array<int, 3>> edges;
    for (int i = 1; i < n; ++i) {
        int ref = params.follow_predecessor ? i - 1 : 0;
        edges.push_back({i, ref, params.delay});
    }

    BuiltEnv env;
    env.sample_period = params.sample_period;
    env.system.graph = InterconnectionGraph::from_edges(n, edges);

    double T = params.sample_period;
    auto dyn = std::make_shared<DroneDynamics>();
    dyn->T = T;

    // cumulative equilibrium positions: leader at leader_position, followers offset
    std::vector<Vec> eq(std::size_t(n), Vec(6, 0.0));
    for (int q = 0; q < 3; ++q) eq[0][std::size_t(q)] = params.leader_position[std::size_t(q)];
    for (int i = 1; i < n; ++i) {
        int ref = params.follow_predecessor ? i - 1 : 0;
        for (int q = 0; q < 3; ++q)
            eq[std::size_t(i)][std::size_t(q)] =
                eq[std::size_t(ref)][std::size_t(q)] + offsets[std::size_t(i - 1)][std::size_t(q)];
    }

    // Jacobian rows over (own 6, u 3, nbr 6, d 3): p' = p + Tv, v' = v + Tu + d
    double lf = std::sqrt(3.0 * (1.0 + T * T) + 3.0 * (1.0 + T * T + 1.0));

    for (int i = 0; i < n; ++i) {
        AgentSpec a;
        a.state_dim = 6;
        a.input_dim = 3;
        a.disturbance_dim = 3;
        a.disturbance_box = Box::centered(3, params.disturbance_max);
        a.dynamics_label = i == 0 ? "drone_leader" : "drone_follower";
        a.equilibrium = eq[std::size_t(i)];
        a.dynamics = dyn;
        a.lipschitz_f = lf;
        env.system.agents.push_back(a);
    }
    env.system.validate();

    auto nominal = std::make_shared<DroneNominal>();
    nominal->params = params;
    nominal->equilibria = eq;
    nominal->ref_equilibrium.assign(std::size_t(n), eq[0]);
    for (int i = 1; i < n; ++i)
        nominal->ref_equilibrium[std::size_t(i)] = eq[std::size_t(params.follow_predecessor ? i - 1 : 0)];
    env.nominal = nominal;
    return env;
}

// --- microgrid -------------------------------------------------------------------

std::vector<std::array<int, 2>> MicrogridParams::resolved_lines() const {
    if (!lines.empty()) return lines;
    std::vector<std::array<int, 2>> out;
    for (int i = 1; i < inverter_count; ++i) out.push_back({i - 1, i});
    return out;
}

std::vector<double> MicrogridParams::resolved_loads() const {
    if (!loads.empty()) return loads;
    return std::vector<double>(std::size_t(inverter_count), 0.2);
}

double microgrid_power(const MicrogridParams& params, const std::vector<double>& angles,
                       const std::vector<double>& voltages, int agent) {
    if (voltages[std::size_t(agent)] <= 0.0)
        throw ConfigError("microgrid: voltage magnitudes must be positive");
    double p = params.resolved_loads()[std::size_t(agent)];
    for (const auto& line : params.resolved_lines()) {
        int other = -1;
        if (line[0] == agent) other = line[1];
        if (line[1] == agent) other = line[0];
        if (other < 0) continue;
        p += params.susceptance * voltages[std::size_t(agent)] * voltages[std::size_t(other)] *
             std::sin(angles[std::size_t(agent)] - angles[std::size_t(other)]);
    }
    return p;
}

Vec microgrid_step(const MicrogridParams& params, const Vec& x, double u,
                   const std::vector<Vec>& neighbor_states,
                   const std::vector<double>& neighbor_susceptances, double power_setpoint,
                   double load, double d) {
    double T = params.sample_period;
    double delta = x[0], omega = x[1], xi = x[2];
    double power = load;
    for (std::size_t j = 0; j < neighbor_states.size(); ++j)
        power += neighbor_susceptances[j] * std::sin(delta - neighbor_states[j][0]);
    double omega2 = omega + (T / params.time_constant) *
                                (-(omega - params.nominal_frequency) -
                                 params.droop_gain * (power - power_setpoint) + xi) +
                    d;
    return {delta + T * omega, omega2, xi + T * u};
}

namespace {

struct MicrogridDynamics : Dynamics {
    MicrogridParams params;
    std::vector<double> neighbor_susceptances;
    double setpoint;
    double load;

    Vec step(std::span<const double> own, std::span<const double> u, const std::vector<Vec>& nbrs,
             std::span<const double> d) const override {
        return microgrid_step(params, Vec(own.begin(), own.end()), u[0], nbrs,
                              neighbor_susceptances, setpoint, load, d[0]);
    }

    Matrix control_jacobian(std::span<const double>, std::span<const double>,
                            const std::vector<Vec>&, std::span<const double>) const override {
        Matrix j(3, 1);
        j.at(2, 0) = params.sample_period;
        return j;
    }
};

struct MicrogridNominal : Controller {
    MicrogridParams params;

    Vec control(int, std::span<const double> own, const std::vector<Vec>&) const override {
        return {-params.k_omega * (own[1] - params.nominal_frequency) - params.k_xi * own[2]};
    }
};

void check_radial(int n, const std::vector<std::array<int, 2>>& lines) {
    if (int(lines.size()) != n - 1) throw ConfigError("microgrid: radial topology requires n-1 lines");
    std::vector<int> parent;
    parent.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) parent[std::size_t(i)] = i;
    auto find = [&](int v) {
        while (parent[std::size_t(v)] != v) v = parent[std::size_t(v)] = parent[std::size_t(parent[std::size_t(v)])];
        return v;
    };
    for (const auto& line : lines) {
        int a = find(line[0]), b = find(line[1]);
        if (a == b) throw ConfigError("microgrid: line topology contains a cycle");
        parent[std::size_t(a)] = b;
    }
}

}  // namespace

BuiltEnv build_microgrid(const MicrogridParams& params) {
    if (params.time_constant <= 0.0 || params.droop_gain <= 0.0)
        throw ConfigError("microgrid: time constants and droop gains must be positive");
    int n = params.inverter_count;
    auto lines = params.resolved_lines();
    auto loads = params.resolved_loads();
    if (int(loads.size()) != n) throw ConfigError("microgrid: need one load per inverter");
    check_radial(n, lines);

    std::vector<std::array<int, 3>> edges;
    for (const auto& line : lines) {
        edges.push_back({line[0], line[1], params.delay});
        edges.push_back({line[1], line[0], params.delay});
    }

    BuiltEnv env;
    env.sample_period = params.sample_period;
    env.system.graph = InterconnectionGraph::from_edges(n, edges);

    double T = params.sample_period;
    for (int i = 0; i < n; ++i) {
        AgentSpec a;
        a.state_dim = 3;
        a.input_dim = 1;
        a.disturbance_dim = 1;
        a.disturbance_box = Box::centered(1, params.disturbance_max);
        int degree = int(env.system.graph.neighbors[std::size_t(i)].size());
        a.dynamics_label = "microgrid_inverter_deg" + std::to_string(degree);
        a.equilibrium = {0.0, params.nominal_frequency, 0.0};

        auto dyn = std::make_shared<MicrogridDynamics>();
        dyn->params = params;
        dyn->neighbor_susceptances.assign(env.system.graph.neighbors[std::size_t(i)].size(),
                                          params.susceptance);
        dyn->load = loads[std::size_t(i)];
        dyn->setpoint = loads[std::size_t(i)];  // equilibrium at equal angles
        a.dynamics = dyn;

        double sum_b = params.susceptance * double(degree);
        double tt = T / params.time_constant;
        std::vector<Vec> rows;
        rows.push_back({1.0, T, 0.0});                                 // delta'
        Vec omega_row = {tt * params.droop_gain * sum_b, 1.0 - tt, tt};  // own block
        omega_row.push_back(0.0);                                        // u
        for (int q = 0; q < degree; ++q) {
            omega_row.push_back(tt * params.droop_gain * params.susceptance);  // neighbor delta
            omega_row.push_back(0.0);
            omega_row.push_back(0.0);
        }
        omega_row.push_back(1.0);  // d
        rows.push_back(omega_row);
        rows.push_back({0.0, 0.0, 1.0, T});  // xi'
        a.lipschitz_f = frobenius(rows);
        env.system.agents.push_back(a);
    }
    env.system.validate();

    auto nominal = std::make_shared<MicrogridNominal>();
    nominal->params = params;
    env.nominal = nominal;
    return env;
}

// --- custom linear ----------------------------------------------------------------

namespace {

struct LinearDynamics : Dynamics {
    double a, b, c_u, c_d;

    Vec step(std::span<const double> own, std::span<const double> u, const std::vector<Vec>& nbrs,
             std::span<const double> d) const override {
        double x = a * own[0] + c_u * u[0] + c_d * d[0];
        for (const auto& nb : nbrs) x += b * nb[0];
        return {x};
    }

    Matrix control_jacobian(std::span<const double>, std::span<const double>,
                            const std::vector<Vec>&, std::span<const double>) const override {
        Matrix j(1, 1);
        j.at(0, 0) = c_u;
        return j;
    }
};

struct LinearNominal : Controller {
    double k;
    Vec control(int, std::span<const double> own, const std::vector<Vec>&) const override {
        return {-k * own[0]};
    }
};

}  // namespace

BuiltEnv build_custom(const CustomParams& params) {
    BuiltEnv env;
    env.sample_period = params.sample_period;
    env.system.graph = InterconnectionGraph::from_edges(params.agent_count, params.edges);

    auto dyn = std::make_shared<LinearDynamics>();
    dyn->a = params.a;
    dyn->b = params.b;
    dyn->c_u = params.c_u;
    dyn->c_d = params.c_d;

    for (int i = 0; i < params.agent_count; ++i) {
        AgentSpec a;
        a.state_dim = 1;
        a.input_dim = 1;
        a.disturbance_dim = 1;
        a.disturbance_box = Box::centered(1, params.disturbance_max);
        a.dynamics_label = "custom_linear";
        a.equilibrium = {0.0};
        a.dynamics = dyn;
        int degree = int(env.system.graph.neighbors[std::size_t(i)].size());
        double s = params.a * params.a + params.c_u * params.c_u + params.c_d * params.c_d +
                   double(degree) * params.b * params.b;
        a.lipschitz_f = std::sqrt(s);
        env.system.agents.push_back(a);
    }
    env.system.validate();

    auto nominal = std::make_shared<LinearNominal>();
    nominal->k = params.k_feedback;
    env.nominal = nominal;
    return env;
}

}  // namespace razcert
