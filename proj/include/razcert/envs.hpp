#pragma once

#include <array>
#include <memory>
#include <vector>

#include "razcert/system.hpp"

namespace razcert {

// --- platoon -----------------------------------------------------------------

struct PlatoonParams {
    double sample_period = 0.1;  // s
    std::vector<int> cav_set;    // indices driving with the nominal feedback policy
    std::vector<int> hdv_set;    // indices following the optimal-velocity model
    // optimal-velocity model: accel = ovm_sensitivity * (V(s) - v) with
    // V(s) = ovm_vfree/2 * (1 + tanh(ovm_shape * (s - ovm_shalf)))
    double ovm_sensitivity = 0.5;
    double ovm_vfree = 20.0;
    double ovm_shape = 0.1;
    double ovm_shalf = 20.0;
    double eq_spacing = 20.0;
    double eq_velocity = 10.0;
    // nominal CAV feedback gains
    double k_s = 0.1;
    double k_v = 0.5;
    double k_p = 0.2;
    double disturbance_max = 1.0;  // |d| bound on the velocity channel (m/s)
    int delay = 1;

    double ovm_desired_speed(double spacing) const;
    double ovm_accel(double spacing, double velocity) const;
};

/// One longitudinal step: s' = s + T (v_prev - v); v' = v + T*(u | OVM) + d.
/// hdv = true ignores the control slot. Negative spacing is allowed.
std::array<double, 2> platoon_step(const PlatoonParams& params, double s, double v, double u,
                                   double v_prev, double d, bool hdv);

// --- drone formation ----------------------------------------------------------

struct DroneParams {
    double sample_period = 0.1;
    int follower_count = 3;
    bool follow_predecessor = true;  // false: every follower tracks the leader
    std::vector<Vec> offsets;        // desired position offset to the reference, one per follower
    Vec leader_position{0.0, 0.0, 0.0};
    // circular reference generator for the leader (used by simulation scenarios)
    double circle_speed = 1.0;       // m/s
    double circle_omega = 0.2;       // rad/s
    double k_p = 1.0;
    double k_v = 1.5;
    double disturbance_max = 0.5;    // per velocity coordinate (m/s)
    int delay = 1;
};

/// Discrete double integrator p' = p + T v, v' = v + T u + d.
std::array<Vec, 2> drone_step(double sample_period, const Vec& p, const Vec& v, const Vec& u,
                              const Vec& d);

/// Leader acceleration that rotates the velocity by omega*T per step, keeping
/// the speed magnitude exactly constant (planar rotation in x-y).
Vec leader_circle_control(const DroneParams& params, const Vec& velocity);

// --- microgrid -----------------------------------------------------------------

struct MicrogridParams {
    double sample_period = 0.01;
    int inverter_count = 4;
    std::vector<std::array<int, 2>> lines;  // radial topology; empty = chain
    double susceptance = 1.0;               // |B_ij|, uniform
    std::vector<double> loads;              // P_L,i (p.u.); empty = 0.2 each
    double droop_gain = 0.5;                // eta_i
    double time_constant = 0.1;             // tau_i (s)
    double nominal_frequency = 0.0;         // omega* as deviation from nominal (rotating frame)
    double k_omega = 1.0;
    double k_xi = 0.2;
    double disturbance_max = 1.0;           // |d| bound on the frequency channel
    int delay = 1;

    std::vector<std::array<int, 2>> resolved_lines() const;
    std::vector<double> resolved_loads() const;
};

/// Active power injection P_i = P_L,i + sum_j |B_ij| U_i U_j sin(delta_i - delta_j)
/// over the full angle vector (voltages held at 1 p.u. by the environment).
double microgrid_power(const MicrogridParams& params, const std::vector<double>& angles,
                       const std::vector<double>& voltages, int agent);

/// One closed-form step of x = (delta, omega, xi) given the neighbor angle terms.
Vec microgrid_step(const MicrogridParams& params, const Vec& x, double u,
                   const std::vector<Vec>& neighbor_states,
                   const std::vector<double>& neighbor_susceptances, double power_setpoint,
                   double load, double d);

// --- custom linear -------------------------------------------------------------

/// Scalar linear agents x' = a x + b * sum_j x_j(delayed) + c_u u + c_d d on an
/// arbitrary topology; the workhorse for small verification studies.
struct CustomParams {
    double a = 0.5;
    double b = 0.1;
    double c_u = 1.0;
    double c_d = 1.0;
    double k_feedback = 0.0;  // nominal policy u = -k (x - x*)
    double disturbance_max = 0.1;
    int agent_count = 2;
    std::vector<std::array<int, 3>> edges;  // (i, j, delay)
    double sample_period = 1.0;
};

// --- assembled environments -----------------------------------------------------

struct BuiltEnv {
    InterconnectedSystem system;
    std::shared_ptr<Controller> nominal;
    double sample_period = 1.0;
};

BuiltEnv build_platoon(const PlatoonParams& params, int vehicle_count);
BuiltEnv build_drone(const DroneParams& params);
BuiltEnv build_microgrid(const MicrogridParams& params);
BuiltEnv build_custom(const CustomParams& params);

}  // namespace razcert
