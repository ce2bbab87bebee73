#pragma once

#include <string>
#include <vector>

#include "razcert/certificate.hpp"
#include "razcert/system.hpp"

namespace razcert {

/// Root-mean-square tracking error over steps 1..T and all agents:
/// sqrt( (1/(N T)) sum_k sum_i |x_{i,k} - x_i*|^2 ).
double rmse(const Trajectory& trajectory, const std::vector<Vec>& equilibria);

struct LyapunovTrace {
    std::vector<double> vmax;                   // per step
    std::vector<std::vector<double>> per_agent; // [k][agent]
};

LyapunovTrace lyapunov_trace(const Trajectory& trajectory, const Certificate& cert,
                             const InterconnectedSystem& system);

/// CSV: step,agent,V
std::string lyapunov_trace_csv(const LyapunovTrace& trace);

struct EnvelopeCheck {
    bool pass = true;
    double worst_slack = 0.0;       // min over k of bound - Vmax
    std::vector<double> bound;      // per step
    std::vector<double> vmax;       // per step
};

/// Checks V_max(k) <= c rho^k V_max(0) + (psi/eps) sup_{t<=k} max_i |d_{i,t}|
/// along a simulated trajectory; V_max(0) is taken over the whole initial
/// history. Reports the minimum slack.
EnvelopeCheck siss_envelope_check(const Trajectory& trajectory, const Certificate& cert,
                                  const InterconnectedSystem& system, double rho, double c);

/// CSV: step,Vmax,bound
std::string envelope_check_csv(const EnvelopeCheck& check);

struct EvaluationScenario {
    std::string name;
    DisturbanceSignal disturbance;
    int horizon = 500;
    std::uint64_t seed = 0;
};

/// The disturbance presets used in the closed-loop studies: sinusoidal
/// 1/15 Hz at two amplitudes for platoon and drone, initial frequency offsets
/// for the microgrid, and a small sinusoid for custom systems.
std::vector<EvaluationScenario> disturbance_presets(const std::string& env_kind);

}  // namespace razcert
