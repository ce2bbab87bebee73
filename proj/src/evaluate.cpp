#include "razcert/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace razcert {

double rmse(const Trajectory& trajectory, const std::vector<Vec>& equilibria) {
    const std::size_t steps = trajectory.states.size();
    if (steps < 2) return 0.0;
    const std::size_t n = equilibria.size();
    const std::size_t horizon = steps - 1;  // errors measured at k = 1..T
    double sum = 0.0;
    for (std::size_t k = 1; k < steps; ++k)
        for (std::size_t i = 0; i < n; ++i) {
            const Vec& x = trajectory.states[k][i];
            for (std::size_t q = 0; q < x.size(); ++q) {
                double e = x[q] - equilibria[i][q];
                sum += e * e;
            }
        }
    return std::sqrt(sum / (double(n) * double(horizon)));
}

LyapunovTrace lyapunov_trace(const Trajectory& trajectory, const Certificate& cert,
                             const InterconnectedSystem& system) {
    LyapunovTrace trace;
    for (const auto& step : trajectory.states) {
        std::vector<double> row(step.size());
        double vmax = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < step.size(); ++i) {
            row[i] = cert.v_value(system, int(i), step[i]);
            vmax = std::max(vmax, row[i]);
        }
        trace.per_agent.push_back(std::move(row));
        trace.vmax.push_back(vmax);
    }
    return trace;
}

std::string lyapunov_trace_csv(const LyapunovTrace& trace) {
    std::ostringstream out;
    out.precision(17);
    out << "step,agent,V\n";
    for (std::size_t k = 0; k < trace.per_agent.size(); ++k)
        for (std::size_t i = 0; i < trace.per_agent[k].size(); ++i)
            out << k << ',' << i << ',' << trace.per_agent[k][i] << '\n';
    return out.str();
}

EnvelopeCheck siss_envelope_check(const Trajectory& trajectory, const Certificate& cert,
                                  const InterconnectedSystem& system, double rho, double c) {
    EnvelopeCheck check;
    LyapunovTrace trace = lyapunov_trace(trajectory, cert, system);
    check.vmax = trace.vmax;

    // V_max(0) over the full initial history (all lags)
    double v0 = -std::numeric_limits<double>::infinity();
    const DelayHistory& h0 = trajectory.histories.front();
    for (int s = 0; s < h0.depth(); ++s)
        for (int i = 0; i < system.agent_count(); ++i)
            v0 = std::max(v0, cert.v_value(system, i, h0.at(i, s)));

    const double psi_over_eps = cert.constants.psi / cert.constants.epsilon;
    double sup_d = 0.0;
    check.worst_slack = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < trace.vmax.size(); ++k) {
        if (k >= 1 && k - 1 < trajectory.disturbances.size()) {
            for (const Vec& d : trajectory.disturbances[k - 1])
                sup_d = std::max(sup_d, norm2(d));
        }
        double bound = c * std::pow(rho, double(k)) * v0 + psi_over_eps * sup_d;
        check.bound.push_back(bound);
        double slack = bound - trace.vmax[k];
        check.worst_slack = std::min(check.worst_slack, slack);
        if (slack < 0.0) check.pass = false;
    }
    return check;
}

std::string envelope_check_csv(const EnvelopeCheck& check) {
    std::ostringstream out;
    out.precision(17);
    out << "step,Vmax,bound\n";
    for (std::size_t k = 0; k < check.vmax.size(); ++k)
        out << k << ',' << check.vmax[k] << ',' << check.bound[k] << '\n';
    return out.str();
}

std::vector<EvaluationScenario> disturbance_presets(const std::string& env_kind) {
    std::vector<EvaluationScenario> out;
    auto sinusoid = [](const std::string& name, double amp) {
        EvaluationScenario s;
        s.name = name;
        s.disturbance.kind = DisturbanceSignal::Kind::Sinusoidal;
        s.disturbance.frequency_hz = 1.0 / 15.0;
        s.disturbance.amplitude = amp;
        return s;
    };
    auto impulse = [](const std::string& name, double mag) {
        EvaluationScenario s;
        s.name = name;
        s.disturbance.kind = DisturbanceSignal::Kind::InitialImpulse;
        s.disturbance.amplitude = mag;
        return s;
    };
    if (env_kind == "platoon") {
        out.push_back(sinusoid("sine_1_15hz_4", 4.0));
        out.push_back(sinusoid("sine_1_15hz_7", 7.0));
    } else if (env_kind == "drone") {
        out.push_back(sinusoid("sine_1_15hz_0p5", 0.5));
        out.push_back(sinusoid("sine_1_15hz_3", 3.0));
    } else if (env_kind == "microgrid") {
        out.push_back(impulse("initial_0p5rad", 0.5));
        out.push_back(impulse("initial_1rad", 1.0));
    } else {
        out.push_back(sinusoid("sine_1_15hz_small", 0.01));
    }
    return out;
}

}  // namespace razcert
