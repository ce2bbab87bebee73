#include "razcert/reach.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace razcert {

std::size_t ReachEnvelope::embedded_dim() const {
    std::size_t total = 0;
    for (int d : state_dims) total += std::size_t(d);
    return total * std::size_t(tau_max + 1);
}

std::size_t ReachEnvelope::slice_offset(int agent, int lag) const {
    std::size_t per_lag = 0;
    for (int d : state_dims) per_lag += std::size_t(d);
    std::size_t off = std::size_t(lag) * per_lag;
    for (int a = 0; a < agent; ++a) off += std::size_t(state_dims[std::size_t(a)]);
    return off;
}

namespace {

DelayHistory history_from_embedded(const InterconnectedSystem& system, std::span<const double> x) {
    const int n = system.agent_count();
    const int tau = system.graph.tau_max;
    DelayHistory h;
    h.lags.resize(std::size_t(tau) + 1);
    std::size_t pos = 0;
    for (int s = 0; s <= tau; ++s) {
        h.lags[std::size_t(s)].resize(std::size_t(n));
        for (int i = 0; i < n; ++i) {
            int d = system.agents[std::size_t(i)].state_dim;
            h.lags[std::size_t(s)][std::size_t(i)].assign(x.begin() + long(pos), x.begin() + long(pos + std::size_t(d)));
            pos += std::size_t(d);
        }
    }
    return h;
}

Vec embedded_from_history(const DelayHistory& h) {
    Vec x;
    for (const auto& lag : h.lags)
        for (const auto& state : lag) x.insert(x.end(), state.begin(), state.end());
    return x;
}

Vec sample_point(const Box& s0, std::size_t index, std::uint64_t seed) {
    const std::size_t dim = s0.dim();
    const std::size_t corner_bits = std::min<std::size_t>(dim, 12);
    const std::size_t corner_count = std::size_t(1) << corner_bits;
    Rng rng(derive_seed(seed, "reach_sample", index));
    Vec x(dim);
    if (index < corner_count) {
        for (std::size_t q = 0; q < dim; ++q) {
            if (q < corner_bits)
                x[q] = (index >> q) & 1 ? s0.hi[q] : s0.lo[q];
            else
                x[q] = rng.uniform(s0.lo[q], s0.hi[q]);
        }
    } else {
        for (std::size_t q = 0; q < dim; ++q) x[q] = rng.uniform(s0.lo[q], s0.hi[q]);
    }
    return x;
}

}  // namespace

ReachEnvelope build_envelope(const InterconnectedSystem& system, const Controller& controller,
                             const Box& s0, int horizon, int samples, double inflation,
                             std::uint64_t seed, ExecMode mode) {
    const int n = system.agent_count();
    const int tau = system.graph.tau_max;
    std::size_t per_lag = 0;
    for (int i = 0; i < n; ++i) per_lag += std::size_t(system.agents[std::size_t(i)].state_dim);
    const std::size_t dim = per_lag * std::size_t(tau + 1);
    if (s0.dim() != dim) throw DimensionError("build_envelope", "s0", dim, s0.dim());
    for (std::size_t q = 0; q < dim; ++q)
        if (s0.lo[q] > s0.hi[q]) throw ConfigError("build_envelope: empty initial set");
    if (samples < 2) throw ConfigError("build_envelope: need at least 2 samples");
    if (inflation < 0.0) throw ConfigError("build_envelope: inflation must be >= 0");
    const std::size_t corner_count = std::size_t(1) << std::min<std::size_t>(dim, 12);
    if (std::size_t(samples) < corner_count)
        throw ConfigError("build_envelope: sample count " + std::to_string(samples) +
                          " is below the corner count " + std::to_string(corner_count));

    ReachEnvelope env;
    env.tau_max = tau;
    env.inflation = inflation;
    env.samples = samples;
    for (int i = 0; i < n; ++i) env.state_dims.push_back(system.agents[std::size_t(i)].state_dim);

    // hulls[k] built by an ordered min/max reduction over sample chunks
    struct Hull {
        std::vector<Box> step;  // per k
        bool init = false;
    };
    const std::size_t chunk = 8;
    DisturbanceSignal zero;

    Hull total = reduce_chunks(
        std::size_t(samples), chunk, mode, Hull{},
        [&](std::size_t b, std::size_t e) {
            Hull h;
            for (std::size_t si = b; si < e; ++si) {
                Vec x0 = sample_point(s0, si, seed);
                DelayHistory hist = history_from_embedded(system, x0);
                Trajectory traj = rollout(system, controller, hist, zero, horizon, 1.0);
                for (int k = 0; k <= horizon; ++k) {
                    Vec emb = embedded_from_history(traj.histories[std::size_t(k)]);
                    if (!h.init)
                        h.step.emplace_back(emb, emb);
                    else
                        h.step[std::size_t(k)].expand(Box(emb, emb));
                }
                h.init = true;
            }
            return h;
        },
        [](Hull acc, Hull part) {
            if (!part.init) return acc;
            if (!acc.init) return part;
            for (std::size_t k = 0; k < acc.step.size(); ++k) acc.step[k].expand(part.step[k]);
            return acc;
        });

    env.boxes = std::move(total.step);
    for (Box& box : env.boxes)
        for (std::size_t q = 0; q < box.dim(); ++q) {
            double pad = std::max(0.5 * inflation * box.width(q), 1e-6);
            box.lo[q] -= pad;
            box.hi[q] += pad;
        }
    return env;
}

Box project(const ReachEnvelope& envelope, int k, int agent, int lag) {
    if (k < 0 || k > envelope.horizon()) throw ConfigError("project: step index out of range");
    if (lag < 0 || lag > envelope.tau_max) throw ConfigError("project: lag out of range");
    if (agent < 0 || agent >= int(envelope.state_dims.size()))
        throw ConfigError("project: agent index out of range");
    std::size_t off = envelope.slice_offset(agent, lag);
    std::size_t d = std::size_t(envelope.state_dims[std::size_t(agent)]);
    const Box& b = envelope.boxes[std::size_t(k)];
    return Box(Vec(b.lo.begin() + long(off), b.lo.begin() + long(off + d)),
               Vec(b.hi.begin() + long(off), b.hi.begin() + long(off + d)));
}

Box agent_hull(const ReachEnvelope& envelope, int agent) {
    Box hull = project(envelope, 0, agent, 0);
    for (int k = 0; k <= envelope.horizon(); ++k)
        for (int s = 0; s <= envelope.tau_max; ++s) hull.expand(project(envelope, k, agent, s));
    return hull;
}

LocalDelayDomain local_domain(const ReachEnvelope& envelope, const InterconnectedSystem& system,
                              int agent, int k) {
    LocalDelayDomain dom;
    dom.agent = agent;
    dom.k = k;
    dom.layout = LocalLayout::for_agent(system, agent);
    for (std::size_t m = 0; m < dom.layout.members.size(); ++m)
        for (int s = 0; s <= envelope.tau_max; ++s)
            dom.box.append(project(envelope, k, dom.layout.members[m], s));
    dom.box.append(system.agents[std::size_t(agent)].disturbance_box);
    return dom;
}

long long envelope_violations(const ReachEnvelope& envelope, const InterconnectedSystem& system,
                              const Controller& controller, const Box& s0, int samples,
                              std::uint64_t seed) {
    DisturbanceSignal zero;
    long long violations = 0;
    for (int si = 0; si < samples; ++si) {
        Rng rng(derive_seed(seed, "reach_validate", std::uint64_t(si)));
        Vec x0(s0.dim());
        for (std::size_t q = 0; q < x0.size(); ++q) x0[q] = rng.uniform(s0.lo[q], s0.hi[q]);
        DelayHistory hist = history_from_embedded(system, x0);
        Trajectory traj = rollout(system, controller, hist, zero, envelope.horizon(), 1.0);
        for (int k = 0; k <= envelope.horizon(); ++k) {
            Vec emb = embedded_from_history(traj.histories[std::size_t(k)]);
            if (!envelope.boxes[std::size_t(k)].contains(emb)) ++violations;
        }
    }
    return violations;
}

std::string envelope_csv(const ReachEnvelope& envelope) {
    std::ostringstream out;
    out.precision(17);
    out << "k,coord,lo,hi\n";
    for (std::size_t k = 0; k < envelope.boxes.size(); ++k)
        for (std::size_t q = 0; q < envelope.boxes[k].dim(); ++q)
            out << k << ',' << q << ',' << envelope.boxes[k].lo[q] << ','
                << envelope.boxes[k].hi[q] << '\n';
    return out.str();
}

}  // namespace razcert
