#include "razcert/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace razcert {

std::pair<double, double> compute_rho_c(double p, double epsilon, int tau_max) {
    if (!(p > 1.0)) throw ConfigError("compute_rho_c: p must be > 1");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ConfigError("compute_rho_c: epsilon must lie in (0,1)");
    if (tau_max < 0) throw ConfigError("compute_rho_c: tau_max must be >= 0");
    double rho = std::max(std::exp(-std::log(p) / double(tau_max + 1)), 1.0 - epsilon);
    return {rho, p};
}

long long compute_tr(double R, double c, double vmax0, double rho) {
    if (!(R > 0.0) || !(vmax0 > 0.0)) throw ConfigError("compute_tr: R and Vmax0 must be positive");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("compute_tr: rho must lie in (0,1)");
    if (R >= c * vmax0) return 0;
    double t = std::ceil(std::log(R / (c * vmax0)) / std::log(rho));
    return t < 0.0 ? 0 : (long long)(t);
}

// --- grids ------------------------------------------------------------------------

GridAxes GridAxes::make(const Box& box, double delta) {
    if (!(delta > 0.0)) throw ConfigError("grid: step size must be positive");
    GridAxes axes;
    axes.lo = box.lo;
    const std::size_t dim = box.dim();
    axes.step.assign(dim, 0.0);
    axes.count.assign(dim, 1);
    for (std::size_t q = 0; q < dim; ++q) {
        double w = box.hi[q] - box.lo[q];
        if (w <= 0.0) continue;
        std::uint64_t cnt = std::uint64_t(std::ceil(w / delta)) + 1;
        if (cnt < 2) cnt = 2;
        axes.count[q] = cnt;
        axes.step[q] = w / double(cnt - 1);
    }
    return axes;
}

std::uint64_t GridAxes::total_points() const {
    std::uint64_t total = 1;
    for (std::uint64_t c : count) {
        if (c != 0 && total > std::numeric_limits<std::uint64_t>::max() / c)
            return std::numeric_limits<std::uint64_t>::max();
        total *= c;
    }
    return total;
}

double GridAxes::cover_radius() const {
    double s = 0.0;
    for (double v : step) s += v * v;
    return 0.5 * std::sqrt(s);
}

void GridAxes::decode(std::uint64_t index, Vec& out) const {
    out.resize(lo.size());
    for (std::size_t q = 0; q < lo.size(); ++q) {
        std::uint64_t c = index % count[q];
        index /= count[q];
        out[q] = lo[q] + step[q] * double(c);
    }
}

// --- margins ----------------------------------------------------------------------

Margins compute_margins(const CertificateConstants& constants, const Matrix& gamma,
                        const std::vector<double>& l_v, const std::vector<double>& l_f,
                        const InterconnectionGraph& graph) {
    const std::size_t n = std::size_t(graph.agent_count);
    if (l_v.size() != n || l_f.size() != n)
        throw DimensionError("compute_margins", "lipschitz arrays", n, l_v.size());
    Margins m;
    m.l_v = l_v;
    m.l_f = l_f;
    m.l_h_upper.assign(n, 0.0);
    m.l_r_upper.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double max_lv = l_v[i];
        double coupling = gamma.at(i, i) >= 0.0 ? gamma.at(i, i) * l_v[i]
                                                : -gamma.at(i, i) * l_v[i];
        for (int j : graph.neighbors[i]) {
            max_lv = std::max(max_lv, l_v[std::size_t(j)]);
            coupling += std::abs(gamma.at(i, std::size_t(j))) * l_v[std::size_t(j)];
        }
        m.l_h_upper[i] = constants.p * l_v[i] + max_lv;
        m.l_r_upper[i] = l_v[i] * l_f[i] + coupling + constants.psi;
    }
    return m;
}

std::string cex_kind_name(Counterexample::Kind kind) {
    switch (kind) {
        case Counterexample::Kind::Stage1Logic: return "stage-1 logic";
        case Counterexample::Kind::Stage2Decrement: return "stage-2 decrement";
        case Counterexample::Kind::ClassKLower: return "class-K lower";
        case Counterexample::Kind::ClassKUpper: return "class-K upper";
    }
    return "unknown";
}

std::string verdict_name(Verdict verdict) {
    switch (verdict) {
        case Verdict::Verified: return "verified";
        case Verdict::Refuted: return "refuted";
        case Verdict::InconclusiveCap: return "inconclusive-cap";
    }
    return "unknown";
}

// --- class-K ----------------------------------------------------------------------

ClassKResult classk_check(const LyapunovNet& v, const Box& domain, double a1, double a2,
                          double delta, double l_v, const GridSpec& grids, ExecMode mode) {
    ClassKResult res;
    GridAxes axes = GridAxes::make(domain, delta);
    res.points = axes.total_points();

    // exact origin anchor: both bounds vanish at x = 0
    Vec origin(domain.dim(), 0.0);
    res.origin_value = v.value(origin);
    res.origin_ok = std::abs(res.origin_value) <= grids.origin_tolerance;

    if (res.points > grids.point_cap) {
        res.cap_hit = true;
        return res;
    }

    double cover = axes.cover_radius();
    res.margin = (l_v + std::max(a1, a2)) * cover * grids.slack_multiplier;
    // two-sided margined bounds are infeasible for any function within
    // 2m/(a2-a1) of the origin; carve that ball out and rely on the origin
    // anchor plus the Lipschitz band inside it
    res.carve_radius = grids.classk_carve_factor * 2.0 * res.margin / (a2 - a1);
    res.claim_radius = res.carve_radius + cover;

    struct Part {
        std::uint64_t carved = 0;
        double worst_lower = std::numeric_limits<double>::infinity();
        double worst_upper = std::numeric_limits<double>::infinity();
        std::vector<Counterexample> cex;
    };
    const std::size_t chunk = 4096;
    const std::size_t total = std::size_t(res.points);
    std::vector<Part> parts(chunk_count(total, chunk));

    for_chunks(total, chunk, mode, [&](std::size_t b, std::size_t e, std::size_t ci) {
        Part part;  // chunk-local accumulation avoids false sharing
        Vec x;
        ForwardCache cache;
        for (std::size_t idx = b; idx < e; ++idx) {
            axes.decode(idx, x);
            double nrm = norm2(x);
            if (nrm <= res.carve_radius) {
                ++part.carved;
                continue;
            }
            double val = forward_cached(v.net, x, cache)[0] - v.offset;
            double lower_slack = val - (a1 * nrm + res.margin);
            double upper_slack = (a2 * nrm - res.margin) - val;
            part.worst_lower = std::min(part.worst_lower, lower_slack);
            part.worst_upper = std::min(part.worst_upper, upper_slack);
            if (lower_slack < 0.0 && int(part.cex.size()) < grids.cex_cap) {
                Counterexample c;
                c.kind = Counterexample::Kind::ClassKLower;
                c.z = x;
                c.residual = lower_slack;
                part.cex.push_back(std::move(c));
            } else if (upper_slack < 0.0 && int(part.cex.size()) < grids.cex_cap) {
                Counterexample c;
                c.kind = Counterexample::Kind::ClassKUpper;
                c.z = x;
                c.residual = upper_slack;
                part.cex.push_back(std::move(c));
            }
        }
        parts[ci] = std::move(part);
    });

    res.worst_lower_slack = std::numeric_limits<double>::infinity();
    res.worst_upper_slack = std::numeric_limits<double>::infinity();
    for (auto& part : parts) {
        res.carved += part.carved;
        res.worst_lower_slack = std::min(res.worst_lower_slack, part.worst_lower);
        res.worst_upper_slack = std::min(res.worst_upper_slack, part.worst_upper);
        for (auto& c : part.cex)
            if (int(res.cex.size()) < grids.cex_cap) res.cex.push_back(std::move(c));
    }
    return res;
}

// --- stage sweeps -------------------------------------------------------------------

namespace {

/// Per-slot constants of a verification class in the representative's frame.
struct ClassFrame {
    LocalLayout layout;                  // representative layout
    std::vector<int> slot_class;         // certificate class per slot
    std::vector<Vec> slot_equilibrium;   // per slot
    std::vector<double> slot_gamma;      // representative's coupling row per slot
    Vec z_equilibrium;                   // full-layout equilibrium vector (d part zero)
    Box w_hull;                          // disturbance box hulled over members
};

ClassFrame make_frame(const Certificate& cert, const InterconnectedSystem& system,
                      const VerifyClass& cls) {
    ClassFrame f;
    const int rep = cls.representative;
    f.layout = LocalLayout::for_agent(system, rep);
    f.z_equilibrium.assign(std::size_t(f.layout.total), 0.0);
    for (std::size_t m = 0; m < f.layout.members.size(); ++m) {
        int agent = f.layout.members[m];
        f.slot_class.push_back(cert.classes.class_of[std::size_t(agent)]);
        f.slot_equilibrium.push_back(system.agents[std::size_t(agent)].equilibrium);
        f.slot_gamma.push_back(cert.gamma.at(std::size_t(rep), std::size_t(agent)));
        for (int s = 0; s <= f.layout.tau_max; ++s)
            std::copy(f.slot_equilibrium.back().begin(), f.slot_equilibrium.back().end(),
                      f.z_equilibrium.begin() + f.layout.block_offset(m, s));
    }
    f.w_hull = system.agents[std::size_t(rep)].disturbance_box;
    for (int member : cls.members)
        f.w_hull.expand(system.agents[std::size_t(member)].disturbance_box);
    return f;
}

/// Stage-1 domain: the coordinate-wise hull over class members of their
/// reachability-constrained delay domains, reordered into the representative's
/// slot order and shifted to equilibrium-relative coordinates.
Box stage1_box(const ReachEnvelope& envelope, const InterconnectedSystem& system,
               const VerifyClass& cls, const ClassFrame& frame, int k) {
    Box hull;
    bool first = true;
    for (std::size_t mi = 0; mi < cls.members.size(); ++mi) {
        int member = cls.members[mi];
        const std::vector<int>& slots = cls.slot_map[mi];
        Box reordered;
        for (std::size_t t = 0; t < slots.size(); ++t) {
            int agent = slots[t];
            const Vec& eq = system.agents[std::size_t(agent)].equilibrium;
            for (int s = 0; s <= envelope.tau_max; ++s) {
                Box blk = project(envelope, k, agent, s);
                for (std::size_t q = 0; q < blk.dim(); ++q) {
                    blk.lo[q] -= eq[q];
                    blk.hi[q] -= eq[q];
                }
                reordered.append(blk);
            }
        }
        reordered.append(system.agents[std::size_t(member)].disturbance_box);
        if (first) {
            hull = reordered;
            first = false;
        } else {
            hull.expand(reordered);
        }
    }
    return hull;
}

struct EvalScratch {
    ForwardCache v_cache;
    ForwardCache pi_cache;
    Vec point;
    Vec raw_own;
    std::vector<Vec> raw_nbrs;
    Vec pi_in;
    Vec u;
    Vec next_shift;

    void prepare(const LocalLayout& lay) {
        raw_nbrs.resize(lay.members.size() - 1);
        for (std::size_t m = 1; m < lay.members.size(); ++m)
            raw_nbrs[m - 1].resize(std::size_t(lay.dims[m]));
        raw_own.resize(std::size_t(lay.dims[0]));
        next_shift.resize(std::size_t(lay.dims[0]));
    }
};

double eval_v(const Certificate& cert, int cls, std::span<const double> shifted,
              ForwardCache& cache) {
    const LyapunovNet& v = cert.v_nets[std::size_t(cls)];
    return forward_cached(v.net, shifted, cache)[0] - v.offset;
}

}  // namespace

Stage1Stats stage1_verify(const Certificate& cert, const InterconnectedSystem& system,
                          const ReachEnvelope& envelope, int k, const VerifyClass& cls,
                          const GridSpec& grids, const Margins& margins, double R, ExecMode mode) {
    Stage1Stats stats;
    const int rep = cls.representative;
    stats.agent = rep;
    stats.k = k;

    ClassFrame frame = make_frame(cert, system, cls);
    Box domain = stage1_box(envelope, system, cls, frame, k);
    GridAxes axes = GridAxes::make(domain, grids.delta_out);
    stats.points = axes.total_points();
    if (stats.points > grids.point_cap) {
        stats.cap_hit = true;
        return stats;
    }

    stats.eps_out = axes.cover_radius();
    stats.delta_out = margins.l_r_upper[std::size_t(rep)] * stats.eps_out * grids.slack_multiplier;
    const double h_margin =
        margins.l_h_upper[std::size_t(rep)] * stats.eps_out * grids.slack_multiplier;
    const double p = cert.constants.p;
    const double psi = cert.constants.psi;
    const LocalLayout& lay = frame.layout;
    const Dynamics& dyn = *system.agents[std::size_t(rep)].dynamics;
    const PolicyNet& pi = cert.pi_nets[std::size_t(rep)];

    struct Part {
        std::uint64_t skipped = 0, premise = 0, checked = 0;
        double worst = -std::numeric_limits<double>::infinity();
        std::vector<Counterexample> cex;
    };
    const std::size_t total = std::size_t(stats.points);
    const std::size_t chunk = 2048;
    std::vector<Part> parts(chunk_count(total, chunk));

    for_chunks(total, chunk, mode, [&](std::size_t b, std::size_t e, std::size_t ci) {
        Part part;  // chunk-local accumulation avoids false sharing
        EvalScratch ws;
        ws.prepare(lay);
        std::vector<double> v0(lay.members.size());
        for (std::size_t idx = b; idx < e; ++idx) {
            axes.decode(idx, ws.point);
            std::span<const double> zs(ws.point);

            double vmax = -std::numeric_limits<double>::infinity();
            for (std::size_t m = 0; m < lay.members.size(); ++m) {
                v0[m] = eval_v(cert, frame.slot_class[m], lay.block(zs, m, 0), ws.v_cache);
                vmax = std::max(vmax, v0[m]);
            }
            if (vmax <= R) {
                ++part.skipped;
                continue;
            }

            // Razumikhin premise margin: p V_i - max lagged V < -L_h eps
            double lag_max = -std::numeric_limits<double>::infinity();
            for (std::size_t m = 0; m < lay.members.size(); ++m)
                for (int s = 1; s <= lay.tau_max; ++s)
                    lag_max = std::max(
                        lag_max, eval_v(cert, frame.slot_class[m], lay.block(zs, m, s), ws.v_cache));
            if (p * v0[0] - lag_max < -h_margin) {
                ++part.premise;
                continue;
            }

            // margined decrement through the frozen policy and true dynamics
            lay.policy_input_into(zs, ws.pi_in);
            const Vec& u_out = forward_cached(pi.net, ws.pi_in, ws.pi_cache);
            ws.u.assign(u_out.begin(), u_out.end());
            for (std::size_t q = 0; q < ws.u.size(); ++q) ws.u[q] -= pi.offset[q];

            auto own_shift = lay.block(zs, 0, 0);
            for (std::size_t q = 0; q < ws.raw_own.size(); ++q)
                ws.raw_own[q] = own_shift[q] + frame.slot_equilibrium[0][q];
            for (std::size_t m = 1; m < lay.members.size(); ++m) {
                auto blk = lay.block(zs, m, lay.delays[m]);
                Vec& dst = ws.raw_nbrs[m - 1];
                for (std::size_t q = 0; q < dst.size(); ++q)
                    dst[q] = blk[q] + frame.slot_equilibrium[m][q];
            }
            auto d = lay.d_block(zs);
            Vec next_raw = dyn.step(ws.raw_own, ws.u, ws.raw_nbrs, d);
            for (std::size_t q = 0; q < ws.next_shift.size(); ++q)
                ws.next_shift[q] = next_raw[q] - frame.slot_equilibrium[0][q];
            double v_next = eval_v(cert, frame.slot_class[0], ws.next_shift, ws.v_cache);

            double coupling = 0.0;
            for (std::size_t m = 0; m < lay.members.size(); ++m)
                coupling += frame.slot_gamma[m] * v0[m];
            double r = v_next - coupling - psi * norm2(d);
            double slack = r + stats.delta_out;
            ++part.checked;
            part.worst = std::max(part.worst, slack);
            if (slack > 0.0 && int(part.cex.size()) < grids.cex_cap) {
                Counterexample c;
                c.agent = rep;
                c.k = k;
                c.kind = Counterexample::Kind::Stage1Logic;
                c.residual = r;
                c.z = ws.point;
                for (std::size_t q = 0; q < frame.z_equilibrium.size(); ++q)
                    c.z[q] += frame.z_equilibrium[q];
                part.cex.push_back(std::move(c));
            }
        }
        parts[ci] = std::move(part);
    });

    stats.worst_slack = -std::numeric_limits<double>::infinity();
    for (auto& part : parts) {
        stats.skipped_inside += part.skipped;
        stats.premise_pass += part.premise;
        stats.checked += part.checked;
        stats.worst_slack = std::max(stats.worst_slack, part.worst);
        for (auto& c : part.cex)
            if (int(stats.cex.size()) < grids.cex_cap) stats.cex.push_back(std::move(c));
    }
    return stats;
}

Stage2Stats stage2_verify(const Certificate& cert, const InterconnectedSystem& system,
                          const VerifyClass& cls, double R, const GridSpec& grids,
                          const Margins& margins, ExecMode mode) {
    Stage2Stats stats;
    const int rep = cls.representative;
    stats.agent = rep;

    ClassFrame frame = make_frame(cert, system, cls);
    const LocalLayout& lay = frame.layout;

    // level-set over-approximation {a1 |x_j| <= R} by a box of half-width R/a1
    // per coordinate, per member slot; disturbance hull appended
    const double half = R / cert.constants.a1;
    Box domain;
    std::vector<std::size_t> slot_offset;
    for (std::size_t m = 0; m < lay.members.size(); ++m) {
        slot_offset.push_back(domain.dim());
        domain.append(Box::centered(std::size_t(lay.dims[m]), half));
    }
    std::size_t d_off = domain.dim();
    domain.append(frame.w_hull);

    GridAxes axes = GridAxes::make(domain, grids.delta_in);
    stats.points = axes.total_points();
    if (stats.points > grids.point_cap) {
        stats.cap_hit = true;
        return stats;
    }

    stats.eps_in = axes.cover_radius();
    stats.delta_in = margins.l_r_upper[std::size_t(rep)] * stats.eps_in * grids.slack_multiplier;
    stats.delta_level = margins.l_v[std::size_t(rep)] * margins.l_f[std::size_t(rep)] *
                        stats.eps_in * grids.slack_multiplier;
    const double psi = cert.constants.psi;
    const Dynamics& dyn = *system.agents[std::size_t(rep)].dynamics;
    const PolicyNet& pi = cert.pi_nets[std::size_t(rep)];

    struct Part {
        std::uint64_t dec = 0, inv = 0;
        double worst = -std::numeric_limits<double>::infinity();
        std::vector<Counterexample> cex;
    };
    const std::size_t total = std::size_t(stats.points);
    const std::size_t chunk = 2048;
    std::vector<Part> parts(chunk_count(total, chunk));

    for_chunks(total, chunk, mode, [&](std::size_t b, std::size_t e, std::size_t ci) {
        Part part;  // chunk-local accumulation avoids false sharing
        EvalScratch ws;
        ws.prepare(lay);
        std::vector<double> v0(lay.members.size());
        for (std::size_t idx = b; idx < e; ++idx) {
            axes.decode(idx, ws.point);
            std::span<const double> zin(ws.point);

            for (std::size_t m = 0; m < lay.members.size(); ++m)
                v0[m] = eval_v(cert, frame.slot_class[m],
                               zin.subspan(slot_offset[m], std::size_t(lay.dims[m])), ws.v_cache);

            // constant history: every delayed value equals the lag-0 value
            ws.pi_in.clear();
            for (std::size_t m = 0; m < lay.members.size(); ++m) {
                auto blk = zin.subspan(slot_offset[m], std::size_t(lay.dims[m]));
                ws.pi_in.insert(ws.pi_in.end(), blk.begin(), blk.end());
            }
            const Vec& u_out = forward_cached(pi.net, ws.pi_in, ws.pi_cache);
            ws.u.assign(u_out.begin(), u_out.end());
            for (std::size_t q = 0; q < ws.u.size(); ++q) ws.u[q] -= pi.offset[q];

            auto own_shift = zin.subspan(slot_offset[0], std::size_t(lay.dims[0]));
            for (std::size_t q = 0; q < ws.raw_own.size(); ++q)
                ws.raw_own[q] = own_shift[q] + frame.slot_equilibrium[0][q];
            for (std::size_t m = 1; m < lay.members.size(); ++m) {
                auto blk = zin.subspan(slot_offset[m], std::size_t(lay.dims[m]));
                Vec& dst = ws.raw_nbrs[m - 1];
                for (std::size_t q = 0; q < dst.size(); ++q)
                    dst[q] = blk[q] + frame.slot_equilibrium[m][q];
            }
            auto d = zin.subspan(d_off);
            Vec next_raw = dyn.step(ws.raw_own, ws.u, ws.raw_nbrs, d);
            for (std::size_t q = 0; q < ws.next_shift.size(); ++q)
                ws.next_shift[q] = next_raw[q] - frame.slot_equilibrium[0][q];
            double v_next = eval_v(cert, frame.slot_class[0], ws.next_shift, ws.v_cache);

            double coupling = 0.0;
            for (std::size_t m = 0; m < lay.members.size(); ++m)
                coupling += frame.slot_gamma[m] * v0[m];
            double r = v_next - coupling - psi * norm2(d);

            double dec_slack = r + stats.delta_in;
            double inv_slack = v_next - (R - stats.delta_level);
            if (dec_slack <= 0.0) {
                ++part.dec;
            } else if (inv_slack <= 0.0) {
                ++part.inv;
            } else if (int(part.cex.size()) < grids.cex_cap) {
                Counterexample c;
                c.agent = rep;
                c.k = -1;
                c.kind = Counterexample::Kind::Stage2Decrement;
                c.residual = r;
                // expand the lag-free point into a constant-history z
                c.z.assign(std::size_t(lay.total), 0.0);
                for (std::size_t m = 0; m < lay.members.size(); ++m) {
                    auto blk = zin.subspan(slot_offset[m], std::size_t(lay.dims[m]));
                    for (int s = 0; s <= lay.tau_max; ++s)
                        for (std::size_t q = 0; q < blk.size(); ++q)
                            c.z[std::size_t(lay.block_offset(m, s)) + q] =
                                blk[q] + frame.slot_equilibrium[m][q];
                }
                for (std::size_t q = 0; q < d.size(); ++q)
                    c.z[std::size_t(lay.d_offset()) + q] = d[q];
                part.cex.push_back(std::move(c));
            }
            part.worst = std::max(part.worst, std::min(dec_slack, inv_slack));
        }
        parts[ci] = std::move(part);
    });

    stats.worst_slack = -std::numeric_limits<double>::infinity();
    for (auto& part : parts) {
        stats.via_decrement += part.dec;
        stats.via_invariance += part.inv;
        stats.worst_slack = std::max(stats.worst_slack, part.worst);
        for (auto& c : part.cex)
            if (int(stats.cex.size()) < grids.cex_cap) stats.cex.push_back(std::move(c));
    }
    return stats;
}

// --- full pipeline --------------------------------------------------------------------

namespace {

std::vector<VerifyClass> make_verify_classes(const Certificate& cert,
                                             const InterconnectedSystem& system, bool reduction) {
    std::vector<VerifyClass> out;
    if (reduction) {
        for (int c = 0; c < cert.classes.class_count(); ++c) {
            VerifyClass vc;
            vc.representative = cert.classes.representative[std::size_t(c)];
            vc.members = cert.classes.members[std::size_t(c)];
            for (int m : vc.members)
                vc.slot_map.push_back(cert.classes.slot_map[std::size_t(m)]);
            out.push_back(std::move(vc));
        }
    } else {
        EquivalenceClasses singles = EquivalenceClasses::singletons(system);
        for (int c = 0; c < singles.class_count(); ++c) {
            VerifyClass vc;
            vc.representative = singles.representative[std::size_t(c)];
            vc.members = singles.members[std::size_t(c)];
            vc.slot_map.push_back(singles.slot_map[std::size_t(vc.representative)]);
            out.push_back(std::move(vc));
        }
    }
    return out;
}

/// Sound upper bound of max_i max_lag V_i over the initial embedded box:
/// grid maxima plus the Lipschitz cover margin.
double vmax0_upper_bound(const Certificate& cert, const InterconnectedSystem& system,
                         const Box& s0, double delta, ExecMode mode) {
    double vmax = 0.0;  // the equilibrium itself gives V = 0
    std::size_t per_lag = 0;
    for (int i = 0; i < system.agent_count(); ++i)
        per_lag += std::size_t(system.agents[std::size_t(i)].state_dim);
    for (int i = 0; i < system.agent_count(); ++i) {
        std::size_t base = 0;
        for (int a = 0; a < i; ++a) base += std::size_t(system.agents[std::size_t(a)].state_dim);
        std::size_t dim = std::size_t(system.agents[std::size_t(i)].state_dim);
        const Vec& eq = system.agents[std::size_t(i)].equilibrium;
        for (int s = 0; s <= system.graph.tau_max; ++s) {
            std::size_t off = std::size_t(s) * per_lag + base;
            Box slice(Vec(s0.lo.begin() + long(off), s0.lo.begin() + long(off + dim)),
                      Vec(s0.hi.begin() + long(off), s0.hi.begin() + long(off + dim)));
            for (std::size_t q = 0; q < dim; ++q) {
                slice.lo[q] -= eq[q];
                slice.hi[q] -= eq[q];
            }
            GridAxes axes = GridAxes::make(slice, delta);
            std::uint64_t total = axes.total_points();
            double bound;
            if (total <= (std::uint64_t(1) << 22)) {
                double cover = axes.cover_radius();
                double local = reduce_chunks(
                    std::size_t(total), std::size_t(4096), mode,
                    -std::numeric_limits<double>::infinity(),
                    [&](std::size_t b, std::size_t e) {
                        double best = -std::numeric_limits<double>::infinity();
                        Vec x;
                        ForwardCache cache;
                        for (std::size_t idx = b; idx < e; ++idx) {
                            axes.decode(idx, x);
                            best = std::max(best, eval_v(cert, cert.classes.class_of[std::size_t(i)],
                                                         x, cache));
                        }
                        return best;
                    },
                    [](double a, double b) { return std::max(a, b); });
                bound = local + cert.lipschitz_v_of(i) * cover;
            } else {
                // too many points: center value plus Lipschitz times box radius
                Vec center(dim);
                double radius2 = 0.0;
                for (std::size_t q = 0; q < dim; ++q) {
                    center[q] = 0.5 * (slice.lo[q] + slice.hi[q]);
                    double half = 0.5 * (slice.hi[q] - slice.lo[q]);
                    radius2 += half * half;
                }
                ForwardCache cache;
                bound = eval_v(cert, cert.classes.class_of[std::size_t(i)], center, cache) +
                        cert.lipschitz_v_of(i) * std::sqrt(radius2);
            }
            vmax = std::max(vmax, bound);
        }
    }
    return vmax;
}

}  // namespace

std::uint64_t VerificationReport::cex_count() const {
    std::uint64_t n = 0;
    for (const auto& c : classk) n += c.cex.size() + (c.origin_ok ? 0 : 1);
    for (const auto& s : stage1) n += s.cex.size();
    for (const auto& s : stage2) n += s.cex.size();
    return n;
}

int VerificationReport::exit_code() const {
    switch (verdict) {
        case Verdict::Verified: return 0;
        case Verdict::Refuted: return 1;
        case Verdict::InconclusiveCap: return 2;
    }
    return 2;
}

VerificationReport verify_certificate(const Certificate& cert, const InterconnectedSystem& system,
                                      const VerifyOptions& options) {
    cert.constants.validate();
    VerificationReport report;
    report.constants = cert.constants;
    report.R = options.R;
    report.reduction = options.reduction;

    double dbar = 0.0;
    for (const auto& a : system.agents) dbar = std::max(dbar, a.disturbance_box.max_norm2());
    double min_r = cert.constants.psi / cert.constants.epsilon * dbar;
    if (options.R < min_r) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "verify: R = " << options.R << " is below the minimal admissible value (psi/eps)*dbar = "
            << min_r;
        throw ConfigError(msg.str());
    }

    auto [rho, c] = compute_rho_c(cert.constants.p, cert.constants.epsilon, system.graph.tau_max);
    if (options.rho_override) {
        rho = *options.rho_override;
        if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("verify: rho override must lie in (0,1)");
        report.notes.push_back("rho taken from configuration override");
    }
    report.rho = rho;
    report.c = c;

    report.vmax0_upper =
        vmax0_upper_bound(cert, system, options.s0, options.grids.delta_in, options.exec);
    report.t_r = options.t_r_override
                     ? *options.t_r_override
                     : compute_tr(options.R, c, std::max(report.vmax0_upper, 1e-300), rho);

    CertificateController controller(cert, system);
    ReachEnvelope envelope =
        build_envelope(system, controller, options.s0, int(report.t_r), options.reach_samples,
                       options.reach_inflation, options.seed, options.exec);

    std::vector<VerifyClass> classes = make_verify_classes(cert, system, options.reduction);

    std::vector<double> l_v(std::size_t(system.agent_count()));
    std::vector<double> l_f(std::size_t(system.agent_count()));
    for (int i = 0; i < system.agent_count(); ++i) {
        l_v[std::size_t(i)] = cert.lipschitz_v_of(i);
        double l_pi = cert.lipschitz_pi[std::size_t(i)];
        l_f[std::size_t(i)] =
            system.agents[std::size_t(i)].lipschitz_f * std::sqrt(1.0 + l_pi * l_pi);
    }
    Margins margins = compute_margins(cert.constants, cert.gamma, l_v, l_f, system.graph);

    const double level_half = options.R / cert.constants.a1;

    for (std::size_t vc = 0; vc < classes.size(); ++vc) {
        const VerifyClass& cls = classes[vc];
        int rep = cls.representative;

        // class-K domain: reach hull and the level-set box, equilibrium-shifted
        Box domain = Box::centered(std::size_t(system.agents[std::size_t(rep)].state_dim), level_half);
        for (int member : cls.members) {
            Box hull = agent_hull(envelope, member);
            const Vec& eq = system.agents[std::size_t(member)].equilibrium;
            for (std::size_t q = 0; q < hull.dim(); ++q) {
                hull.lo[q] -= eq[q];
                hull.hi[q] -= eq[q];
            }
            domain.expand(hull);
        }
        ClassKResult ck =
            classk_check(cert.v_of(rep), domain, cert.constants.a1, cert.constants.a2,
                         options.grids.delta_classk, cert.lipschitz_v_of(rep), options.grids,
                         options.exec);
        ck.class_id = int(vc);
        ck.representative = rep;
        ck.containment_ok = ck.claim_radius <= level_half;
        for (auto& cex : ck.cex) {
            cex.agent = rep;
            // expand the bare state into a full local-layout point at equilibrium
            LocalLayout lay = LocalLayout::for_agent(system, rep);
            Vec state = cex.z;
            cex.z.assign(std::size_t(lay.total), 0.0);
            for (std::size_t m = 0; m < lay.members.size(); ++m) {
                const Vec& eq = system.agents[std::size_t(lay.members[m])].equilibrium;
                for (int s = 0; s <= lay.tau_max; ++s)
                    for (std::size_t q = 0; q < eq.size(); ++q)
                        cex.z[std::size_t(lay.block_offset(m, s)) + q] = eq[q];
            }
            const Vec& eq0 = system.agents[std::size_t(rep)].equilibrium;
            for (std::size_t q = 0; q < state.size(); ++q)
                cex.z[std::size_t(lay.block_offset(0, 0)) + q] = state[q] + eq0[q];
        }
        if (!ck.containment_ok)
            report.notes.push_back("class " + std::to_string(vc) +
                                   ": class-K claim radius exceeds R/a1; level-set containment "
                                   "cannot be concluded");
        report.classk.push_back(std::move(ck));
    }

    for (const VerifyClass& cls : classes) {
        for (long long k = 0; k <= report.t_r; ++k) {
            Stage1Stats s = stage1_verify(cert, system, envelope, int(k), cls, options.grids,
                                          margins, options.R, options.exec);
            if (s.cap_hit)
                report.notes.push_back("stage 1 point cap exceeded at (agent " +
                                       std::to_string(s.agent) + ", k " + std::to_string(s.k) + ")");
            report.stage1.push_back(std::move(s));
        }
        Stage2Stats s2 =
            stage2_verify(cert, system, cls, options.R, options.grids, margins, options.exec);
        if (s2.cap_hit)
            report.notes.push_back("stage 2 point cap exceeded at agent " +
                                   std::to_string(s2.agent));
        report.stage2.push_back(std::move(s2));
    }

    // aggregate counterexamples (bounded) and derive the verdict
    const std::size_t report_cap = 4096;
    auto push_cex = [&](const std::vector<Counterexample>& list) {
        for (const auto& c : list)
            if (report.counterexamples.size() < report_cap) report.counterexamples.push_back(c);
    };
    bool any_cap = false;
    bool origin_fail = false;
    bool containment_fail = false;
    for (const auto& ck : report.classk) {
        push_cex(ck.cex);
        any_cap |= ck.cap_hit;
        origin_fail |= !ck.origin_ok;
        containment_fail |= !ck.containment_ok;
    }
    for (const auto& s : report.stage1) {
        push_cex(s.cex);
        any_cap |= s.cap_hit;
    }
    for (const auto& s : report.stage2) {
        push_cex(s.cex);
        any_cap |= s.cap_hit;
    }

    bool any_cex = !report.counterexamples.empty() || origin_fail;
    if (origin_fail)
        report.notes.push_back("class-K origin anchor |V(0)| exceeded the tolerance");
    report.envelope_caveat = true;
    report.notes.push_back(
        "reach envelope is a sampled outer approximation; the verdict is sound relative to it");

    if (any_cex)
        report.verdict = Verdict::Refuted;
    else if (any_cap || containment_fail)
        report.verdict = Verdict::InconclusiveCap;
    else
        report.verdict = Verdict::Verified;
    return report;
}

// --- report serialization ------------------------------------------------------------

std::string report_json(const VerificationReport& report) {
    using json = nlohmann::ordered_json;
    json j;
    j["verdict"] = verdict_name(report.verdict);
    j["exit_code"] = report.exit_code();
    j["constants"] = {{"p", report.constants.p},       {"epsilon", report.constants.epsilon},
                      {"psi", report.constants.psi},   {"a1", report.constants.a1},
                      {"a2", report.constants.a2},     {"eps_p", report.constants.eps_p},
                      {"eps_d", report.constants.eps_d}};
    j["R"] = report.R;
    j["rho"] = report.rho;
    j["c"] = report.c;
    j["vmax0_upper"] = report.vmax0_upper;
    j["t_r"] = report.t_r;
    j["reduction"] = report.reduction;
    j["envelope_caveat"] = report.envelope_caveat;

    j["classk"] = json::array();
    for (const auto& c : report.classk)
        j["classk"].push_back({{"class", c.class_id},
                               {"representative", c.representative},
                               {"points", c.points},
                               {"carved", c.carved},
                               {"margin", c.margin},
                               {"carve_radius", c.carve_radius},
                               {"claim_radius", c.claim_radius},
                               {"origin_value", c.origin_value},
                               {"origin_ok", c.origin_ok},
                               {"containment_ok", c.containment_ok},
                               {"worst_lower_slack", c.worst_lower_slack},
                               {"worst_upper_slack", c.worst_upper_slack},
                               {"cap_hit", c.cap_hit},
                               {"cex_count", c.cex.size()}});

    j["stage1"] = json::array();
    for (const auto& s : report.stage1)
        j["stage1"].push_back({{"agent", s.agent},
                               {"k", s.k},
                               {"points", s.points},
                               {"skipped_inside", s.skipped_inside},
                               {"premise_pass", s.premise_pass},
                               {"checked", s.checked},
                               {"eps_out", s.eps_out},
                               {"delta_out", s.delta_out},
                               {"worst_slack", s.worst_slack},
                               {"cap_hit", s.cap_hit},
                               {"cex_count", s.cex.size()}});

    j["stage2"] = json::array();
    for (const auto& s : report.stage2)
        j["stage2"].push_back({{"agent", s.agent},
                               {"points", s.points},
                               {"via_decrement", s.via_decrement},
                               {"via_invariance", s.via_invariance},
                               {"eps_in", s.eps_in},
                               {"delta_in", s.delta_in},
                               {"delta_level", s.delta_level},
                               {"worst_slack", s.worst_slack},
                               {"cap_hit", s.cap_hit},
                               {"cex_count", s.cex.size()}});

    j["counterexamples"] = json::array();
    for (const auto& c : report.counterexamples)
        j["counterexamples"].push_back({{"agent", c.agent},
                                        {"k", c.k},
                                        {"kind", cex_kind_name(c.kind)},
                                        {"residual", c.residual},
                                        {"z", c.z}});
    j["notes"] = report.notes;
    return j.dump(2);
}

std::string report_digest(const VerificationReport& report) {
    std::uint64_t h = fnv1a(report_json(report));
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

}  // namespace razcert
