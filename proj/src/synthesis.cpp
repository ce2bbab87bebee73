#include "razcert/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace razcert {

namespace {

/// Per-agent constants reused across samples: layout, equilibrium-expanded z,
/// and the policy-input equilibrium.
struct AgentContext {
    LocalLayout layout;
    Vec z_equilibrium;  // equilibria at every (member, lag) slot, zeros at d
    int v_class = 0;
};

std::vector<AgentContext> make_contexts(const InterconnectedSystem& system,
                                        const Certificate& cert) {
    std::vector<AgentContext> ctx(std::size_t(system.agent_count()));
    for (int i = 0; i < system.agent_count(); ++i) {
        AgentContext& c = ctx[std::size_t(i)];
        c.layout = LocalLayout::for_agent(system, i);
        c.z_equilibrium.assign(std::size_t(c.layout.total), 0.0);
        for (std::size_t m = 0; m < c.layout.members.size(); ++m) {
            const Vec& eq = system.agents[std::size_t(c.layout.members[m])].equilibrium;
            for (int s = 0; s <= c.layout.tau_max; ++s)
                std::copy(eq.begin(), eq.end(),
                          c.z_equilibrium.begin() + c.layout.block_offset(m, s));
        }
        c.v_class = cert.classes.class_of[std::size_t(i)];
    }
    return ctx;
}

/// Scratch for one worker chunk: gradient partials plus the accumulated
/// upstreams of the origin evaluations that anchor V(0)=0 and pi(z*)=0.
struct ChunkAccum {
    LossBreakdown loss;
    LossGradients grads;
    std::vector<double> v_zero_up;      // per class
    std::vector<Vec> pi_zero_up;        // per class
    bool want_grads = false;
};

}  // namespace

LossGradients LossGradients::zeros_like(const Certificate& cert) {
    LossGradients g;
    for (const auto& v : cert.v_nets) g.v.push_back(GradientBuffer::zeros_like(v.net));
    for (int c = 0; c < cert.classes.class_count(); ++c) {
        int rep = cert.classes.representative[std::size_t(c)];
        g.pi.push_back(GradientBuffer::zeros_like(cert.pi_nets[std::size_t(rep)].net));
    }
    g.gamma_pure = Matrix(cert.gamma_pure.rows, cert.gamma_pure.cols);
    return g;
}

void LossGradients::accumulate(const LossGradients& other) {
    for (std::size_t c = 0; c < v.size(); ++c) v[c].accumulate(other.v[c]);
    for (std::size_t c = 0; c < pi.size(); ++c) pi[c].accumulate(other.pi[c]);
    for (std::size_t q = 0; q < gamma_pure.data.size(); ++q)
        gamma_pure.data[q] += other.gamma_pure.data[q];
}

ResidualPair razumikhin_residuals(const InterconnectedSystem& system, const Certificate& cert,
                                  const TrainingTuple& tuple) {
    const int i = tuple.agent;
    LocalLayout layout = LocalLayout::for_agent(system, i);
    std::span<const double> z(tuple.z);

    ResidualPair out;
    // con_notA over lagged member values
    double vi = cert.v_value(system, i, layout.block(z, 0, 0));
    for (std::size_t m = 0; m < layout.members.size(); ++m)
        for (int s = 1; s <= layout.tau_max; ++s) {
            double vj = cert.v_value(system, layout.members[m], layout.block(z, m, s));
            double val = vj - cert.constants.p * vi;
            if (val > out.con_not_a) out.con_not_a = val;
        }

    // con_B through the frozen policy and true dynamics
    Vec u = cert.control(system, i, layout.block(z, 0, 0), layout.dynamics_neighbor_states(z));
    Vec next = system.agents[std::size_t(i)].dynamics->step(
        layout.block(z, 0, 0), u, layout.dynamics_neighbor_states(z), layout.d_block(z));
    double sum = 0.0;
    for (std::size_t m = 0; m < layout.members.size(); ++m)
        sum += cert.gamma.at(std::size_t(i), std::size_t(layout.members[m])) *
               cert.v_value(system, layout.members[m], layout.block(z, m, 0));
    out.con_b = sum + cert.constants.psi * norm2(layout.d_block(z)) -
                cert.v_value(system, i, next);
    return out;
}

namespace {

/// Evaluates one tuple's loss terms; when acc.want_grads, accumulates exact
/// gradients for the V class nets, the tied policies, and projected gamma
/// (pulled back to gamma_pure by the caller).
void tuple_loss(const InterconnectedSystem& system, const Controller& nominal,
                const Certificate& cert, const std::vector<AgentContext>& ctx,
                const std::vector<double>& v_offsets, const std::vector<Vec>& pi_offsets,
                const TrainingTuple& tuple, const LossWeights& weights, double inv_batch,
                ChunkAccum& acc, Matrix& gamma_upstream) {
    const int i = tuple.agent;
    const AgentContext& c = ctx[std::size_t(i)];
    const LocalLayout& lay = c.layout;
    const auto& constants = cert.constants;
    std::span<const double> z(tuple.z);

    Vec z_shift = sub(z, c.z_equilibrium);
    std::span<const double> zs(z_shift);

    const int vclass = c.v_class;
    const Mlp& vnet = cert.v_nets[std::size_t(vclass)].net;
    const Mlp& pinet = cert.pi_nets[std::size_t(i)].net;

    // --- policy output and imitation term ---
    Vec pi_in = lay.policy_input(zs);
    ForwardCache pi_cache;
    Vec u = forward_cached(pinet, pi_in, pi_cache);
    for (std::size_t q = 0; q < u.size(); ++q) u[q] -= pi_offsets[std::size_t(vclass)][q];

    Vec u_nom = nominal.control(i, lay.block(z, 0, 0), lay.dynamics_neighbor_states(z));
    Vec e(u.size());
    for (std::size_t q = 0; q < u.size(); ++q) e[q] = u[q] - u_nom[q];
    double imi = norm2(e);
    acc.loss.imi += imi * inv_batch;

    Vec pi_upstream(u.size(), 0.0);
    if (imi > 0.0)
        for (std::size_t q = 0; q < u.size(); ++q)
            pi_upstream[q] = weights.imi * inv_batch * e[q] / imi;

    // --- class-K band term ---
    auto xi = lay.block(zs, 0, 0);
    double nrm = norm2(xi);
    ForwardCache vi_cache;
    double vi = forward_cached(vnet, xi, vi_cache)[0] - v_offsets[std::size_t(vclass)];
    double lower_gap = constants.a1 * nrm - vi + constants.eps_p;
    double upper_gap = vi - constants.a2 * nrm + constants.eps_p;
    double lp = std::max(0.0, lower_gap) + std::max(0.0, upper_gap);
    acc.loss.p += lp * inv_batch;
    double vi_upstream = weights.p * inv_batch *
                         ((lower_gap > 0.0 ? -1.0 : 0.0) + (upper_gap > 0.0 ? 1.0 : 0.0));

    // --- conditional decrement term ---
    // con_notA: max over lagged member values, ties to the lowest (member, lag)
    double con_not_a = -std::numeric_limits<double>::infinity();
    std::size_t arg_m = 0;
    int arg_s = 0;
    for (std::size_t m = 0; m < lay.members.size(); ++m) {
        int mclass = cert.classes.class_of[std::size_t(lay.members[m])];
        for (int s = 1; s <= lay.tau_max; ++s) {
            double vj = forward(cert.v_nets[std::size_t(mclass)].net, lay.block(zs, m, s))[0] -
                        v_offsets[std::size_t(mclass)];
            double val = vj - constants.p * vi;
            if (val > con_not_a) {
                con_not_a = val;
                arg_m = m;
                arg_s = s;
            }
        }
    }

    // con_B: lag-0 coupling sum + psi|d| - V_i(next)
    double coupling = 0.0;
    std::vector<double> vj0(lay.members.size(), 0.0);
    for (std::size_t m = 0; m < lay.members.size(); ++m) {
        int mclass = cert.classes.class_of[std::size_t(lay.members[m])];
        vj0[m] = forward(cert.v_nets[std::size_t(mclass)].net, lay.block(zs, m, 0))[0] -
                 v_offsets[std::size_t(mclass)];
        coupling += cert.gamma.at(std::size_t(i), std::size_t(lay.members[m])) * vj0[m];
    }
    std::vector<Vec> nbrs_raw = lay.dynamics_neighbor_states(z);
    Vec next_raw = system.agents[std::size_t(i)].dynamics->step(lay.block(z, 0, 0), u, nbrs_raw,
                                                                lay.d_block(z));
    Vec next_shift = sub(next_raw, system.agents[std::size_t(i)].equilibrium);
    ForwardCache vnext_cache;
    double v_next = forward_cached(vnet, next_shift, vnext_cache)[0] - v_offsets[std::size_t(vclass)];
    double con_b = coupling + constants.psi * norm2(lay.d_block(z)) - v_next;

    bool a_branch = con_not_a >= con_b;  // tie resolves to con_notA
    double mval = a_branch ? con_not_a : con_b;
    double ld = std::max(0.0, constants.eps_d - mval);
    acc.loss.d += ld * inv_batch;

    if (!acc.want_grads) return;

    const double d_up = ld > 0.0 ? -weights.d * inv_batch : 0.0;  // d L_d / d mval

    // V_i at x_i: class-K band plus the -p factor when the notA branch is active
    double vi_total_up = vi_upstream;
    if (a_branch && d_up != 0.0 && std::isfinite(con_not_a)) vi_total_up += d_up * (-constants.p);
    if (vi_total_up != 0.0) {
        Vec up{vi_total_up};
        backward(vnet, vi_cache, up, acc.grads.v[std::size_t(vclass)]);
        acc.v_zero_up[std::size_t(vclass)] += vi_total_up;
    }

    if (d_up != 0.0) {
        if (a_branch) {
            if (std::isfinite(con_not_a)) {
                int mclass = cert.classes.class_of[std::size_t(lay.members[arg_m])];
                ForwardCache cache;
                forward_cached(cert.v_nets[std::size_t(mclass)].net, lay.block(zs, arg_m, arg_s), cache);
                Vec up{d_up};
                backward(cert.v_nets[std::size_t(mclass)].net, cache, up,
                         acc.grads.v[std::size_t(mclass)]);
                acc.v_zero_up[std::size_t(mclass)] += d_up;
            }
        } else {
            // coupling sums: gamma entries and lag-0 V values
            for (std::size_t m = 0; m < lay.members.size(); ++m) {
                int member = lay.members[m];
                int mclass = cert.classes.class_of[std::size_t(member)];
                double g = cert.gamma.at(std::size_t(i), std::size_t(member));
                gamma_upstream.at(std::size_t(i), std::size_t(member)) += d_up * vj0[m];
                if (g != 0.0) {
                    ForwardCache cache;
                    forward_cached(cert.v_nets[std::size_t(mclass)].net, lay.block(zs, m, 0), cache);
                    Vec up{d_up * g};
                    backward(cert.v_nets[std::size_t(mclass)].net, cache, up,
                             acc.grads.v[std::size_t(mclass)]);
                    acc.v_zero_up[std::size_t(mclass)] += d_up * g;
                }
            }
            // -V_i(next): gradient through the V net and back through the
            // control Jacobian into the policy
            Vec up{-d_up};
            Vec g_x = backward(vnet, vnext_cache, up, acc.grads.v[std::size_t(vclass)]);
            acc.v_zero_up[std::size_t(vclass)] += -d_up;
            Matrix ju = system.agents[std::size_t(i)].dynamics->control_jacobian(
                lay.block(z, 0, 0), u, nbrs_raw, lay.d_block(z));
            for (std::size_t q = 0; q < u.size(); ++q) {
                double s = 0.0;
                for (std::size_t r = 0; r < g_x.size(); ++r) s += g_x[r] * ju.at(r, q);
                pi_upstream[q] += s;
            }
        }
    }

    bool pi_nonzero = false;
    for (double v : pi_upstream) pi_nonzero |= v != 0.0;
    if (pi_nonzero) {
        backward(pinet, pi_cache, pi_upstream, acc.grads.pi[std::size_t(vclass)]);
        for (std::size_t q = 0; q < pi_upstream.size(); ++q)
            acc.pi_zero_up[std::size_t(vclass)][q] += pi_upstream[q];
    }
}

}  // namespace

LossBreakdown total_loss(const InterconnectedSystem& system, const Controller& nominal,
                         const Certificate& cert, const TrainingSet& data,
                         std::span<const std::size_t> batch, const LossWeights& weights,
                         LossGradients* grads, ExecMode mode) {
    if (batch.empty()) throw ConfigError("total_loss: batch must be nonempty");
    const double inv_batch = 1.0 / double(batch.size());
    const int nclass = cert.classes.class_count();

    std::vector<AgentContext> ctx = make_contexts(system, cert);

    // live origin evaluations anchoring V(0) = 0 and pi(z*) = 0
    const std::size_t ncls = std::size_t(nclass);
    std::vector<double> v_offsets(ncls);
    std::vector<ForwardCache> v_zero_caches(ncls);
    std::vector<Vec> pi_offsets(ncls);
    std::vector<ForwardCache> pi_zero_caches(ncls);
    for (int c = 0; c < nclass; ++c) {
        const Mlp& vn = cert.v_nets[std::size_t(c)].net;
        v_offsets[std::size_t(c)] =
            forward_cached(vn, Vec(vn.input_dim(), 0.0), v_zero_caches[std::size_t(c)])[0];
        int rep = cert.classes.representative[std::size_t(c)];
        const Mlp& pn = cert.pi_nets[std::size_t(rep)].net;
        pi_offsets[std::size_t(c)] =
            forward_cached(pn, Vec(pn.input_dim(), 0.0), pi_zero_caches[std::size_t(c)]);
    }

    const bool want_grads = grads != nullptr;
    // chunk layout depends only on the batch size, so results are identical
    // across thread counts; large batches get proportionally larger chunks to
    // keep the per-chunk gradient buffers cheap
    const std::size_t chunk = std::max<std::size_t>(16, (batch.size() + 255) / 256);
    const std::size_t nchunks = chunk_count(batch.size(), chunk);

    std::vector<ChunkAccum> partial(nchunks);
    std::vector<Matrix> gamma_up(nchunks);

    for_chunks(batch.size(), chunk, mode, [&](std::size_t b, std::size_t e, std::size_t ci) {
        ChunkAccum& acc = partial[ci];
        acc.want_grads = want_grads;
        if (want_grads) {
            acc.grads = LossGradients::zeros_like(cert);
            acc.v_zero_up.assign(std::size_t(nclass), 0.0);
            acc.pi_zero_up.resize(std::size_t(nclass));
            for (int c = 0; c < nclass; ++c)
                acc.pi_zero_up[std::size_t(c)].assign(pi_offsets[std::size_t(c)].size(), 0.0);
        }
        gamma_up[ci] = Matrix(cert.gamma.rows, cert.gamma.cols);
        for (std::size_t t = b; t < e; ++t)
            tuple_loss(system, nominal, cert, ctx, v_offsets, pi_offsets,
                       data.tuples[batch[t]], weights, inv_batch, acc, gamma_up[ci]);
    });

    LossBreakdown total;
    for (std::size_t ci = 0; ci < nchunks; ++ci) {
        total.imi += partial[ci].loss.imi;
        total.p += partial[ci].loss.p;
        total.d += partial[ci].loss.d;
    }
    total.total = weights.imi * total.imi + weights.p * total.p + weights.d * total.d;

    if (want_grads) {
        *grads = LossGradients::zeros_like(cert);
        std::vector<double> v_zero(ncls, 0.0);
        std::vector<Vec> pi_zero(ncls);
        for (int c = 0; c < nclass; ++c)
            pi_zero[std::size_t(c)].assign(pi_offsets[std::size_t(c)].size(), 0.0);
        Matrix gamma_upstream(cert.gamma.rows, cert.gamma.cols);
        for (std::size_t ci = 0; ci < nchunks; ++ci) {
            grads->accumulate(partial[ci].grads);
            for (int c = 0; c < nclass; ++c) {
                v_zero[std::size_t(c)] += partial[ci].v_zero_up[std::size_t(c)];
                for (std::size_t q = 0; q < pi_zero[std::size_t(c)].size(); ++q)
                    pi_zero[std::size_t(c)][q] += partial[ci].pi_zero_up[std::size_t(c)][q];
            }
            for (std::size_t q = 0; q < gamma_upstream.data.size(); ++q)
                gamma_upstream.data[q] += gamma_up[ci].data[q];
        }
        // offset terms: V(x) - V(0) and pi(z) - pi(0) route the negated summed
        // upstream through one origin evaluation per class
        for (int c = 0; c < nclass; ++c) {
            if (v_zero[std::size_t(c)] != 0.0) {
                Vec up{-v_zero[std::size_t(c)]};
                backward(cert.v_nets[std::size_t(c)].net, v_zero_caches[std::size_t(c)], up,
                         grads->v[std::size_t(c)]);
            }
            bool nz = false;
            for (double v : pi_zero[std::size_t(c)]) nz |= v != 0.0;
            if (nz) {
                Vec up = pi_zero[std::size_t(c)];
                for (double& v : up) v = -v;
                int rep = cert.classes.representative[std::size_t(c)];
                backward(cert.pi_nets[std::size_t(rep)].net, pi_zero_caches[std::size_t(c)], up,
                         grads->pi[std::size_t(c)]);
            }
        }
        grads->gamma_pure = project_gains_backward(cert.gamma_pure, system.graph,
                                                   cert.constants.epsilon, gamma_upstream);
    }
    return total;
}

TrainingSet generate_dataset(const InterconnectedSystem& system, const Controller& nominal,
                             int count, int horizon, const std::vector<Box>& initial_boxes,
                             std::uint64_t seed, ExecMode mode) {
    if (count < 1) throw ConfigError("generate_dataset: count must be >= 1");
    if (horizon < 1) throw ConfigError("generate_dataset: horizon must be >= 1");
    const int n = system.agent_count();
    if (int(initial_boxes.size()) != n)
        throw DimensionError("generate_dataset", "initial_boxes", std::size_t(n),
                             initial_boxes.size());
    for (int i = 0; i < n; ++i) {
        if (int(initial_boxes[std::size_t(i)].dim()) != system.agents[std::size_t(i)].state_dim)
            throw DimensionError("generate_dataset agent " + std::to_string(i), "initial box",
                                 std::size_t(system.agents[std::size_t(i)].state_dim),
                                 initial_boxes[std::size_t(i)].dim());
        for (std::size_t q = 0; q < initial_boxes[std::size_t(i)].dim(); ++q)
            if (initial_boxes[std::size_t(i)].lo[q] > initial_boxes[std::size_t(i)].hi[q])
                throw ConfigError("generate_dataset: empty initial box for agent " +
                                  std::to_string(i));
    }

    std::vector<LocalLayout> layouts;
    for (int i = 0; i < n; ++i) layouts.push_back(LocalLayout::for_agent(system, i));

    TrainingSet set;
    set.tuples.resize(std::size_t(count) * std::size_t(horizon) * std::size_t(n));

    for_chunks(std::size_t(count), 1, mode, [&](std::size_t b, std::size_t e, std::size_t) {
        const std::size_t nn = std::size_t(n);
        for (std::size_t t = b; t < e; ++t) {
            Rng rng(derive_seed(seed, "traj", t));
            std::vector<Vec> x0(nn);
            for (int i = 0; i < n; ++i) x0[std::size_t(i)] = rng.uniform_in(initial_boxes[std::size_t(i)]);
            DelayHistory h = pad_history(system, x0);
            for (int k = 0; k < horizon; ++k) {
                std::vector<Vec> controls(nn), dist(nn);
                for (int i = 0; i < n; ++i) {
                    dist[std::size_t(i)].assign(std::size_t(system.agents[std::size_t(i)].disturbance_dim), 0.0);
                    controls[std::size_t(i)] = nominal.control(
                        i, h.at(i, 0), delayed_neighbor_states(system, h, i));
                }
                DelayHistory next = step_system(system, h, controls, dist);
                for (int i = 0; i < n; ++i) {
                    std::size_t slot = (t * std::size_t(horizon) + std::size_t(k)) * std::size_t(n) +
                                       std::size_t(i);
                    TrainingTuple& tup = set.tuples[slot];
                    tup.agent = i;
                    tup.z = layouts[std::size_t(i)].pack(h, dist[std::size_t(i)]);
                    tup.control = controls[std::size_t(i)];
                    tup.next_state = next.at(i, 0);
                    tup.provenance = Provenance::Rollout;
                }
                h = std::move(next);
            }
        }
    });

    // 80/20 split by trajectory
    std::size_t train_traj = std::max<std::size_t>(1, std::size_t(std::floor(0.8 * count)));
    if (std::size_t(count) == 1) train_traj = 1;
    std::size_t per_traj = std::size_t(horizon) * std::size_t(n);
    for (std::size_t t = 0; t < std::size_t(count); ++t) {
        auto& dst = t < train_traj ? set.train_idx : set.val_idx;
        for (std::size_t q = 0; q < per_traj; ++q) dst.push_back(t * per_traj + q);
    }
    return set;
}

namespace {

/// Folds member-row gradients into the representative's row through the
/// witness slot maps; tied rows then receive one shared update.
void fold_gamma_grads(Matrix& g, const EquivalenceClasses& classes) {
    for (int c = 0; c < classes.class_count(); ++c) {
        int rep = classes.representative[std::size_t(c)];
        const auto& rep_slots = classes.slot_map[std::size_t(rep)];
        for (int m : classes.members[std::size_t(c)]) {
            if (m == rep) continue;
            const auto& mslots = classes.slot_map[std::size_t(m)];
            for (std::size_t t = 0; t < rep_slots.size(); ++t) {
                g.at(std::size_t(rep), std::size_t(rep_slots[t])) +=
                    g.at(std::size_t(m), std::size_t(mslots[t]));
                g.at(std::size_t(m), std::size_t(mslots[t])) = 0.0;
            }
        }
    }
}

struct Snapshot {
    std::vector<LyapunovNet> v_nets;
    std::vector<PolicyNet> pi_nets;
    Matrix gamma_pure;
};

Snapshot take_snapshot(const Certificate& cert) {
    return {cert.v_nets, cert.pi_nets, cert.gamma_pure};
}

void restore_snapshot(Certificate& cert, const Snapshot& snap,
                      const InterconnectedSystem& system) {
    cert.v_nets = snap.v_nets;
    cert.pi_nets = snap.pi_nets;
    cert.gamma_pure = snap.gamma_pure;
    cert.gamma = project_gains(cert.gamma_pure, system.graph, cert.constants.epsilon);
}

}  // namespace

TrainResult train(const InterconnectedSystem& system, const Controller& nominal, Certificate& cert,
                  const TrainingSet& data, const LossWeights& weights,
                  const TrainOptions& options) {
    if (options.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (options.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (data.train_idx.empty()) throw ConfigError("train: empty training split");

    cert.gamma = project_gains(cert.gamma_pure, system.graph, cert.constants.epsilon);

    TrainResult result;
    Snapshot best = take_snapshot(cert);

    std::vector<std::size_t> order(data.train_idx);
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        double lr = options.learning_rate *
                    std::pow(options.lr_decay, double(epoch / std::max(1, options.lr_decay_epochs)));

        Rng shuffle_rng(derive_seed(options.seed, "shuffle", std::uint64_t(epoch)));
        for (std::size_t q = order.size(); q > 1; --q) {
            std::size_t r = std::size_t(shuffle_rng.next_u64() % q);
            std::swap(order[q - 1], order[r]);
        }

        LossBreakdown epoch_loss;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(options.batch_size)) {
            std::size_t end = std::min(order.size(), start + std::size_t(options.batch_size));
            std::span<const std::size_t> batch(order.data() + start, end - start);
            LossGradients grads;
            LossBreakdown loss =
                total_loss(system, nominal, cert, data, batch, weights, &grads, options.exec);
            if (!std::isfinite(loss.total)) {
                std::ostringstream msg;
                msg << "train: non-finite loss at epoch " << epoch << ", batch " << batches;
                throw TrainingError(msg.str());
            }
            epoch_loss.total += loss.total;
            epoch_loss.imi += loss.imi;
            epoch_loss.p += loss.p;
            epoch_loss.d += loss.d;
            ++batches;

            for (int c = 0; c < cert.classes.class_count(); ++c) {
                sgd_step_inplace(cert.v_nets[std::size_t(c)].net, grads.v[std::size_t(c)], lr);
                if (!options.freeze_policy)
                    for (int m : cert.classes.members[std::size_t(c)])
                        sgd_step_inplace(cert.pi_nets[std::size_t(m)].net, grads.pi[std::size_t(c)], lr);
            }
            fold_gamma_grads(grads.gamma_pure, cert.classes);
            for (std::size_t q = 0; q < cert.gamma_pure.data.size(); ++q)
                cert.gamma_pure.data[q] -= lr * grads.gamma_pure.data[q];
            cert.sync_gamma_rows();
            cert.gamma = project_gains(cert.gamma_pure, system.graph, cert.constants.epsilon);
        }
        if (batches > 0) {
            epoch_loss.total /= double(batches);
            epoch_loss.imi /= double(batches);
            epoch_loss.p /= double(batches);
            epoch_loss.d /= double(batches);
        }
        result.curves.push_back({epoch, "train", epoch_loss});

        std::span<const std::size_t> val(data.val_idx.empty() ? data.train_idx : data.val_idx);
        LossBreakdown val_loss =
            total_loss(system, nominal, cert, data, val, weights, nullptr, options.exec);
        result.curves.push_back({epoch, "val", val_loss});
        if (val_loss.total < result.best_val) {
            result.best_val = val_loss.total;
            result.best_epoch = epoch;
            best = take_snapshot(cert);
        }
    }

    restore_snapshot(cert, best, system);
    cert.freeze(system);
    return result;
}

std::string loss_curves_csv(const std::vector<LossCurveRow>& rows) {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,split,l_total,l_imi,l_p,l_d\n";
    for (const auto& r : rows)
        out << r.epoch << ',' << r.split << ',' << r.loss.total << ',' << r.loss.imi << ','
            << r.loss.p << ',' << r.loss.d << '\n';
    return out.str();
}

}  // namespace razcert
