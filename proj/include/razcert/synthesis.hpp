#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "razcert/certificate.hpp"
#include "razcert/gains.hpp"
#include "razcert/parallel.hpp"

namespace razcert {

struct LossWeights {
    double imi = 1.0;
    double p = 4000.0;
    double d = 2000.0;
};

enum class Provenance { Rollout, Counterexample };

/// One closed-loop transition of one agent: the local delay-history variable z
/// (canonical layout, disturbance included), the control that was applied, and
/// the observed next own state.
struct TrainingTuple {
    int agent = 0;
    Vec z;
    Vec control;
    Vec next_state;
    Provenance provenance = Provenance::Rollout;
};

struct TrainingSet {
    std::vector<TrainingTuple> tuples;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;

    std::size_t size() const { return tuples.size(); }
};

struct ResidualPair {
    double con_not_a = -std::numeric_limits<double>::infinity();
    double con_b = 0.0;
};

/// con_notA = max over j in E_i u {i}, s in 1..tau_max of V_j(x_{j,-s}) - p V_i(x_i);
/// con_B = sum_j gamma_ij V_j(x_j) + psi |d|_2 - V_i(x_next), with the next
/// state recomputed through the certificate policy and the true dynamics.
/// An empty lag range yields the -inf sentinel for con_notA.
ResidualPair razumikhin_residuals(const InterconnectedSystem& system, const Certificate& cert,
                                  const TrainingTuple& tuple);

struct LossBreakdown {
    double total = 0.0;
    double imi = 0.0;
    double p = 0.0;
    double d = 0.0;
};

/// Gradients of total_loss. Policies are tied per class, so their gradients
/// accumulate per class as well.
struct LossGradients {
    std::vector<GradientBuffer> v;
    std::vector<GradientBuffer> pi;
    Matrix gamma_pure;

    static LossGradients zeros_like(const Certificate& cert);
    void accumulate(const LossGradients& other);
};

LossBreakdown total_loss(const InterconnectedSystem& system, const Controller& nominal,
                         const Certificate& cert, const TrainingSet& data,
                         std::span<const std::size_t> batch, const LossWeights& weights,
                         LossGradients* grads, ExecMode mode);

/// Rolls out `count` trajectories of length `horizon` from uniform initial
/// states (equilibrium-padded histories, zero disturbance) under the nominal
/// controller and splits them 80/20 by trajectory.
TrainingSet generate_dataset(const InterconnectedSystem& system, const Controller& nominal,
                             int count, int horizon, const std::vector<Box>& initial_boxes,
                             std::uint64_t seed, ExecMode mode);

struct TrainOptions {
    int epochs = 100;
    double learning_rate = 1e-3;
    int batch_size = 32;
    int lr_decay_epochs = 30;  // step decay: x0.5 every 30 epochs
    double lr_decay = 0.5;
    bool freeze_policy = false;
    std::uint64_t seed = 0;
    ExecMode exec = ExecMode::Parallel;
};

struct LossCurveRow {
    int epoch;
    std::string split;
    LossBreakdown loss;
};

struct TrainResult {
    std::vector<LossCurveRow> curves;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
};

/// Mini-batch SGD on V networks, policies, and gamma_pure. Returns with the
/// certificate rewound to the best-validation snapshot. Throws TrainingError
/// on a non-finite loss, naming the offending batch.
TrainResult train(const InterconnectedSystem& system, const Controller& nominal, Certificate& cert,
                  const TrainingSet& data, const LossWeights& weights, const TrainOptions& options);

/// CSV: epoch,split,l_total,l_imi,l_p,l_d
std::string loss_curves_csv(const std::vector<LossCurveRow>& rows);

}  // namespace razcert
