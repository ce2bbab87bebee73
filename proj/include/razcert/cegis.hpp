#pragma once

#include <iosfwd>

#include "razcert/synthesis.hpp"
#include "razcert/verify.hpp"

namespace razcert {

struct CegisOptions {
    int iteration_cap = 100;
    int cex_weight = 8;  // each counterexample is appended this many times
    int trajectories = 30000;
    int horizon = 50;
    std::vector<Box> initial_boxes;  // training initial-state boxes, per agent
    LossWeights weights;
    TrainOptions train;
    VerifyOptions verify;
    std::uint64_t seed = 0;
};

struct CegisIteration {
    int iteration = 0;
    double loss = 0.0;
    std::uint64_t cex_count = 0;
    std::string verdict;
    std::size_t dataset_size = 0;  // after augmentation
};

struct CegisState {
    int iterations = 0;
    std::vector<CegisIteration> history;
    std::size_t dataset_size = 0;
};

struct CegisResult {
    Certificate certificate;
    VerificationReport report;
    CegisState state;
};

/// Train / verify / augment loop. Each iteration retrains from the previous
/// parameters, rebuilds the reach envelope (the policy changed), and feeds
/// verifier counterexamples back into the training set with one simulated
/// closed-loop step each. A zero iteration cap verifies the initial
/// certificate once and returns. `progress`, when given, receives one JSON
/// line per iteration: {iter, loss, cex_count, verdict}.
CegisResult run_cegis(const InterconnectedSystem& system, const Controller& nominal,
                      Certificate initial, TrainingSet dataset, const CegisOptions& options,
                      std::ostream* progress);

/// Converts a verifier counterexample into a training tuple by applying the
/// frozen policy and true dynamics once from the counterexample history.
TrainingTuple tuple_from_counterexample(const InterconnectedSystem& system,
                                        const Certificate& cert, const Counterexample& cex);

}  // namespace razcert
