#include "razcert/cegis.hpp"

#include <ostream>

namespace razcert {

TrainingTuple tuple_from_counterexample(const InterconnectedSystem& system,
                                        const Certificate& cert, const Counterexample& cex) {
    TrainingTuple t;
    t.agent = cex.agent;
    t.z = cex.z;
    t.provenance = Provenance::Counterexample;
    LocalLayout lay = LocalLayout::for_agent(system, cex.agent);
    std::span<const double> z(t.z);
    t.control = cert.control(system, cex.agent, lay.block(z, 0, 0),
                             lay.dynamics_neighbor_states(z));
    t.next_state = system.agents[std::size_t(cex.agent)].dynamics->step(
        lay.block(z, 0, 0), t.control, lay.dynamics_neighbor_states(z), lay.d_block(z));
    return t;
}

CegisResult run_cegis(const InterconnectedSystem& system, const Controller& nominal,
                      Certificate initial, TrainingSet dataset, const CegisOptions& options,
                      std::ostream* progress) {
    CegisResult result;
    result.certificate = std::move(initial);
    result.certificate.freeze(system);

    auto log_line = [&](int iter, double loss, std::uint64_t cex, const std::string& verdict,
                        std::size_t dataset_size) {
        result.state.history.push_back({iter, loss, cex, verdict, dataset_size});
        if (progress)
            (*progress) << "{\"iter\":" << iter << ",\"loss\":" << loss << ",\"cex_count\":" << cex
                        << ",\"verdict\":\"" << verdict << "\"}\n";
    };

    if (options.iteration_cap <= 0) {
        result.report = verify_certificate(result.certificate, system, options.verify);
        result.state.iterations = 0;
        result.state.dataset_size = dataset.size();
        log_line(0, 0.0, result.report.cex_count(), verdict_name(result.report.verdict),
                 dataset.size());
        result.certificate.verdict = verdict_name(result.report.verdict);
        result.certificate.report_digest = report_digest(result.report);
        return result;
    }

    for (int iter = 1; iter <= options.iteration_cap; ++iter) {
        TrainOptions topt = options.train;
        topt.seed = derive_seed(options.seed, "cegis_train", std::uint64_t(iter));
        TrainResult tr = train(system, nominal, result.certificate, dataset, options.weights, topt);

        VerifyOptions vopt = options.verify;
        vopt.seed = derive_seed(options.seed, "cegis_verify", std::uint64_t(iter));
        result.report = verify_certificate(result.certificate, system, vopt);

        std::uint64_t cex_count = result.report.cex_count();
        result.state.iterations = iter;

        bool done = result.report.verdict == Verdict::Verified || cex_count == 0;
        if (!done) {
            for (const Counterexample& cex : result.report.counterexamples) {
                TrainingTuple t = tuple_from_counterexample(system, result.certificate, cex);
                for (int rep = 0; rep < options.cex_weight; ++rep) {
                    dataset.train_idx.push_back(dataset.tuples.size());
                    dataset.tuples.push_back(t);
                }
            }
        }
        log_line(iter, tr.best_val, cex_count, verdict_name(result.report.verdict), dataset.size());
        if (done) break;
    }

    result.state.dataset_size = dataset.size();
    result.certificate.verdict = verdict_name(result.report.verdict);
    result.certificate.report_digest = report_digest(result.report);
    return result;
}

}  // namespace razcert
