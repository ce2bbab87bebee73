#include "razcert/gains.hpp"

namespace razcert {

namespace {

bool allowed(const InterconnectionGraph& g, std::size_t i, std::size_t j) {
    return i == j || g.adjacency[i][j] != 0;
}

}  // namespace

Matrix project_gains(const Matrix& gamma_pure, const InterconnectionGraph& graph, double epsilon) {
    const std::size_t n = std::size_t(graph.agent_count);
    if (gamma_pure.rows != n || gamma_pure.cols != n)
        throw DimensionError("project_gains", "gamma_pure", n, gamma_pure.rows);
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!allowed(graph, i, j)) continue;
            double raw = std::max(0.0, gamma_pure.at(i, j));
            out.at(i, j) = raw;
            row_sum += raw;
        }
        if (row_sum > 1.0 - epsilon) {
            double scale = (1.0 - epsilon) / row_sum;
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) *= scale;
        }
    }
    return out;
}

Matrix project_gains_backward(const Matrix& gamma_pure, const InterconnectionGraph& graph,
                              double epsilon, const Matrix& upstream) {
    const std::size_t n = std::size_t(graph.agent_count);
    Matrix grad(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (allowed(graph, i, j)) row_sum += std::max(0.0, gamma_pure.at(i, j));

        bool scaled = row_sum > 1.0 - epsilon;
        double scale = scaled ? (1.0 - epsilon) / row_sum : 1.0;

        // d gamma_ij / d raw_il = scale * delta_jl - [scaled] * scale * raw_ij / row_sum
        double dot = 0.0;  // sum_j upstream_ij * gamma_ij
        if (scaled) {
            for (std::size_t j = 0; j < n; ++j)
                if (allowed(graph, i, j))
                    dot += upstream.at(i, j) * scale * std::max(0.0, gamma_pure.at(i, j));
        }
        for (std::size_t l = 0; l < n; ++l) {
            if (!allowed(graph, i, l)) continue;
            double d_raw = scale * upstream.at(i, l);
            if (scaled) d_raw -= dot / row_sum;
            // ReLU gate: subgradient 0 at and below zero
            grad.at(i, l) = gamma_pure.at(i, l) > 0.0 ? d_raw : 0.0;
        }
    }
    return grad;
}

}  // namespace razcert
