#pragma once

#include "razcert/system.hpp"

namespace razcert {

/// Small-gain projection: mask Gamma_pure by the topology (plus diagonal),
/// rectify negatives, then rescale each row over E_i union {i} by
/// min{1, (1-eps)/row_sum} so every row sum is at most 1-eps.
Matrix project_gains(const Matrix& gamma_pure, const InterconnectionGraph& graph, double epsilon);

/// Pulls a gradient with respect to the projected gains back to Gamma_pure.
/// The row-scaling factor is treated as differentiable via the product rule;
/// the min{1,.} kink uses the active branch.
Matrix project_gains_backward(const Matrix& gamma_pure, const InterconnectionGraph& graph,
                              double epsilon, const Matrix& upstream);

}  // namespace razcert
