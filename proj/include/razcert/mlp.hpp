#pragma once

#include <span>
#include <string>
#include <vector>

#include "razcert/types.hpp"

namespace razcert {

/// Feed-forward network: affine layers with ReLU on every layer except the
/// last, which is linear. A network with no hidden layers is a single affine
/// map.
struct Layer {
    Matrix w;  // out x in
    Vec b;     // out
};

struct Mlp {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().w.cols; }
    std::size_t output_dim() const { return layers.back().w.rows; }
    std::size_t parameter_count() const;

    /// Glorot-uniform init: weights uniform in +-sqrt(6/(fan_in+fan_out)),
    /// biases zero. Deterministic for a given rng state.
    static Mlp create(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                      Rng& rng);
};

/// Per-layer gradient arrays mirroring an Mlp's shape.
struct GradientBuffer {
    std::vector<Matrix> dw;
    std::vector<Vec> db;

    static GradientBuffer zeros_like(const Mlp& net);
    void accumulate(const GradientBuffer& other, double scale = 1.0);
    void scale(double s);
};

/// Layer activations saved by forward_cached for the backward pass.
struct ForwardCache {
    Vec input;
    std::vector<Vec> pre;   // pre-activation per layer
    std::vector<Vec> post;  // post-activation per layer (post.back() is the output)
};

Vec forward(const Mlp& net, std::span<const double> x);
const Vec& forward_cached(const Mlp& net, std::span<const double> x, ForwardCache& cache);

/// Exact reverse-mode gradients of (output . upstream) with respect to every
/// parameter, accumulated into grads. Returns the gradient with respect to the
/// input (needed to chain through dynamics and controllers). The ReLU
/// subgradient at 0 is taken as 0.
Vec backward(const Mlp& net, const ForwardCache& cache, std::span<const double> upstream,
             GradientBuffer& grads);

struct LipschitzBound {
    double value = 0.0;
    std::string method = "norm-product";
    Box domain;
};

/// Sound global Lipschitz upper bound: product over layers of the spectral
/// norm of the weight matrix (ReLU is 1-Lipschitz). Spectral norms come from
/// 200 power-iteration steps, each multiplied by a 1.01 safety factor. The
/// bound is domain independent, hence valid on the given box.
LipschitzBound lipschitz_upper(const Mlp& net, const Box& domain);

double spectral_norm_upper(const Matrix& w, int iterations = 200, double safety = 1.01);

/// parameter := parameter - lr * gradient. Pure: returns the updated network.
Mlp sgd_step(const Mlp& net, const GradientBuffer& grads, double learning_rate);
void sgd_step_inplace(Mlp& net, const GradientBuffer& grads, double learning_rate);

/// Little-endian float64 serialization, layer-major (w row-major, then b).
std::vector<std::uint8_t> serialize_weights(const Mlp& net);
void deserialize_weights(Mlp& net, std::span<const std::uint8_t> bytes);

}  // namespace razcert
