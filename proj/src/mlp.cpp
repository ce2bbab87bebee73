#include "razcert/mlp.hpp"

#include <cmath>
#include <cstring>

namespace razcert {

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.data.size() + l.b.size();
    return n;
}

Mlp Mlp::create(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng) {
    Mlp net;
    std::vector<std::size_t> dims;
    dims.push_back(in);
    for (std::size_t h : hidden) dims.push_back(h);
    dims.push_back(out);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.w = Matrix(dims[l + 1], dims[l]);
        layer.b = Vec(dims[l + 1], 0.0);
        double bound = std::sqrt(6.0 / double(dims[l] + dims[l + 1]));
        for (double& v : layer.w.data) v = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

GradientBuffer GradientBuffer::zeros_like(const Mlp& net) {
    GradientBuffer g;
    for (const auto& l : net.layers) {
        g.dw.emplace_back(l.w.rows, l.w.cols);
        g.db.emplace_back(l.b.size(), 0.0);
    }
    return g;
}

void GradientBuffer::accumulate(const GradientBuffer& other, double s) {
    for (std::size_t l = 0; l < dw.size(); ++l) {
        for (std::size_t i = 0; i < dw[l].data.size(); ++i) dw[l].data[i] += s * other.dw[l].data[i];
        for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += s * other.db[l][i];
    }
}

void GradientBuffer::scale(double s) {
    for (auto& m : dw)
        for (double& v : m.data) v *= s;
    for (auto& b : db)
        for (double& v : b) v *= s;
}

namespace {

void affine(const Layer& l, std::span<const double> x, Vec& out) {
    out.assign(l.b.begin(), l.b.end());
    for (std::size_t r = 0; r < l.w.rows; ++r) {
        const double* wr = &l.w.data[r * l.w.cols];
        double s = out[r];
        for (std::size_t c = 0; c < l.w.cols; ++c) s += wr[c] * x[c];
        out[r] = s;
    }
}

}  // namespace

Vec forward(const Mlp& net, std::span<const double> x) {
    if (x.size() != net.input_dim())
        throw DimensionError("mlp forward", "input", net.input_dim(), x.size());
    Vec cur(x.begin(), x.end());
    Vec next;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        affine(net.layers[l], cur, next);
        if (l + 1 < net.layers.size())
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        cur.swap(next);
    }
    return cur;
}

const Vec& forward_cached(const Mlp& net, std::span<const double> x, ForwardCache& cache) {
    if (x.size() != net.input_dim())
        throw DimensionError("mlp forward", "input", net.input_dim(), x.size());
    cache.input.assign(x.begin(), x.end());
    cache.pre.resize(net.layers.size());
    cache.post.resize(net.layers.size());
    std::span<const double> cur(cache.input);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        affine(net.layers[l], cur, cache.pre[l]);
        cache.post[l] = cache.pre[l];
        if (l + 1 < net.layers.size())
            for (double& v : cache.post[l]) v = v > 0.0 ? v : 0.0;
        cur = std::span<const double>(cache.post[l]);
    }
    return cache.post.back();
}

Vec backward(const Mlp& net, const ForwardCache& cache, std::span<const double> upstream,
             GradientBuffer& grads) {
    const std::size_t L = net.layers.size();
    Vec delta(upstream.begin(), upstream.end());
    Vec prev_delta;
    for (std::size_t li = L; li-- > 0;) {
        const Layer& layer = net.layers[li];
        // gradient w.r.t. pre-activation of layer li
        if (li + 1 < L) {
            for (std::size_t r = 0; r < delta.size(); ++r)
                if (cache.pre[li][r] <= 0.0) delta[r] = 0.0;  // ReLU subgradient, 0 at 0
        }
        std::span<const double> in =
            li == 0 ? std::span<const double>(cache.input) : std::span<const double>(cache.post[li - 1]);
        Matrix& dw = grads.dw[li];
        Vec& db = grads.db[li];
        for (std::size_t r = 0; r < layer.w.rows; ++r) {
            double d = delta[r];
            db[r] += d;
            double* dwr = &dw.data[r * dw.cols];
            for (std::size_t c = 0; c < layer.w.cols; ++c) dwr[c] += d * in[c];
        }
        prev_delta.assign(layer.w.cols, 0.0);
        for (std::size_t r = 0; r < layer.w.rows; ++r) {
            const double* wr = &layer.w.data[r * layer.w.cols];
            double d = delta[r];
            for (std::size_t c = 0; c < layer.w.cols; ++c) prev_delta[c] += d * wr[c];
        }
        delta.swap(prev_delta);
    }
    return delta;
}

double spectral_norm_upper(const Matrix& w, int iterations, double safety) {
    double frob = 0.0;
    for (double v : w.data) frob += v * v;
    if (frob == 0.0) return 0.0;

    Vec v(w.cols, 1.0 / std::sqrt(double(w.cols)));
    Vec u(w.rows, 0.0);
    double sigma = 0.0;
    for (int it = 0; it < iterations; ++it) {
        // u = W v
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double* wr = &w.data[r * w.cols];
            double s = 0.0;
            for (std::size_t c = 0; c < w.cols; ++c) s += wr[c] * v[c];
            u[r] = s;
        }
        double un = norm2(u);
        if (un == 0.0) return 0.0;
        sigma = un;
        // v = W^T u / |W^T u|
        Vec vt(w.cols, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double* wr = &w.data[r * w.cols];
            double ur = u[r] / un;
            for (std::size_t c = 0; c < w.cols; ++c) vt[c] += wr[c] * ur;
        }
        double vn = norm2(vt);
        if (vn == 0.0) break;
        for (std::size_t c = 0; c < w.cols; ++c) v[c] = vt[c] / vn;
        sigma = vn;
    }
    return sigma * safety;
}

LipschitzBound lipschitz_upper(const Mlp& net, const Box& domain) {
    LipschitzBound bound;
    bound.domain = domain;
    double prod = 1.0;
    for (const auto& l : net.layers) prod *= spectral_norm_upper(l.w);
    bound.value = prod;
    return bound;
}

void sgd_step_inplace(Mlp& net, const GradientBuffer& grads, double lr) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        for (std::size_t i = 0; i < layer.w.data.size(); ++i)
            layer.w.data[i] -= lr * grads.dw[l].data[i];
        for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] -= lr * grads.db[l][i];
    }
}

Mlp sgd_step(const Mlp& net, const GradientBuffer& grads, double lr) {
    Mlp updated = net;
    sgd_step_inplace(updated, grads, lr);
    return updated;
}

namespace {

void push_f64_le(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(bits >> (8 * i)));
}

double read_f64_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(bytes[pos + i]) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_weights(const Mlp& net) {
    std::vector<std::uint8_t> out;
    for (const auto& l : net.layers) {
        for (double v : l.w.data) push_f64_le(out, v);
        for (double v : l.b) push_f64_le(out, v);
    }
    return out;
}

void deserialize_weights(Mlp& net, std::span<const std::uint8_t> bytes) {
    std::size_t expected = net.parameter_count() * 8;
    if (bytes.size() != expected)
        throw FormatError("weight blob has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected));
    std::size_t pos = 0;
    for (auto& l : net.layers) {
        for (double& v : l.w.data) v = read_f64_le(bytes, pos);
        for (double& v : l.b) v = read_f64_le(bytes, pos);
    }
}

}  // namespace razcert
