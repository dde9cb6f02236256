#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "salsa/core.hpp"

// Internal neural-network building blocks: explicit forward passes with
// cached activations and hand-written backward passes, double precision
// throughout. Shapes follow the (rows = positions, cols = features) layout;
// a batch of B sequences padded to length L is a (B*L) x H matrix.
namespace salsa::model::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

struct Tensor {
    std::string name;
    Mat value;
    Mat grad;

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Glorot-normal initialization from the deterministic stream.
inline void init_glorot(Tensor& t, Rng& rng) {
    double scale = std::sqrt(2.0 / static_cast<double>(t.value.rows() + t.value.cols()));
    for (Eigen::Index c = 0; c < t.value.cols(); ++c)
        for (Eigen::Index r = 0; r < t.value.rows(); ++r) t.value(r, c) = scale * rng.normal();
}

inline void init_zero(Tensor& t) { t.value.setZero(); }

inline void init_ones(Tensor& t) { t.value.setOnes(); }

// ---------------------------------------------------------------------------
// Linear: Y = X W + b
// ---------------------------------------------------------------------------

struct Linear {
    Tensor w, b;

    Linear() = default;
    Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng) {
        w.name = name + ".w";
        w.value.resize(in, out);
        init_glorot(w, rng);
        b.name = name + ".b";
        b.value.resize(1, out);
        init_zero(b);
    }

    Mat forward(const Mat& x, Mat& cache_x) const {
        cache_x = x;
        return (x * w.value).rowwise() + b.value.row(0);
    }

    Mat backward(const Mat& dy, const Mat& cache_x) {
        w.grad.noalias() += cache_x.transpose() * dy;
        b.grad.row(0) += dy.colwise().sum();
        return dy * w.value.transpose();
    }

    void collect(std::vector<Tensor*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

// ---------------------------------------------------------------------------
// LayerNorm over feature rows
// ---------------------------------------------------------------------------

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormTrace {
    Mat xhat;
    Vec inv_std;
};

struct LayerNorm {
    Tensor gamma, beta;

    LayerNorm() = default;
    LayerNorm(const std::string& name, Eigen::Index dim) {
        gamma.name = name + ".gamma";
        gamma.value.resize(1, dim);
        init_ones(gamma);
        beta.name = name + ".beta";
        beta.value.resize(1, dim);
        init_zero(beta);
    }

    Mat forward(const Mat& x, LayerNormTrace& t) const {
        const auto n = static_cast<double>(x.cols());
        t.xhat.resize(x.rows(), x.cols());
        t.inv_std.resize(x.rows());
        Mat y(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            double mu = x.row(r).mean();
            double var = (x.row(r).array() - mu).square().sum() / n;
            double is = 1.0 / std::sqrt(var + kLayerNormEps);
            t.inv_std(r) = is;
            t.xhat.row(r) = (x.row(r).array() - mu) * is;
            y.row(r) = t.xhat.row(r).cwiseProduct(gamma.value.row(0)) + beta.value.row(0);
        }
        return y;
    }

    Mat backward(const Mat& dy, const LayerNormTrace& t) {
        const auto n = static_cast<double>(dy.cols());
        Mat dx(dy.rows(), dy.cols());
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            RowVec g = dy.row(r).cwiseProduct(gamma.value.row(0));
            double mean_g = g.mean();
            double mean_gx = g.cwiseProduct(t.xhat.row(r)).mean();
            dx.row(r) =
                (g.array() - mean_g - t.xhat.row(r).array() * mean_gx) * t.inv_std(r);
            gamma.grad.row(0) += dy.row(r).cwiseProduct(t.xhat.row(r));
            beta.grad.row(0) += dy.row(r);
            (void)n;
        }
        return dx;
    }

    void collect(std::vector<Tensor*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

// ---------------------------------------------------------------------------
// GELU (erf form; smooth, so finite-difference checks are clean)
// ---------------------------------------------------------------------------

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014326779399;
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// ---------------------------------------------------------------------------
// Feed-forward block: W2 gelu(W1 x + b1) + b2
// ---------------------------------------------------------------------------

struct FeedForwardTrace {
    Mat x;
    Mat pre;  // pre-activation
    Mat act;
};

struct FeedForward {
    Linear fc1, fc2;

    FeedForward() = default;
    FeedForward(const std::string& name, Eigen::Index dim, Eigen::Index hidden, Rng& rng)
        : fc1(name + ".fc1", dim, hidden, rng), fc2(name + ".fc2", hidden, dim, rng) {}

    Mat forward(const Mat& x, FeedForwardTrace& t) const {
        t.x = x;
        t.pre = (x * fc1.w.value).rowwise() + fc1.b.value.row(0);
        t.act = t.pre.unaryExpr([](double v) { return gelu(v); });
        return (t.act * fc2.w.value).rowwise() + fc2.b.value.row(0);
    }

    Mat backward(const Mat& dy, const FeedForwardTrace& t) {
        fc2.w.grad.noalias() += t.act.transpose() * dy;
        fc2.b.grad.row(0) += dy.colwise().sum();
        Mat dact = dy * fc2.w.value.transpose();
        Mat dpre = dact.cwiseProduct(t.pre.unaryExpr([](double v) { return gelu_grad(v); }));
        fc1.w.grad.noalias() += t.x.transpose() * dpre;
        fc1.b.grad.row(0) += dpre.colwise().sum();
        return dpre * fc1.w.value.transpose();
    }

    void collect(std::vector<Tensor*>& out) {
        fc1.collect(out);
        fc2.collect(out);
    }
};

// ---------------------------------------------------------------------------
// Multi-head attention
// ---------------------------------------------------------------------------

// Masking contract: `key_len[b]` limits which key positions are visible to
// every query of sequence b; `causal` additionally hides keys beyond the
// query position. Each query row always keeps at least one visible key.
struct AttentionMask {
    const std::vector<int>* key_len = nullptr;  // nullptr: all keys visible
    bool causal = false;
};

struct AttentionTrace {
    Mat q, k, v;        // (B*Lq) x H and (B*Lk) x H
    Mat concat;         // attention output before the output projection
    Mat xq, xkv;        // inputs
    std::vector<Mat> probs;  // per (b, head): Lq x Lk
    int batch = 0, lq = 0, lk = 0;
};

struct MultiHeadAttention {
    Linear wq, wk, wv, wo;
    int heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(const std::string& name, Eigen::Index dim, int m, Rng& rng)
        : wq(name + ".wq", dim, dim, rng),
          wk(name + ".wk", dim, dim, rng),
          wv(name + ".wv", dim, dim, rng),
          wo(name + ".wo", dim, dim, rng),
          heads(m) {}

    // xq: (B*Lq) x H queries; xkv: (B*Lk) x H keys/values.
    Mat forward(const Mat& xq, const Mat& xkv, int batch, int lq, int lk,
                const AttentionMask& mask, AttentionTrace& t) const {
        const auto h = xq.cols();
        const auto d = h / heads;
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

        t.xq = xq;
        t.xkv = xkv;
        t.batch = batch;
        t.lq = lq;
        t.lk = lk;
        t.q = (xq * wq.w.value).rowwise() + wq.b.value.row(0);
        t.k = (xkv * wk.w.value).rowwise() + wk.b.value.row(0);
        t.v = (xkv * wv.w.value).rowwise() + wv.b.value.row(0);
        t.concat.resize(xq.rows(), h);
        t.probs.assign(static_cast<std::size_t>(batch) * static_cast<std::size_t>(heads), {});

        for (int b = 0; b < batch; ++b) {
            int klen = mask.key_len ? (*mask.key_len)[static_cast<std::size_t>(b)] : lk;
            for (int head = 0; head < heads; ++head) {
                auto qb = t.q.block(b * lq, head * d, lq, d);
                auto kb = t.k.block(b * lk, head * d, lk, d);
                auto vb = t.v.block(b * lk, head * d, lk, d);
                Mat scores = qb * kb.transpose() * inv_sqrt_d;
                for (Eigen::Index i = 0; i < scores.rows(); ++i)
                    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
                        bool hidden = j >= klen || (mask.causal && j > i);
                        if (hidden) scores(i, j) = -std::numeric_limits<double>::infinity();
                    }
                // Row softmax with max subtraction.
                Mat p(scores.rows(), scores.cols());
                for (Eigen::Index i = 0; i < scores.rows(); ++i) {
                    double mx = scores.row(i).maxCoeff();
                    p.row(i) = (scores.row(i).array() - mx).exp();
                    p.row(i) /= p.row(i).sum();
                }
                t.probs[static_cast<std::size_t>(b * heads + head)] = p;
                t.concat.block(b * lq, head * d, lq, d).noalias() = p * vb;
            }
        }
        return (t.concat * wo.w.value).rowwise() + wo.b.value.row(0);
    }

    // Returns (d_xq, d_xkv).
    std::pair<Mat, Mat> backward(const Mat& dy, const AttentionTrace& t) {
        const auto h = t.xq.cols();
        const auto d = h / heads;
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

        wo.w.grad.noalias() += t.concat.transpose() * dy;
        wo.b.grad.row(0) += dy.colwise().sum();
        Mat dconcat = dy * wo.w.value.transpose();

        Mat dq = Mat::Zero(t.q.rows(), t.q.cols());
        Mat dk = Mat::Zero(t.k.rows(), t.k.cols());
        Mat dv = Mat::Zero(t.v.rows(), t.v.cols());

        for (int b = 0; b < t.batch; ++b) {
            for (int head = 0; head < heads; ++head) {
                const Mat& p = t.probs[static_cast<std::size_t>(b * heads + head)];
                auto qb = t.q.block(b * t.lq, head * d, t.lq, d);
                auto kb = t.k.block(b * t.lk, head * d, t.lk, d);
                auto vb = t.v.block(b * t.lk, head * d, t.lk, d);
                auto dob = dconcat.block(b * t.lq, head * d, t.lq, d);

                Mat dp = dob * vb.transpose();
                dv.block(b * t.lk, head * d, t.lk, d).noalias() += p.transpose() * dob;
                // Softmax backward: dS = P .* (dP - rowsum(dP .* P)).
                Mat ds(p.rows(), p.cols());
                for (Eigen::Index i = 0; i < p.rows(); ++i) {
                    double dot = dp.row(i).cwiseProduct(p.row(i)).sum();
                    ds.row(i) = p.row(i).cwiseProduct((dp.row(i).array() - dot).matrix());
                }
                dq.block(b * t.lq, head * d, t.lq, d).noalias() += ds * kb * inv_sqrt_d;
                dk.block(b * t.lk, head * d, t.lk, d).noalias() +=
                    ds.transpose() * qb * inv_sqrt_d;
            }
        }

        wq.w.grad.noalias() += t.xq.transpose() * dq;
        wq.b.grad.row(0) += dq.colwise().sum();
        wk.w.grad.noalias() += t.xkv.transpose() * dk;
        wk.b.grad.row(0) += dk.colwise().sum();
        wv.w.grad.noalias() += t.xkv.transpose() * dv;
        wv.b.grad.row(0) += dv.colwise().sum();

        Mat dxq = dq * wq.w.value.transpose();
        Mat dxkv = dk * wk.w.value.transpose() + dv * wv.w.value.transpose();
        return {std::move(dxq), std::move(dxkv)};
    }

    void collect(std::vector<Tensor*>& out) {
        wq.collect(out);
        wk.collect(out);
        wv.collect(out);
        wo.collect(out);
    }
};

// Fixed sinusoidal positional encoding table, max_len x dim.
inline Mat sinusoidal_positions(int max_len, int dim) {
    Mat pe(max_len, dim);
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; i < dim; i += 2) {
            double angle = pos / std::pow(10000.0, static_cast<double>(i) / dim);
            pe(pos, i) = std::sin(angle);
            if (i + 1 < dim) pe(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

}  // namespace salsa::model::nn
