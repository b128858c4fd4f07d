// Network building blocks on top of the tape: parameter init, sinusoidal
// positional encodings, multi-head self-attention and stacked LSTMs.
#pragma once

#include "motionstyle/common.hpp"
#include "motionstyle/tape.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace motionstyle::nn {

// Draws in double and casts, so float32 and float64 models start from the
// same numbers.
template <class S>
MatX<S> xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng rng, double gain = 1.0) {
    double a = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat64 m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-a, a);
    return m.cast<S>();
}

// Standard transformer sin/cos table, T x d.
template <class S>
MatX<S> positional_encoding(Eigen::Index T, Eigen::Index d) {
    MatX<S> pe(T, d);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index i = 0; i < d; ++i) {
            double angle = static_cast<double>(t) /
                           std::pow(10000.0, 2.0 * static_cast<double>(i / 2) /
                                                 static_cast<double>(d));
            pe(t, i) = static_cast<S>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
        }
    }
    return pe;
}

// Nearest multiple of n_heads to width (at least n_heads). Attention
// projects to this inner width when the input width does not divide evenly.
inline Eigen::Index attention_inner_width(Eigen::Index width, Eigen::Index n_heads) {
    if (width % n_heads == 0) return width;
    Eigen::Index lo = (width / n_heads) * n_heads;
    Eigen::Index hi = lo + n_heads;
    if (lo == 0) return hi;
    return (width - lo <= hi - width) ? lo : hi;
}

// Multi-head self-attention parameters. `pre` is empty when the input width
// already divides by the head count; otherwise it maps width -> inner.
template <class S>
struct AttentionParams {
    MatX<S> pre;           // width x inner, optional
    MatX<S> wq, wk, wv;    // inner x inner
    MatX<S> wo;            // inner x width
    MatX<S> bo;            // 1 x width
    Eigen::Index n_heads = 1;

    static AttentionParams init(Eigen::Index width, Eigen::Index n_heads, Rng rng) {
        AttentionParams p;
        p.n_heads = n_heads;
        Eigen::Index inner = attention_inner_width(width, n_heads);
        if (inner != width)
            p.pre = xavier_uniform<S>(width, inner, Rng::derive(rng.next_u64(), {0}));
        p.wq = xavier_uniform<S>(inner, inner, Rng::derive(rng.next_u64(), {1}));
        p.wk = xavier_uniform<S>(inner, inner, Rng::derive(rng.next_u64(), {2}));
        p.wv = xavier_uniform<S>(inner, inner, Rng::derive(rng.next_u64(), {3}));
        // small output scale keeps the residual stream near the input early on
        p.wo = xavier_uniform<S>(inner, width, Rng::derive(rng.next_u64(), {4}), 0.1);
        p.bo = MatX<S>::Zero(1, width);
        return p;
    }

    std::vector<std::pair<std::string, MatX<S>*>> tensors(const std::string& prefix) {
        std::vector<std::pair<std::string, MatX<S>*>> out;
        if (pre.size() > 0) out.emplace_back(prefix + ".pre", &pre);
        out.emplace_back(prefix + ".wq", &wq);
        out.emplace_back(prefix + ".wk", &wk);
        out.emplace_back(prefix + ".wv", &wv);
        out.emplace_back(prefix + ".wo", &wo);
        out.emplace_back(prefix + ".bo", &bo);
        return out;
    }
};

template <class S>
struct AttentionVars {
    typename Tape<S>::Var pre = -1, wq = -1, wk = -1, wv = -1, wo = -1, bo = -1;
    Eigen::Index n_heads = 1;
};

template <class S>
AttentionVars<S> load_attention(Tape<S>& tape, const AttentionParams<S>& p, bool trainable) {
    AttentionVars<S> v;
    v.n_heads = p.n_heads;
    if (p.pre.size() > 0) v.pre = tape.input(p.pre, trainable);
    v.wq = tape.input(p.wq, trainable);
    v.wk = tape.input(p.wk, trainable);
    v.wv = tape.input(p.wv, trainable);
    v.wo = tape.input(p.wo, trainable);
    v.bo = tape.input(p.bo, trainable);
    return v;
}

// Scaled dot-product multi-head self-attention over the row (time) axis.
// Returns a T x width matrix; the caller adds the residual.
template <class S>
typename Tape<S>::Var multi_head_self_attention(Tape<S>& tape, typename Tape<S>::Var x,
                                                const AttentionVars<S>& p) {
    using Var = typename Tape<S>::Var;
    Var h = (p.pre >= 0) ? tape.matmul(x, p.pre) : x;
    Var q = tape.matmul(h, p.wq);
    Var k = tape.matmul(h, p.wk);
    Var v = tape.matmul(h, p.wv);
    const Eigen::Index inner = tape.val(q).cols();
    const Eigen::Index dh = inner / p.n_heads;
    const S inv_sqrt = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dh)));
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(p.n_heads));
    for (Eigen::Index head = 0; head < p.n_heads; ++head) {
        Var qh = tape.slice_cols(q, head * dh, dh);
        Var kh = tape.slice_cols(k, head * dh, dh);
        Var vh = tape.slice_cols(v, head * dh, dh);
        Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt);
        Var weights = tape.softmax_rows(scores);
        heads.push_back(tape.matmul(weights, vh));
    }
    Var cat = (heads.size() == 1) ? heads[0] : tape.concat_cols(heads);
    return tape.add_rowvec(tape.matmul(cat, p.wo), p.bo);
}

// ---- stacked LSTM ----

// One layer holds the packed gate weights [x, h] -> 4H in order i, f, g, o.
template <class S>
struct LstmParams {
    std::vector<MatX<S>> w;  // per layer: (in + H) x 4H
    std::vector<MatX<S>> b;  // per layer: 1 x 4H
    Eigen::Index hidden = 0;

    static LstmParams init(Eigen::Index input_dim, Eigen::Index hidden, int layers, Rng rng) {
        LstmParams p;
        p.hidden = hidden;
        Eigen::Index in = input_dim;
        for (int l = 0; l < layers; ++l) {
            p.w.push_back(xavier_uniform<S>(
                in + hidden, 4 * hidden,
                Rng::derive(rng.next_u64(), {static_cast<std::uint64_t>(l)})));
            MatX<S> bias = MatX<S>::Zero(1, 4 * hidden);
            bias.middleCols(hidden, hidden).setConstant(S(1));  // forget gate bias
            p.b.push_back(bias);
            in = hidden;
        }
        return p;
    }

    // order matches load_lstm: all gate weights, then all biases
    std::vector<std::pair<std::string, MatX<S>*>> tensors(const std::string& prefix) {
        std::vector<std::pair<std::string, MatX<S>*>> out;
        for (std::size_t l = 0; l < w.size(); ++l)
            out.emplace_back(prefix + ".w" + std::to_string(l), &w[l]);
        for (std::size_t l = 0; l < b.size(); ++l)
            out.emplace_back(prefix + ".b" + std::to_string(l), &b[l]);
        return out;
    }
};

template <class S>
struct LstmVars {
    std::vector<typename Tape<S>::Var> w, b;
    Eigen::Index hidden = 0;
};

template <class S>
LstmVars<S> load_lstm(Tape<S>& tape, const LstmParams<S>& p, bool trainable) {
    LstmVars<S> v;
    v.hidden = p.hidden;
    for (const auto& m : p.w) v.w.push_back(tape.input(m, trainable));
    for (const auto& m : p.b) v.b.push_back(tape.input(m, trainable));
    return v;
}

// Runs the stack over a time-major input sequence (each element B x D) and
// returns the last layer's final hidden state, B x H.
template <class S>
typename Tape<S>::Var lstm_final_hidden(Tape<S>& tape,
                                        const std::vector<typename Tape<S>::Var>& xs,
                                        const LstmVars<S>& p) {
    using Var = typename Tape<S>::Var;
    const Eigen::Index H = p.hidden;
    const Eigen::Index B = tape.val(xs.front()).rows();
    std::vector<Var> seq = xs;
    Var last_h = -1;
    for (std::size_t layer = 0; layer < p.w.size(); ++layer) {
        Var h = tape.constant(MatX<S>::Zero(B, H));
        Var c = tape.constant(MatX<S>::Zero(B, H));
        std::vector<Var> next;
        next.reserve(seq.size());
        for (Var x_t : seq) {
            Var zin = tape.concat_cols(x_t, h);
            Var gates = tape.add_rowvec(tape.matmul(zin, p.w[layer]), p.b[layer]);
            Var gi = tape.sigmoid_(tape.slice_cols(gates, 0, H));
            Var gf = tape.sigmoid_(tape.slice_cols(gates, H, H));
            Var gg = tape.tanh_(tape.slice_cols(gates, 2 * H, H));
            Var go = tape.sigmoid_(tape.slice_cols(gates, 3 * H, H));
            c = tape.add(tape.cmul(gf, c), tape.cmul(gi, gg));
            h = tape.cmul(go, tape.tanh_(c));
            next.push_back(h);
        }
        seq = std::move(next);
        last_h = h;
    }
    return last_h;
}

// Splits a T x D tape node into T row slices (for single-segment encoding).
template <class S>
std::vector<typename Tape<S>::Var> rows_as_sequence(Tape<S>& tape, typename Tape<S>::Var x) {
    std::vector<typename Tape<S>::Var> out;
    const Eigen::Index T = tape.val(x).rows();
    out.reserve(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) out.push_back(tape.slice_rows(x, t, 1));
    return out;
}

}  // namespace motionstyle::nn
