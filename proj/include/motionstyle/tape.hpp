// Reverse-mode autodiff over dynamically sized Eigen matrices.
//
// A Tape owns a flat list of nodes; ops append nodes and return integer
// handles. backward(loss) seeds a 1x1 loss node and walks the list in
// reverse. Single-threaded by design: one tape per training step.
#pragma once

#include "motionstyle/common.hpp"

#include <cassert>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace motionstyle {

template <class S>
class Tape {
public:
    using Var = std::int32_t;
    using Mat = MatX<S>;

    Var input(Mat value, bool requires_grad) {
        return push(std::move(value), requires_grad, {});
    }

    Var constant(Mat value) { return input(std::move(value), false); }

    const Mat& val(Var v) const { return nodes_[static_cast<std::size_t>(v)].value; }

    // Valid after backward(); zero matrix if the node never received grad.
    const Mat& grad(Var v) {
        Node& n = nodes_[static_cast<std::size_t>(v)];
        ensure_grad(n);
        return n.grad;
    }

    std::size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

    // ---- primitive ops ----

    Var matmul(Var a, Var b) {
        Mat y = val(a) * val(b);
        return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a).noalias() += g * t.val(b).transpose();
            if (t.needs(b)) t.acc(b).noalias() += t.val(a).transpose() * g;
        });
    }

    Var add(Var a, Var b) {
        Mat y = val(a) + val(b);
        return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a) += g;
            if (t.needs(b)) t.acc(b) += g;
        });
    }

    Var sub(Var a, Var b) {
        Mat y = val(a) - val(b);
        return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a) += g;
            if (t.needs(b)) t.acc(b) -= g;
        });
    }

    // bias broadcast over rows: y(r,·) = a(r,·) + v(0,·)
    Var add_rowvec(Var a, Var v) {
        Mat y = val(a).rowwise() + val(v).row(0);
        return push(std::move(y), needs(a) || needs(v), [a, v](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a) += g;
            if (t.needs(v)) t.acc(v) += g.colwise().sum();
        });
    }

    Var add_constmat(Var a, const Mat& c) {
        Mat y = val(a) + c;
        return push(std::move(y), needs(a), [a](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a) += g;
        });
    }

    Var scale(Var a, S k) {
        Mat y = val(a) * k;
        return push(std::move(y), needs(a), [a, k](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a) += g * k;
        });
    }

    Var cmul(Var a, Var b) {
        Mat y = val(a).cwiseProduct(val(b));
        return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a) += g.cwiseProduct(t.val(b));
            if (t.needs(b)) t.acc(b) += g.cwiseProduct(t.val(a));
        });
    }

    Var transpose(Var a) {
        Mat y = val(a).transpose();
        return push(std::move(y), needs(a), [a](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a) += g.transpose();
        });
    }

    Var concat_cols(const std::vector<Var>& parts) {
        Eigen::Index rows = val(parts.front()).rows(), cols = 0;
        for (Var p : parts) cols += val(p).cols();
        Mat y(rows, cols);
        Eigen::Index at = 0;
        bool ng = false;
        for (Var p : parts) {
            y.middleCols(at, val(p).cols()) = val(p);
            at += val(p).cols();
            ng = ng || needs(p);
        }
        return push(std::move(y), ng, [parts](Tape& t, const Mat& g) {
            Eigen::Index at = 0;
            for (Var p : parts) {
                Eigen::Index w = t.val(p).cols();
                if (t.needs(p)) t.acc(p) += g.middleCols(at, w);
                at += w;
            }
        });
    }

    Var concat_cols(Var a, Var b) { return concat_cols(std::vector<Var>{a, b}); }

    Var concat_rows(const std::vector<Var>& parts) {
        Eigen::Index cols = val(parts.front()).cols(), rows = 0;
        for (Var p : parts) rows += val(p).rows();
        Mat y(rows, cols);
        Eigen::Index at = 0;
        bool ng = false;
        for (Var p : parts) {
            y.middleRows(at, val(p).rows()) = val(p);
            at += val(p).rows();
            ng = ng || needs(p);
        }
        return push(std::move(y), ng, [parts](Tape& t, const Mat& g) {
            Eigen::Index at = 0;
            for (Var p : parts) {
                Eigen::Index h = t.val(p).rows();
                if (t.needs(p)) t.acc(p) += g.middleRows(at, h);
                at += h;
            }
        });
    }

    Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n) {
        Mat y = val(a).middleCols(c0, n);
        return push(std::move(y), needs(a), [a, c0, n](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a).middleCols(c0, n) += g;
        });
    }

    Var slice_rows(Var a, Eigen::Index r0, Eigen::Index n) {
        Mat y = val(a).middleRows(r0, n);
        return push(std::move(y), needs(a), [a, r0, n](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a).middleRows(r0, n) += g;
        });
    }

    Var repeat_rows(Var v, Eigen::Index n) {
        Mat y = val(v).row(0).replicate(n, 1);
        return push(std::move(y), needs(v), [v](Tape& t, const Mat& g) {
            if (t.needs(v)) t.acc(v) += g.colwise().sum();
        });
    }

    Var tanh_(Var a) {
        Mat y = val(a).array().tanh().matrix();
        Var out = push(std::move(y), needs(a), {});
        set_back(out, [a, out](Tape& t, const Mat& g) {
            if (t.needs(a))
                t.acc(a).array() += g.array() * (S(1) - t.val(out).array().square());
        });
        return out;
    }

    Var sigmoid_(Var a) {
        Mat y = ((-val(a).array()).exp() + S(1)).inverse().matrix();
        Var out = push(std::move(y), needs(a), {});
        set_back(out, [a, out](Tape& t, const Mat& g) {
            if (t.needs(a)) {
                auto s = t.val(out).array();
                t.acc(a).array() += g.array() * s * (S(1) - s);
            }
        });
        return out;
    }

    Var relu_(Var a) {
        Mat y = val(a).cwiseMax(S(0));
        return push(std::move(y), needs(a), [a](Tape& t, const Mat& g) {
            if (t.needs(a))
                t.acc(a).array() +=
                    g.array() * (t.val(a).array() > S(0)).template cast<S>();
        });
    }

    // row-wise softmax, max-subtracted so finite inputs never produce NaN
    Var softmax_rows(Var a) {
        Mat y = val(a);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            auto row = y.row(r).array();
            row -= row.maxCoeff();
            row = row.exp();
            row /= row.sum();
        }
        Var out = push(std::move(y), needs(a), {});
        set_back(out, [a, out](Tape& t, const Mat& g) {
            if (!t.needs(a)) return;
            const Mat& y = t.val(out);
            Mat& da = t.acc(a);
            for (Eigen::Index r = 0; r < y.rows(); ++r) {
                S dot = g.row(r).dot(y.row(r));
                da.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
            }
        });
        return out;
    }

    // per-row layer norm with affine gamma/beta (both 1 x C)
    Var layer_norm_rows(Var a, Var gamma, Var beta, S eps = S(1e-5)) {
        const Mat& x = val(a);
        const Eigen::Index C = x.cols();
        Mat xhat(x.rows(), C);
        Mat inv_sigma(x.rows(), 1);
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            S mu = x.row(r).mean();
            S var = (x.row(r).array() - mu).square().mean();
            S is = S(1) / std::sqrt(var + eps);
            inv_sigma(r, 0) = is;
            xhat.row(r) = (x.row(r).array() - mu) * is;
        }
        Mat y = (xhat.array().rowwise() * val(gamma).row(0).array()).rowwise() +
                val(beta).row(0).array();
        Var xhat_v = push(std::move(xhat), false, {});
        Var is_v = push(std::move(inv_sigma), false, {});
        return push(std::move(y), needs(a) || needs(gamma) || needs(beta),
                    [a, gamma, beta, xhat_v, is_v, C](Tape& t, const Mat& g) {
                        const Mat& xh = t.val(xhat_v);
                        if (t.needs(gamma))
                            t.acc(gamma) += g.cwiseProduct(xh).colwise().sum();
                        if (t.needs(beta)) t.acc(beta) += g.colwise().sum();
                        if (t.needs(a)) {
                            Mat& da = t.acc(a);
                            const auto gm = t.val(gamma).row(0).array();
                            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                                auto gy = g.row(r).array() * gm;
                                S m1 = gy.mean();
                                S m2 = (gy * xh.row(r).array()).mean();
                                da.row(r).array() +=
                                    t.val(is_v)(r, 0) *
                                    (gy - m1 - xh.row(r).array() * m2);
                            }
                        }
                        (void)C;
                    });
    }

    // 1 x C column means
    Var mean_rows(Var a) {
        const Eigen::Index R = val(a).rows();
        Mat y = val(a).colwise().mean();
        return push(std::move(y), needs(a), [a, R](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a) += (g / S(R)).replicate(R, 1);
        });
    }

    Var mean_all(Var a) {
        const Eigen::Index R = val(a).rows(), C = val(a).cols();
        Mat y(1, 1);
        y(0, 0) = val(a).mean();
        return push(std::move(y), needs(a), [a, R, C](Tape& t, const Mat& g) {
            if (t.needs(a)) t.acc(a).array() += g(0, 0) / S(R * C);
        });
    }

    // Frobenius norm to 1x1; gradient defined as 0 at the origin.
    Var frob_norm(Var a) {
        S n = std::sqrt(val(a).squaredNorm());
        Mat y(1, 1);
        y(0, 0) = n;
        return push(std::move(y), needs(a), [a, n](Tape& t, const Mat& g) {
            if (t.needs(a) && n > S(0)) t.acc(a) += (g(0, 0) / n) * t.val(a);
        });
    }

    // mean over rows of the row-wise L2 distance ||a_i - b_i||
    Var row_l2_mean(Var a, Var b) {
        const Mat d = val(a) - val(b);
        const Eigen::Index R = d.rows();
        Mat norms(R, 1);
        for (Eigen::Index r = 0; r < R; ++r) norms(r, 0) = d.row(r).norm();
        Mat y(1, 1);
        y(0, 0) = norms.col(0).mean();
        Var norms_v = push(std::move(norms), false, {});
        Var diff_v = push(Mat(d), false, {});
        return push(std::move(y), needs(a) || needs(b),
                    [a, b, norms_v, diff_v, R](Tape& t, const Mat& g) {
                        const Mat& nm = t.val(norms_v);
                        const Mat& d = t.val(diff_v);
                        for (Eigen::Index r = 0; r < R; ++r) {
                            if (nm(r, 0) <= S(0)) continue;
                            S k = g(0, 0) / (S(R) * nm(r, 0));
                            if (t.needs(a)) t.acc(a).row(r) += k * d.row(r);
                            if (t.needs(b)) t.acc(b).row(r) -= k * d.row(r);
                        }
                    });
    }

    // Fader penalty: r = |style - pred| elementwise, e = r/(1+r), then the
    // RMS over dimensions of (1 - e), averaged over rows. 1 at r = 0 and
    // monotonically to 0 as every r grows.
    Var fader_penalty(Var style, Var pred) {
        const Mat r = (val(style) - val(pred)).cwiseAbs();
        const Eigen::Index B = r.rows(), D = r.cols();
        Mat q = (r.array() + S(1)).inverse().matrix();  // q = 1 - e = 1/(1+r)
        Mat rms(B, 1);
        for (Eigen::Index i = 0; i < B; ++i)
            rms(i, 0) = std::sqrt(q.row(i).array().square().mean());
        Mat y(1, 1);
        y(0, 0) = rms.col(0).mean();
        Mat sgn = (val(style) - val(pred))
                      .unaryExpr([](S v) { return v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0)); });
        Var q_v = push(std::move(q), false, {});
        Var rms_v = push(std::move(rms), false, {});
        Var sgn_v = push(std::move(sgn), false, {});
        return push(std::move(y), needs(style) || needs(pred),
                    [style, pred, q_v, rms_v, sgn_v, B, D](Tape& t, const Mat& g) {
                        const Mat& q = t.val(q_v);
                        const Mat& rms = t.val(rms_v);
                        const Mat& sgn = t.val(sgn_v);
                        for (Eigen::Index i = 0; i < B; ++i) {
                            if (rms(i, 0) <= S(0)) continue;
                            // d loss / d r_ij = (q_ij / (D*B*rms_i)) * dq/dr with
                            // dq/dr = -q^2 ; dr/dstyle = sgn, dr/dpred = -sgn
                            auto coef = (g(0, 0) / (S(D) * S(B) * rms(i, 0)));
                            auto drow = (-coef) * q.row(i).array().cube() * sgn.row(i).array();
                            if (t.needs(style)) t.acc(style).row(i).array() += drow;
                            if (t.needs(pred)) t.acc(pred).row(i).array() -= drow;
                        }
                    });
    }

    // 1D convolution over the channel-blocked column layout T x (Cin*Lin):
    // column index ci*Lin + i. Output T x (Cout*Lout), kernel (Cout) x (Cin*k),
    // bias 1 x Cout broadcast over positions.
    Var conv1d(Var x, Var kernel, Var bias, Eigen::Index cin, Eigen::Index klen,
               Eigen::Index stride) {
        const Mat& X = val(x);
        const Mat& K = val(kernel);
        const Eigen::Index T = X.rows();
        const Eigen::Index lin = X.cols() / cin;
        const Eigen::Index lout = (lin - klen) / stride + 1;
        const Eigen::Index cout = K.rows();
        Mat y(T, cout * lout);
        for (Eigen::Index co = 0; co < cout; ++co) {
            for (Eigen::Index p = 0; p < lout; ++p) {
                auto ycol = y.col(co * lout + p);
                ycol.setConstant(val(bias)(0, co));
                for (Eigen::Index ci = 0; ci < cin; ++ci)
                    for (Eigen::Index j = 0; j < klen; ++j)
                        ycol += K(co, ci * klen + j) * X.col(ci * lin + p * stride + j);
            }
        }
        return push(std::move(y), needs(x) || needs(kernel) || needs(bias),
                    [x, kernel, bias, cin, klen, stride, lin, lout, cout](Tape& t,
                                                                          const Mat& g) {
                        const Mat& X = t.val(x);
                        const Mat& K = t.val(kernel);
                        for (Eigen::Index co = 0; co < cout; ++co) {
                            for (Eigen::Index p = 0; p < lout; ++p) {
                                auto gcol = g.col(co * lout + p);
                                if (t.needs(bias)) t.acc(bias)(0, co) += gcol.sum();
                                for (Eigen::Index ci = 0; ci < cin; ++ci)
                                    for (Eigen::Index j = 0; j < klen; ++j) {
                                        const Eigen::Index xc = ci * lin + p * stride + j;
                                        if (t.needs(kernel))
                                            t.acc(kernel)(co, ci * klen + j) +=
                                                gcol.dot(X.col(xc));
                                        if (t.needs(x))
                                            t.acc(x).col(xc) += K(co, ci * klen + j) * gcol;
                                    }
                            }
                        }
                    });
    }

    // Numerically stable binary cross-entropy on logits against constant
    // targets in {0,1}; mean over all entries.
    Var bce_with_logits(Var logits, const Mat& targets) {
        const Mat& z = val(logits);
        const Eigen::Index n = z.size();
        S total = S(0);
        for (Eigen::Index r = 0; r < z.rows(); ++r)
            for (Eigen::Index c = 0; c < z.cols(); ++c) {
                S zz = z(r, c);
                total += std::max(zz, S(0)) - zz * targets(r, c) +
                         std::log1p(std::exp(-std::abs(zz)));
            }
        Mat y(1, 1);
        y(0, 0) = total / S(n);
        Var tgt = push(Mat(targets), false, {});
        return push(std::move(y), needs(logits), [logits, tgt, n](Tape& t, const Mat& g) {
            if (!t.needs(logits)) return;
            const Mat& z = t.val(logits);
            const Mat& y = t.val(tgt);
            Mat sig = ((-z.array()).exp() + S(1)).inverse().matrix();
            t.acc(logits) += (g(0, 0) / S(n)) * (sig - y);
        });
    }

    void backward(Var loss) {
        Node& top = nodes_[static_cast<std::size_t>(loss)];
        assert(top.value.rows() == 1 && top.value.cols() == 1);
        ensure_grad(top);
        top.grad(0, 0) = S(1);
        for (std::int32_t i = loss; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.back || !n.needs_grad || n.grad.size() == 0) continue;
            n.back(*this, n.grad);
        }
    }

private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void(Tape&, const Mat&)> back;
        bool needs_grad = false;
    };

    bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v)].needs_grad; }

    void ensure_grad(Node& n) {
        if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols())
            n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    }

    // accumulate target: materializes the (zeroed) grad matrix on demand
    Mat& acc(Var v) {
        Node& n = nodes_[static_cast<std::size_t>(v)];
        ensure_grad(n);
        return n.grad;
    }

    Var push(Mat value, bool needs_grad, std::function<void(Tape&, const Mat&)> back) {
        nodes_.push_back(Node{std::move(value), Mat(), std::move(back), needs_grad});
        return static_cast<Var>(nodes_.size() - 1);
    }

    void set_back(Var v, std::function<void(Tape&, const Mat&)> back) {
        nodes_[static_cast<std::size_t>(v)].back = std::move(back);
    }

    std::vector<Node> nodes_;
};

}  // namespace motionstyle
