// Adversarial style/content disentanglement: the style-regression
// discriminator, its loss, the generator-side adversarial penalty, the
// combined objective and the lambda ramp.
#pragma once

#include "motionstyle/encoders.hpp"

#include <algorithm>
#include <cmath>

namespace motionstyle {

namespace ops {

// two-hidden-layer MLP to the style dimension; rows of `pooled_content`
// may be a pooled batch (B x d_att)
template <class S>
typename Tape<S>::Var discriminator_mlp(Tape<S>& tape, const DiscVars<S>& v,
                                        typename Tape<S>::Var pooled_content) {
    auto h1 = tape.tanh_(tape.add_rowvec(tape.matmul(pooled_content, v.w1), v.b1));
    auto h2 = tape.tanh_(tape.add_rowvec(tape.matmul(h1, v.w2), v.b2));
    return tape.add_rowvec(tape.matmul(h2, v.w3), v.b3);
}

// temporal mean-pool of one content matrix, then the MLP
template <class S>
typename Tape<S>::Var discriminator_predict(Tape<S>& tape, const ModelVars<S>& v,
                                            typename Tape<S>::Var content) {
    if (tape.val(content).cols() != v.cfg->d_att())
        throw DataError("discriminator_predict: content width " +
                        std::to_string(tape.val(content).cols()) + " does not match d_att " +
                        std::to_string(v.cfg->d_att()));
    return discriminator_mlp(tape, v.disc, tape.mean_rows(content));
}

}  // namespace ops

// predicted style vector (1 x style_dim) from a content matrix
template <class S>
MatX<S> discriminator_predict(const ModelParams<S>& params, const MatX<S>& content) {
    Tape<S> tape;
    ModelVars<S> v = load_model_vars(tape, params, TrainableGroups::none());
    return tape.val(ops::discriminator_predict(tape, v, tape.constant(content)));
}

// Mean over rows of the Euclidean distance between style and prediction.
template <class S>
S discriminator_loss(const MatX<S>& style, const MatX<S>& predicted) {
    if (style.rows() != predicted.rows() || style.cols() != predicted.cols())
        throw DataError("discriminator_loss: dimension mismatch");
    S total = S(0);
    for (Eigen::Index r = 0; r < style.rows(); ++r)
        total += (style.row(r) - predicted.row(r)).norm();
    return total / static_cast<S>(style.rows());
}

// Generator-side fader penalty in (0, 1]: raw error r = |style - predicted|
// per dimension, squashed to e = r/(1+r), then the RMS of (1 - e) per row,
// averaged over rows. 1 when the discriminator is perfect, -> 0 as its
// error grows in every dimension.
template <class S>
S adversarial_loss(const MatX<S>& style, const MatX<S>& predicted) {
    if (style.rows() != predicted.rows() || style.cols() != predicted.cols())
        throw DataError("adversarial_loss: dimension mismatch");
    S total = S(0);
    for (Eigen::Index r = 0; r < style.rows(); ++r) {
        auto q = ((style.row(r) - predicted.row(r)).array().abs() + S(1)).inverse();
        total += std::sqrt(q.square().mean());
    }
    return total / static_cast<S>(style.rows());
}

template <class S>
S total_generator_loss(S reconstruction, S adversarial, S lambda) {
    return reconstruction + lambda * adversarial;
}

struct AdversarialSchedule {
    double lambda_step_increment = 0.01;
    double lambda_max = 1.0;
};

// linear ramp from 0, capped
inline double lambda_at_step(std::uint64_t step, const AdversarialSchedule& sched = {}) {
    return std::min(sched.lambda_step_increment * static_cast<double>(step), sched.lambda_max);
}

}  // namespace motionstyle
