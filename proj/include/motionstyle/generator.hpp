// Content/style fusion and the pose/face sequence decoders, plus the
// reconstruction loss.
#pragma once

#include "motionstyle/encoders.hpp"

#include <vector>

namespace motionstyle {

enum class GestureHead { pose, face };

template <class S>
struct GestureOutput {
    MatX<S> pose;  // frames x pose_dim
    MatX<S> face;  // frames x face_dim
};

namespace ops {

// style vector broadcast over frames, concatenated with the content matrix
// feature-wise, affine-projected down to d_model
template <class S>
typename Tape<S>::Var fuse(Tape<S>& tape, const ModelVars<S>& v,
                           typename Tape<S>::Var content, typename Tape<S>::Var style) {
    const ModelConfig& cfg = *v.cfg;
    if (tape.val(content).cols() != cfg.d_att())
        throw DataError("fuse: content width " + std::to_string(tape.val(content).cols()) +
                        " does not match d_att " + std::to_string(cfg.d_att()));
    if (tape.val(style).cols() != cfg.style_dim())
        throw DataError("fuse: style width " + std::to_string(tape.val(style).cols()) +
                        " does not match style_dim " + std::to_string(cfg.style_dim()));
    auto rep = tape.repeat_rows(style, tape.val(content).rows());
    auto cat = tape.concat_cols(content, rep);
    return tape.add_rowvec(tape.matmul(cat, v.fuse_w), v.fuse_b);
}

// pre-norm transformer block stack, one output frame per input frame
template <class S>
typename Tape<S>::Var decode(Tape<S>& tape, const ModelVars<S>& v,
                             typename Tape<S>::Var fused, GestureHead head) {
    if (tape.val(fused).cols() != v.cfg->d_model)
        throw DataError("decode: fused width " + std::to_string(tape.val(fused).cols()) +
                        " does not match d_model " + std::to_string(v.cfg->d_model));
    const DecoderVars<S>& dv = head == GestureHead::pose ? v.dec_pose : v.dec_face;
    auto x = fused;
    for (const auto& b : dv.blocks) {
        auto n1 = tape.layer_norm_rows(x, b.ln1_g, b.ln1_b);
        x = tape.add(x, nn::multi_head_self_attention(tape, n1, b.attn));
        auto n2 = tape.layer_norm_rows(x, b.ln2_g, b.ln2_b);
        auto f = tape.tanh_(tape.add_rowvec(tape.matmul(n2, b.ffn_w1), b.ffn_b1));
        x = tape.add(x, tape.add_rowvec(tape.matmul(f, b.ffn_w2), b.ffn_b2));
    }
    return tape.add_rowvec(tape.matmul(x, dv.out_w), dv.out_b);
}

}  // namespace ops

// ---- plain APIs ----

template <class S>
MatX<S> fuse(const ModelParams<S>& params, const MatX<S>& content, const MatX<S>& style) {
    Tape<S> tape;
    ModelVars<S> v = load_model_vars(tape, params, TrainableGroups::none());
    return tape.val(ops::fuse(tape, v, tape.constant(content), tape.constant(style)));
}

template <class S>
MatX<S> decode(const ModelParams<S>& params, const MatX<S>& fused, GestureHead head) {
    Tape<S> tape;
    ModelVars<S> v = load_model_vars(tape, params, TrainableGroups::none());
    return tape.val(ops::decode(tape, v, tape.constant(fused), head));
}

// Full generation path for one (normalized) content input + style vector.
template <class S>
GestureOutput<S> generate_gestures(const ModelParams<S>& params, const MatX<S>& speech,
                                   const MatX<S>& text, const MatX<S>& style) {
    Tape<S> tape;
    ModelVars<S> v = load_model_vars(tape, params, TrainableGroups::none());
    auto content = ops::encode_content(tape, v, tape.constant(speech), tape.constant(text));
    auto fused = ops::fuse(tape, v, content, tape.constant(style));
    GestureOutput<S> out;
    out.pose = tape.val(ops::decode(tape, v, fused, GestureHead::pose));
    out.face = tape.val(ops::decode(tape, v, fused, GestureHead::face));
    return out;
}

// Mean over the batch of ||pose residual||_F + ||face residual||_F.
template <class S>
S reconstruction_loss(const std::vector<GestureOutput<S>>& prediction,
                      const std::vector<GestureOutput<S>>& target) {
    if (prediction.size() != target.size() || prediction.empty())
        throw DataError("reconstruction_loss: batch size mismatch or empty batch");
    S total = S(0);
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const auto& p = prediction[i];
        const auto& t = target[i];
        if (p.pose.rows() != t.pose.rows() || p.pose.cols() != t.pose.cols() ||
            p.face.rows() != t.face.rows() || p.face.cols() != t.face.cols())
            throw DataError("reconstruction_loss: prediction/target shape mismatch");
        total += std::sqrt((p.pose - t.pose).squaredNorm()) +
                 std::sqrt((p.face - t.face).squaredNorm());
    }
    return total / static_cast<S>(prediction.size());
}

template <class S>
S reconstruction_loss(const GestureOutput<S>& prediction, const GestureOutput<S>& target) {
    return reconstruction_loss(std::vector<GestureOutput<S>>{prediction},
                               std::vector<GestureOutput<S>>{target});
}

}  // namespace motionstyle
