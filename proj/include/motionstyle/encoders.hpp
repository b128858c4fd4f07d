// Content and style encoders.
//
// Content: per-frame speech encodings concatenated with the frame-aligned
// text embeddings, then residual multi-head self-attention over time.
// Style: self-attention over [text, speech] mean-pooled over time, the
// final hidden states of the pose and face LSTM stacks, and the binary
// dialog-tag vector, concatenated into one fixed-width vector.
#pragma once

#include "motionstyle/corpus.hpp"
#include "motionstyle/model.hpp"

#include <set>
#include <string>
#include <vector>

namespace motionstyle {

enum class SpeechPurpose { content, style };

// ---- tape-level ops (shared by trainer and the plain APIs) ----

namespace ops {

template <class S>
typename Tape<S>::Var encode_speech_frames(Tape<S>& tape, const ModelVars<S>& v,
                                           typename Tape<S>::Var speech, SpeechPurpose purpose) {
    const ModelConfig& cfg = *v.cfg;
    if (tape.val(speech).cols() != cfg.mel_bins)
        throw DataError("encode_speech_frames: speech has " +
                        std::to_string(tape.val(speech).cols()) + " mel bins, config expects " +
                        std::to_string(cfg.mel_bins));
    const SpeechVars<S>& sv =
        purpose == SpeechPurpose::content ? v.speech_content : v.speech_style;
    auto h = tape.tanh_(tape.conv1d(speech, sv.conv_k, sv.conv_b, 1, cfg.conv_kernel,
                                    cfg.conv_stride));
    return tape.add_rowvec(tape.matmul(h, sv.proj_w), sv.proj_b);
}

template <class S>
typename Tape<S>::Var encode_content(Tape<S>& tape, const ModelVars<S>& v,
                                     typename Tape<S>::Var speech, typename Tape<S>::Var text) {
    if (tape.val(speech).rows() != tape.val(text).rows())
        throw DataError("encode_content: speech and text frame counts differ (" +
                        std::to_string(tape.val(speech).rows()) + " vs " +
                        std::to_string(tape.val(text).rows()) + ")");
    if (tape.val(speech).rows() != v.cfg->frames)
        throw DataError("encode_content: " + std::to_string(tape.val(speech).rows()) +
                        " frames, config expects " + std::to_string(v.cfg->frames));
    if (tape.val(text).cols() != v.cfg->text_dim)
        throw DataError("encode_content: text has " + std::to_string(tape.val(text).cols()) +
                        " channels, config expects " + std::to_string(v.cfg->text_dim));
    auto enc = encode_speech_frames(tape, v, speech, SpeechPurpose::content);
    auto x = tape.concat_cols(enc, text);
    if (v.pe_att.size() > 0) x = tape.add_constmat(x, v.pe_att);
    auto attn = nn::multi_head_self_attention(tape, x, v.content_attn);
    return tape.add(x, attn);
}

// pooled style-side attention over [text, speech encodings]; 1 x d_att
template <class S>
typename Tape<S>::Var style_pooled_attention(Tape<S>& tape, const ModelVars<S>& v,
                                             typename Tape<S>::Var speech,
                                             typename Tape<S>::Var text) {
    if (tape.val(speech).rows() != tape.val(text).rows())
        throw DataError("encode_style: speech and text frame counts differ");
    if (tape.val(speech).rows() != v.cfg->frames)
        throw DataError("encode_style: " + std::to_string(tape.val(speech).rows()) +
                        " frames, config expects " + std::to_string(v.cfg->frames));
    if (tape.val(text).cols() != v.cfg->text_dim)
        throw DataError("encode_style: text has " + std::to_string(tape.val(text).cols()) +
                        " channels, config expects " + std::to_string(v.cfg->text_dim));
    auto enc = encode_speech_frames(tape, v, speech, SpeechPurpose::style);
    auto x = tape.concat_cols(text, enc);
    if (v.pe_att.size() > 0) x = tape.add_constmat(x, v.pe_att);
    auto attn = nn::multi_head_self_attention(tape, x, v.style_attn);
    return tape.mean_rows(tape.add(x, attn));
}

// full style vector for one segment (1 x style_dim)
template <class S>
typename Tape<S>::Var encode_style(Tape<S>& tape, const ModelVars<S>& v,
                                   typename Tape<S>::Var speech, typename Tape<S>::Var text,
                                   typename Tape<S>::Var pose, typename Tape<S>::Var face,
                                   typename Tape<S>::Var tags) {
    const ModelConfig& cfg = *v.cfg;
    if (tape.val(pose).cols() != cfg.pose_dim || tape.val(face).cols() != cfg.face_dim)
        throw DataError("encode_style: pose/face column count does not match config");
    if (tape.val(tags).cols() != cfg.tag_count)
        throw DataError("encode_style: tags vector has " +
                        std::to_string(tape.val(tags).cols()) + " entries, config expects " +
                        std::to_string(cfg.tag_count));
    auto pooled = style_pooled_attention(tape, v, speech, text);
    auto hp = nn::lstm_final_hidden(tape, nn::rows_as_sequence(tape, pose), v.lstm_pose);
    auto hf = nn::lstm_final_hidden(tape, nn::rows_as_sequence(tape, face), v.lstm_face);
    return tape.concat_cols({pooled, hp, hf, tags});
}

}  // namespace ops

// ---- plain single-segment APIs ----

template <class S>
MatX<S> encode_speech_frames(const ModelParams<S>& params, const MatX<S>& speech,
                             SpeechPurpose purpose) {
    Tape<S> tape;
    ModelVars<S> v = load_model_vars(tape, params, TrainableGroups::none());
    auto out = ops::encode_speech_frames(tape, v, tape.constant(speech), purpose);
    return tape.val(out);
}

// h_content, frames x d_att
template <class S>
MatX<S> encode_content(const ModelParams<S>& params, const MatX<S>& speech,
                       const MatX<S>& text) {
    Tape<S> tape;
    ModelVars<S> v = load_model_vars(tape, params, TrainableGroups::none());
    auto out = ops::encode_content(tape, v, tape.constant(speech), tape.constant(text));
    return tape.val(out);
}

// h_style, 1 x style_dim
template <class S>
MatX<S> encode_style(const ModelParams<S>& params, const MatX<S>& speech, const MatX<S>& text,
                     const MatX<S>& pose, const MatX<S>& face, const MatX<S>& tags) {
    Tape<S> tape;
    ModelVars<S> v = load_model_vars(tape, params, TrainableGroups::none());
    auto out = ops::encode_style(tape, v, tape.constant(speech), tape.constant(text),
                                 tape.constant(pose), tape.constant(face), tape.constant(tags));
    return tape.val(out);
}

// Multi-label one-hot over the ordered vocabulary: 1 at each present tag.
inline Mat64 encode_dialog_tags(const std::set<std::string>& tags,
                                const std::vector<std::string>& vocabulary) {
    Mat64 out = Mat64::Zero(1, static_cast<Eigen::Index>(vocabulary.size()));
    for (const auto& tag : tags) {
        auto it = std::find(vocabulary.begin(), vocabulary.end(), tag);
        if (it == vocabulary.end())
            throw DataError("encode_dialog_tags: unknown tag '" + tag + "'");
        out(0, static_cast<Eigen::Index>(it - vocabulary.begin())) = 1.0;
    }
    return out;
}

}  // namespace motionstyle
