// Inference path shared by the CLI, the trainer's eval pass and the
// evaluation module: style extraction from raw bundles and full transfer.
#pragma once

#include "motionstyle/disentangle.hpp"
#include "motionstyle/generator.hpp"

#include <vector>

namespace motionstyle {

template <class S>
struct NormalizedBundle {
    MatX<S> speech, text, pose, face, tags;
};

template <class S>
NormalizedBundle<S> normalize_and_cast(const FeatureBundle& b, const NormalizationStats& stats) {
    FeatureBundle n = normalize_bundle(b, stats, NormalizeDirection::forward);
    NormalizedBundle<S> out;
    out.speech = n.speech.cast<S>();
    out.text = n.text.cast<S>();
    out.pose = n.pose.cast<S>();
    out.face = n.face.cast<S>();
    out.tags = n.tags.cast<S>();
    return out;
}

// h_style of one raw (unnormalized) bundle
template <class S>
MatX<S> style_vector_of(const ModelParams<S>& params, const NormalizationStats& stats,
                        const FeatureBundle& bundle) {
    NormalizedBundle<S> n = normalize_and_cast<S>(bundle, stats);
    return encode_style(params, n.speech, n.text, n.pose, n.face, n.tags);
}

// Zero-shot style: mean of encode_style over the provided target segments.
template <class S>
MatX<S> mean_style_vector(const ModelParams<S>& params, const NormalizationStats& stats,
                          const std::vector<FeatureBundle>& targets) {
    if (targets.empty()) throw DataError("mean_style_vector: no target segments");
    MatX<S> acc;
    for (const FeatureBundle& b : targets) {
        MatX<S> s = style_vector_of(params, stats, b);
        if (acc.size() == 0) acc = s;
        else acc += s;
    }
    return acc / static_cast<S>(targets.size());
}

// Source content + given style vector -> denormalized gesture streams.
template <class S>
GestureOutput<double> transfer_gestures(const ModelParams<S>& params,
                                        const NormalizationStats& stats,
                                        const FeatureBundle& source, const MatX<S>& style) {
    NormalizedBundle<S> n = normalize_and_cast<S>(source, stats);
    GestureOutput<S> norm = generate_gestures(params, n.speech, n.text, style);
    FeatureBundle shell;
    shell.speech = Mat64::Zero(source.speech.rows(), stats.speech_mean.cols());
    shell.text = Mat64::Zero(source.text.rows(), stats.text_mean.cols());
    shell.pose = norm.pose.template cast<double>();
    shell.face = norm.face.template cast<double>();
    shell.tags = source.tags;
    FeatureBundle denorm = normalize_bundle(shell, stats, NormalizeDirection::inverse);
    GestureOutput<double> out;
    out.pose = denorm.pose;
    out.face = denorm.face;
    return out;
}

// Transfer packaged as a corpus bundle: predicted gestures, source content
// streams passed through. Writable with write_segment_record.
template <class S>
FeatureBundle transfer_bundle(const ModelParams<S>& params, const NormalizationStats& stats,
                              const FeatureBundle& source, const MatX<S>& style) {
    GestureOutput<double> g = transfer_gestures(params, stats, source, style);
    FeatureBundle out;
    out.speech = source.speech;
    out.text = source.text;
    out.pose = g.pose;
    out.face = g.face;
    out.tags = source.tags;
    return out;
}

// Self-reconstruction: the segment's own style drives its own content.
template <class S>
GestureOutput<double> self_reconstruct(const ModelParams<S>& params,
                                       const NormalizationStats& stats,
                                       const FeatureBundle& segment) {
    return transfer_gestures(params, stats, segment, style_vector_of(params, stats, segment));
}

}  // namespace motionstyle
