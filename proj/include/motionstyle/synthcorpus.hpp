// Synthetic multimodal corpus with known per-speaker style factors.
//
// Every segment carries a latent "content" signal (a small bank of
// sinusoids). The latent drives a base gesture trajectory plus correlated
// mel-like speech and text matrices; pose and face streams are the base
// trajectory transformed by the speaker's StyleFactors. The factors and the
// per-segment content seeds are written to a style_factors.json sidecar, so
// an exact style-transfer oracle can regenerate what an ideal transfer
// would produce. The model never reads the sidecar.
#pragma once

#include "motionstyle/common.hpp"
#include "motionstyle/corpus.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace motionstyle {

struct StyleFactors {
    double amplitude_scale = 1.0;
    double offset_x = 0.0, offset_y = 0.0;   // normalized pixel units
    double frequency_bias = 0.0;             // radians/frame, added to each component
    double smoothing = 0.0;                  // EMA coefficient in [0, 1)
    Vec64 tag_profile;                       // categorical over K tags

    static StyleFactors identity(Eigen::Index k) {
        StyleFactors f;
        f.tag_profile = Vec64::Constant(k, 1.0 / static_cast<double>(k));
        return f;
    }
};

struct SynthConfig {
    int n_speakers = 4;
    int segments_per_speaker = 50;
    std::uint64_t seed = 7;
    Eigen::Index frames_per_segment = 64;
    Eigen::Index mel_bins = 128;
    Eigen::Index text_dim = 768;
    Eigen::Index tag_count = 38;
    // When true, segment i shares one content seed across speakers, which
    // gives the corpus matched cross-speaker segments for oracle checks.
    bool parallel_content = true;
    // Optional explicit factors (size n_speakers); drawn from seed otherwise.
    std::vector<StyleFactors> factors_override;
};

namespace synth_detail {

constexpr int kComponents = 4;
constexpr Eigen::Index kPoseJoints = 11;
constexpr Eigen::Index kFacePoints = 15;
constexpr Eigen::Index kTextBlock = 8;  // frames per "word"

// rest pose, (x, y) per joint, y grows downward
inline const double kRestPose[kPoseJoints][2] = {
    {0.50, 0.42},  // neck
    {0.50, 0.28},  // head
    {0.36, 0.45},  // left shoulder
    {0.30, 0.60},  // left elbow
    {0.26, 0.74},  // left wrist
    {0.64, 0.45},  // right shoulder
    {0.70, 0.60},  // right elbow
    {0.74, 0.74},  // right wrist
    {0.50, 0.66},  // spine
    {0.43, 0.88},  // left hip
    {0.57, 0.88},  // right hip
};

inline const double kJointAmp[kPoseJoints] = {0.012, 0.015, 0.02, 0.06, 0.10,
                                              0.02,  0.06,  0.10, 0.008, 0.006, 0.006};

// face landmarks relative to the head joint
inline const double kRestFace[kFacePoints][2] = {
    {-0.045, -0.045}, {-0.015, -0.050}, {0.015, -0.050}, {0.045, -0.045},  // brows
    {-0.030, -0.020}, {0.030, -0.020},                                     // eyes
    {0.000, -0.010},  {0.000, 0.012},                                      // nose
    {-0.025, 0.035},  {0.025, 0.035},  {0.000, 0.028},  {0.000, 0.045},    // mouth
    {-0.050, 0.020},  {0.050, 0.020},  {0.000, 0.060},                     // jaw, chin
};

inline const double kFaceAmp[kFacePoints] = {0.006, 0.006, 0.006, 0.006, 0.005,
                                             0.005, 0.004, 0.006, 0.012, 0.012,
                                             0.012, 0.014, 0.006, 0.006, 0.008};

struct ContentLatent {
    double amp[kComponents];
    double omega[kComponents];
    double phase[kComponents];
};

inline ContentLatent latent_from_seed(std::uint64_t content_seed) {
    Rng rng(content_seed);
    ContentLatent z;
    for (int k = 0; k < kComponents; ++k) {
        z.amp[k] = rng.uniform(0.5, 1.5);
        double base = 0.10 + 0.07 * k;
        z.omega[k] = rng.uniform(base - 0.02, base + 0.02);
        z.phase[k] = rng.uniform(0.0, 6.283185307179586477);
    }
    return z;
}

// Corpus-level mixing constants, derived once from the corpus seed.
struct MixingTables {
    Mat64 pose_mix;  // pose_dim x components
    Mat64 face_mix;  // face_dim x components
    Mat64 text_proj; // text_dim x components
    Vec64 text_bias; // text_dim

    static MixingTables build(std::uint64_t corpus_seed, Eigen::Index text_dim) {
        MixingTables t;
        Rng rp = Rng::derive(corpus_seed, {101});
        t.pose_mix.resize(2 * kPoseJoints, kComponents);
        for (Eigen::Index j = 0; j < kPoseJoints; ++j)
            for (int k = 0; k < kComponents; ++k) {
                t.pose_mix(2 * j, k) = kJointAmp[j] * rp.uniform(-1.0, 1.0);
                t.pose_mix(2 * j + 1, k) = kJointAmp[j] * rp.uniform(-1.0, 1.0);
            }
        Rng rf = Rng::derive(corpus_seed, {102});
        t.face_mix.resize(2 * kFacePoints, kComponents);
        for (Eigen::Index j = 0; j < kFacePoints; ++j)
            for (int k = 0; k < kComponents; ++k) {
                t.face_mix(2 * j, k) = kFaceAmp[j] * rf.uniform(-1.0, 1.0);
                t.face_mix(2 * j + 1, k) = kFaceAmp[j] * rf.uniform(-1.0, 1.0);
            }
        Rng rt = Rng::derive(corpus_seed, {103});
        t.text_proj.resize(text_dim, kComponents);
        t.text_bias.resize(text_dim);
        for (Eigen::Index i = 0; i < text_dim; ++i) {
            for (int k = 0; k < kComponents; ++k) t.text_proj(i, k) = rt.normal() * 0.8;
            t.text_bias(i) = rt.normal() * 0.1;
        }
        return t;
    }
};

// zero-input-start exponential moving average down the rows
inline Mat64 ema_smooth(const Mat64& x, double sigma) {
    if (sigma <= 0.0) return x;
    Mat64 y(x.rows(), x.cols());
    y.row(0) = x.row(0);
    for (Eigen::Index t = 1; t < x.rows(); ++t)
        y.row(t) = sigma * y.row(t - 1) + (1.0 - sigma) * x.row(t);
    return y;
}

// exact algebraic inverse of ema_smooth
inline Mat64 ema_unsmooth(const Mat64& y, double sigma) {
    if (sigma <= 0.0) return y;
    Mat64 x(y.rows(), y.cols());
    x.row(0) = y.row(0);
    for (Eigen::Index t = 1; t < y.rows(); ++t)
        x.row(t) = (y.row(t) - sigma * y.row(t - 1)) / (1.0 - sigma);
    return x;
}

// base oscillation (zero offset, unit amplitude) with a frequency bias
inline Mat64 oscillation(const ContentLatent& z, const Mat64& mix, Eigen::Index frames,
                         double frequency_bias) {
    Mat64 osc = Mat64::Zero(frames, mix.rows());
    for (Eigen::Index t = 0; t < frames; ++t)
        for (int k = 0; k < kComponents; ++k) {
            double s = z.amp[k] *
                       std::sin((z.omega[k] + frequency_bias) * static_cast<double>(t) +
                                z.phase[k]);
            for (Eigen::Index j = 0; j < mix.rows(); ++j) osc(t, j) += mix(j, k) * s;
        }
    return osc;
}

inline Mat64 rest_row(const double table[][2], Eigen::Index count, double cx, double cy) {
    Mat64 rest(1, 2 * count);
    for (Eigen::Index j = 0; j < count; ++j) {
        rest(0, 2 * j) = table[j][0] + cx;
        rest(0, 2 * j + 1) = table[j][1] + cy;
    }
    return rest;
}

inline Mat64 pose_rest() { return rest_row(kRestPose, kPoseJoints, 0.0, 0.0); }
inline Mat64 face_rest() { return rest_row(kRestFace, kFacePoints, 0.50, 0.28); }

// styled stream = rest + a * EMA[osc(phi)] + offset
inline Mat64 apply_factors(const Mat64& osc, const Mat64& rest, const StyleFactors& f) {
    Mat64 y = f.amplitude_scale * ema_smooth(osc, f.smoothing);
    for (Eigen::Index c = 0; c < y.cols(); ++c)
        y.col(c).array() += rest(0, c) + ((c % 2 == 0) ? f.offset_x : f.offset_y);
    return y;
}

// inverse of apply_factors up to the frequency bias: recovers EMA^-1 of the
// scaled deviations, i.e. the oscillation the stream was rendered from.
inline Mat64 strip_factors(const Mat64& styled, const Mat64& rest, const StyleFactors& f) {
    Mat64 d = styled;
    for (Eigen::Index c = 0; c < d.cols(); ++c)
        d.col(c).array() -= rest(0, c) + ((c % 2 == 0) ? f.offset_x : f.offset_y);
    return ema_unsmooth(d / f.amplitude_scale, f.smoothing);
}

inline Mat64 speech_matrix(const ContentLatent& z, Eigen::Index frames, Eigen::Index mel_bins) {
    Mat64 s(frames, mel_bins);
    const double width = static_cast<double>(mel_bins) / (2.0 * kComponents);
    for (Eigen::Index t = 0; t < frames; ++t) {
        for (Eigen::Index m = 0; m < mel_bins; ++m) {
            double acc = 0.0;
            for (int k = 0; k < kComponents; ++k) {
                double center = (k + 0.5) * static_cast<double>(mel_bins) / kComponents;
                double band = std::exp(-0.5 * std::pow((static_cast<double>(m) - center) / width, 2.0));
                double env = 0.5 + 0.5 * std::sin(z.omega[k] * static_cast<double>(t) + z.phase[k]);
                acc += band * z.amp[k] * env;
            }
            s(t, m) = std::log(0.01 + acc);
        }
    }
    return s;
}

inline Mat64 text_matrix(const ContentLatent& z, const MixingTables& mix, Eigen::Index frames) {
    Mat64 text(frames, mix.text_proj.rows());
    for (Eigen::Index b0 = 0; b0 < frames; b0 += kTextBlock) {
        double tb = static_cast<double>(b0) + 0.5 * (kTextBlock - 1);
        Vec64 zb(kComponents);
        for (int k = 0; k < kComponents; ++k)
            zb(k) = z.amp[k] * std::sin(z.omega[k] * tb + z.phase[k]);
        Vec64 row = ((mix.text_proj * zb + mix.text_bias).array().tanh()).matrix();
        for (Eigen::Index t = b0; t < std::min(frames, b0 + kTextBlock); ++t)
            text.row(t) = row.transpose();
    }
    return text;
}

inline Mat64 sample_tags(const Vec64& profile, Rng& rng) {
    const Eigen::Index k = profile.size();
    Mat64 tags = Mat64::Zero(1, k);
    int count = 1 + (rng.uniform() < 0.35 ? 1 : 0) + (rng.uniform() < 0.1 ? 1 : 0);
    Vec64 w = profile;
    for (int c = 0; c < count; ++c) {
        double total = w.sum();
        if (total <= 0.0) break;
        double u = rng.uniform() * total;
        Eigen::Index pick = 0;
        double run = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) {
            run += w(i);
            if (u <= run) {
                pick = i;
                break;
            }
            pick = i;
        }
        tags(0, pick) = 1.0;
        w(pick) = 0.0;  // without replacement
    }
    return tags;
}

inline std::string speaker_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "sp%02d", i);
    return buf;
}

inline std::string segment_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04d", i);
    return buf;
}

// Stratified, seed-permuted factor assignment so any two speakers are well
// separated in every factor.
inline std::vector<StyleFactors> draw_factors(const SynthConfig& cfg) {
    const int n = cfg.n_speakers;
    std::vector<StyleFactors> out(static_cast<std::size_t>(n));
    auto strata = [&](std::uint64_t salt, double lo, double hi) {
        Rng rng = Rng::derive(cfg.seed, {200, salt});
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
        std::vector<double> vals(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            double frac = (n == 1) ? 0.5 : static_cast<double>(order[static_cast<std::size_t>(i)]) /
                                               static_cast<double>(n - 1);
            double jitter = rng.uniform(-0.25, 0.25) / std::max(1, n - 1);
            vals[static_cast<std::size_t>(i)] = lo + (hi - lo) * std::clamp(frac + jitter, 0.0, 1.0);
        }
        return vals;
    };
    auto amp = strata(1, 0.55, 2.45);
    auto off_angle = strata(2, 0.0, 6.28318);
    auto off_radius = strata(3, 0.02, 0.09);
    auto fbias = strata(4, -0.04, 0.04);
    auto smooth = strata(5, 0.0, 0.75);
    for (int i = 0; i < n; ++i) {
        StyleFactors& f = out[static_cast<std::size_t>(i)];
        f.amplitude_scale = amp[static_cast<std::size_t>(i)];
        f.offset_x = off_radius[static_cast<std::size_t>(i)] * std::cos(off_angle[static_cast<std::size_t>(i)]);
        f.offset_y = off_radius[static_cast<std::size_t>(i)] * std::sin(off_angle[static_cast<std::size_t>(i)]);
        f.frequency_bias = fbias[static_cast<std::size_t>(i)];
        f.smoothing = smooth[static_cast<std::size_t>(i)];
        Rng rt = Rng::derive(cfg.seed, {201, static_cast<std::uint64_t>(i)});
        f.tag_profile.resize(cfg.tag_count);
        for (Eigen::Index t = 0; t < cfg.tag_count; ++t) f.tag_profile(t) = 0.2 + rt.uniform();
        f.tag_profile /= f.tag_profile.sum();
    }
    return out;
}

}  // namespace synth_detail

// Sidecar handle: per-speaker factors plus per-segment content seeds.
class SynthSidecar {
public:
    std::uint64_t corpus_seed = 0;
    std::map<std::string, StyleFactors> factors;
    std::map<std::string, std::map<std::string, std::uint64_t>> content_seeds;

    static SynthSidecar load(const std::filesystem::path& root) {
        std::ifstream is(root / "style_factors.json");
        if (!is) throw DataError("missing style_factors.json under " + root.string());
        nlohmann::json j;
        try {
            is >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("style_factors.json parse error: " + std::string(e.what()));
        }
        SynthSidecar sc;
        sc.corpus_seed = j.at("corpus_seed").get<std::uint64_t>();
        for (auto& [speaker, entry] : j.at("speakers").items()) {
            StyleFactors f;
            const auto& fj = entry.at("factors");
            f.amplitude_scale = fj.at("amplitude_scale").get<double>();
            f.offset_x = fj.at("offset").at(0).get<double>();
            f.offset_y = fj.at("offset").at(1).get<double>();
            f.frequency_bias = fj.at("frequency_bias").get<double>();
            f.smoothing = fj.at("smoothing").get<double>();
            auto prof = fj.at("tag_profile").get<std::vector<double>>();
            f.tag_profile = Eigen::Map<const Vec64>(prof.data(), static_cast<Eigen::Index>(prof.size()));
            sc.factors[speaker] = std::move(f);
            for (auto& [seg, seed] : entry.at("content_seeds").items())
                sc.content_seeds[speaker][seg] = seed.get<std::uint64_t>();
        }
        return sc;
    }

    void save(const std::filesystem::path& root) const {
        nlohmann::ordered_json j;
        j["corpus_seed"] = corpus_seed;
        nlohmann::ordered_json speakers;
        for (const auto& [speaker, f] : factors) {
            nlohmann::ordered_json fj;
            fj["amplitude_scale"] = f.amplitude_scale;
            fj["offset"] = {f.offset_x, f.offset_y};
            fj["frequency_bias"] = f.frequency_bias;
            fj["smoothing"] = f.smoothing;
            std::vector<double> prof(f.tag_profile.data(),
                                     f.tag_profile.data() + f.tag_profile.size());
            fj["tag_profile"] = prof;
            nlohmann::ordered_json seeds;
            for (const auto& [seg, seed] : content_seeds.at(speaker)) seeds[seg] = seed;
            speakers[speaker] = {{"factors", fj}, {"content_seeds", seeds}};
        }
        j["speakers"] = speakers;
        std::ofstream os(root / "style_factors.json", std::ios::trunc);
        if (!os) throw DataError("cannot write style_factors.json under " + root.string());
        os << j.dump(2) << "\n";
    }
};

// Generates the corpus on disk (manifest + segment records + sidecar).
// Fully deterministic given cfg.seed; per-segment streams are keyed by
// (seed, speaker, segment) so generation order never matters.
inline std::pair<CorpusManifest, SynthSidecar> generate_synthetic_corpus(
    const SynthConfig& cfg, const std::filesystem::path& root) {
    namespace sd = synth_detail;
    if (cfg.n_speakers < 1 || cfg.segments_per_speaker < 1)
        throw DataError("generate_synthetic_corpus: counts must be >= 1");
    if (!cfg.factors_override.empty() &&
        static_cast<int>(cfg.factors_override.size()) != cfg.n_speakers)
        throw DataError("generate_synthetic_corpus: factors_override size mismatch");

    CorpusManifest m;
    m.frames_per_segment = cfg.frames_per_segment;
    m.mel_bins = cfg.mel_bins;
    m.text_dim = cfg.text_dim;
    m.pose_dim = 2 * sd::kPoseJoints;
    m.face_dim = 2 * sd::kFacePoints;
    for (Eigen::Index t = 0; t < cfg.tag_count; ++t)
        m.tag_vocabulary.push_back("tag" + std::to_string(t));

    std::vector<StyleFactors> factors =
        cfg.factors_override.empty() ? sd::draw_factors(cfg) : cfg.factors_override;
    for (auto& f : factors)
        if (f.tag_profile.size() != cfg.tag_count)
            f.tag_profile = Vec64::Constant(cfg.tag_count, 1.0 / static_cast<double>(cfg.tag_count));

    const sd::MixingTables mix = sd::MixingTables::build(cfg.seed, cfg.text_dim);
    const Mat64 pose_rest = sd::pose_rest();
    const Mat64 face_rest = sd::face_rest();

    SynthSidecar sidecar;
    sidecar.corpus_seed = cfg.seed;

    const int n = cfg.segments_per_speaker;
    for (int sp = 0; sp < cfg.n_speakers; ++sp) {
        const std::string speaker = sd::speaker_name(sp);
        m.speakers.push_back(speaker);
        sidecar.factors[speaker] = factors[static_cast<std::size_t>(sp)];
        SplitLists splits;
        for (int i = 0; i < n; ++i) {
            const std::string seg_id = sd::segment_name(i);
            std::uint64_t content_seed =
                Rng::derive(cfg.seed, {300, cfg.parallel_content ? 0ULL : static_cast<std::uint64_t>(sp),
                                       static_cast<std::uint64_t>(i)})
                    .next_u64();
            sidecar.content_seeds[speaker][seg_id] = content_seed;
            const sd::ContentLatent z = sd::latent_from_seed(content_seed);
            const StyleFactors& f = factors[static_cast<std::size_t>(sp)];

            FeatureBundle b;
            b.pose = sd::apply_factors(
                sd::oscillation(z, mix.pose_mix, cfg.frames_per_segment, f.frequency_bias),
                pose_rest, f);
            b.face = sd::apply_factors(
                sd::oscillation(z, mix.face_mix, cfg.frames_per_segment, f.frequency_bias),
                face_rest, f);
            b.speech = sd::speech_matrix(z, cfg.frames_per_segment, cfg.mel_bins);
            b.text = sd::text_matrix(z, mix, cfg.frames_per_segment);
            Rng tag_rng = Rng::derive(cfg.seed, {301, static_cast<std::uint64_t>(sp),
                                                 static_cast<std::uint64_t>(i)});
            b.tags = sd::sample_tags(f.tag_profile, tag_rng);

            write_corpus_segment(root, Segment{speaker, seg_id, std::move(b)});

            // deterministic split assignment by index
            int n_test = std::max(1, n / 10), n_val = std::max(1, n / 10);
            if (n < 3) n_test = n_val = 0;
            if (i < n - n_val - n_test) splits.train.push_back(seg_id);
            else if (i < n - n_test) splits.val.push_back(seg_id);
            else splits.test.push_back(seg_id);
        }
        m.splits[speaker] = std::move(splits);
    }

    write_manifest(root, m);
    sidecar.save(root);
    return {m, sidecar};
}

// Ideal transfer result: the source segment's content latent rendered with
// the target factors. Content streams (speech/text/tags) pass through.
inline FeatureBundle oracle_style_transfer(const Segment& source, const StyleFactors& target,
                                           const SynthSidecar& sidecar,
                                           const CorpusManifest& manifest) {
    namespace sd = synth_detail;
    auto sp_it = sidecar.content_seeds.find(source.speaker_id);
    if (sp_it == sidecar.content_seeds.end())
        throw DataError("oracle_style_transfer: segment not of synthetic origin (speaker " +
                        source.speaker_id + " missing from sidecar)");
    auto seg_it = sp_it->second.find(source.segment_id);
    if (seg_it == sp_it->second.end())
        throw DataError("oracle_style_transfer: segment not of synthetic origin (" +
                        source.speaker_id + "/" + source.segment_id + " missing from sidecar)");
    const sd::ContentLatent z = sd::latent_from_seed(seg_it->second);
    const sd::MixingTables mix = sd::MixingTables::build(sidecar.corpus_seed, manifest.text_dim);
    FeatureBundle out;
    out.pose = sd::apply_factors(
        sd::oscillation(z, mix.pose_mix, manifest.frames_per_segment, target.frequency_bias),
        sd::pose_rest(), target);
    out.face = sd::apply_factors(
        sd::oscillation(z, mix.face_mix, manifest.frames_per_segment, target.frequency_bias),
        sd::face_rest(), target);
    out.speech = source.bundle.speech;
    out.text = source.bundle.text;
    out.tags = source.bundle.tags;
    return out;
}

// Stream-level inverse-factor normalization: removes offset, amplitude and
// smoothing, exposing the oscillation the stream was rendered from. The
// frequency bias lives inside the oscillation and is not a stream-level
// operation, so cross-speaker base comparisons need equal biases.
inline Mat64 normalize_pose_by_factors(const Mat64& pose, const StyleFactors& f) {
    return synth_detail::strip_factors(pose, synth_detail::pose_rest(), f);
}

inline Mat64 normalize_face_by_factors(const Mat64& face, const StyleFactors& f) {
    return synth_detail::strip_factors(face, synth_detail::face_rest(), f);
}

}  // namespace motionstyle
