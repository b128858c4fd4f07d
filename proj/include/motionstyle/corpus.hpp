// On-disk corpus model: manifest, per-segment binary records, validation,
// split management and feature normalization.
//
// Layout under a corpus root:
//   manifest.json                     UTF-8 manifest (see CorpusManifest)
//   segments/<speaker>/<segment>.bin  one segment record per file
//   normalization_stats.bin           optional, same binary container
#pragma once

#include "motionstyle/common.hpp"
#include "motionstyle/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace motionstyle {

using FeatureBundle = SegmentRecord;  // speech/text/pose/face matrices + 1xK tags

struct SplitLists {
    std::vector<std::string> train, val, test;
};

struct CorpusManifest {
    std::vector<std::string> speakers;
    std::map<std::string, SplitLists> splits;
    Eigen::Index frames_per_segment = 64;
    Eigen::Index mel_bins = 128;
    Eigen::Index text_dim = 768;
    Eigen::Index pose_dim = 22;
    Eigen::Index face_dim = 30;
    std::vector<std::string> tag_vocabulary;
    std::string normalization_stats_path;  // optional, relative to root

    Eigen::Index tag_count() const { return static_cast<Eigen::Index>(tag_vocabulary.size()); }
};

struct Segment {
    std::string speaker_id;
    std::string segment_id;
    FeatureBundle bundle;
};

struct NormalizationStats {
    Mat64 speech_mean, speech_std;  // 1 x M
    Mat64 text_mean, text_std;      // 1 x text_dim
    Mat64 pose_mean, pose_std;      // 1 x pose_dim
    Mat64 face_mean, face_std;      // 1 x face_dim
    double epsilon = 1e-8;
};

enum class NormalizeDirection { forward, inverse };

// ---- manifest I/O ----

namespace detail {

inline nlohmann::ordered_json manifest_to_json(const CorpusManifest& m) {
    nlohmann::ordered_json j;
    j["speakers"] = m.speakers;
    nlohmann::ordered_json splits;
    for (const auto& sp : m.speakers) {
        const SplitLists& s = m.splits.at(sp);
        splits[sp] = {{"train", s.train}, {"val", s.val}, {"test", s.test}};
    }
    j["splits"] = splits;
    j["frames_per_segment"] = m.frames_per_segment;
    j["mel_bins"] = m.mel_bins;
    j["text_dim"] = m.text_dim;
    j["pose_dim"] = m.pose_dim;
    j["face_dim"] = m.face_dim;
    j["tag_vocabulary"] = m.tag_vocabulary;
    if (!m.normalization_stats_path.empty())
        j["normalization_stats_path"] = m.normalization_stats_path;
    return j;
}

template <class T>
T require_field(const nlohmann::json& j, const std::string& key, const std::string& ctx) {
    if (!j.contains(key)) throw DataError(ctx + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(ctx + ": bad field '" + key + "': " + e.what());
    }
}

}  // namespace detail

inline void write_manifest(const std::filesystem::path& root, const CorpusManifest& m) {
    std::filesystem::create_directories(root);
    std::ofstream os(root / "manifest.json", std::ios::trunc);
    if (!os) throw DataError("cannot write manifest at " + (root / "manifest.json").string());
    os << detail::manifest_to_json(m).dump(2) << "\n";
}

inline CorpusManifest read_manifest(const std::filesystem::path& root) {
    const auto path = root / "manifest.json";
    std::ifstream is(path);
    if (!is) throw DataError("missing manifest: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest parse error: " + std::string(e.what()));
    }
    const std::string ctx = "manifest.json";
    CorpusManifest m;
    m.speakers = detail::require_field<std::vector<std::string>>(j, "speakers", ctx);
    m.frames_per_segment = detail::require_field<Eigen::Index>(j, "frames_per_segment", ctx);
    m.mel_bins = detail::require_field<Eigen::Index>(j, "mel_bins", ctx);
    m.text_dim = detail::require_field<Eigen::Index>(j, "text_dim", ctx);
    m.pose_dim = detail::require_field<Eigen::Index>(j, "pose_dim", ctx);
    m.face_dim = detail::require_field<Eigen::Index>(j, "face_dim", ctx);
    m.tag_vocabulary = detail::require_field<std::vector<std::string>>(j, "tag_vocabulary", ctx);
    auto splits = detail::require_field<nlohmann::json>(j, "splits", ctx);
    for (const auto& sp : m.speakers) {
        if (!splits.contains(sp)) throw DataError(ctx + ": no splits for speaker " + sp);
        SplitLists s;
        s.train = detail::require_field<std::vector<std::string>>(splits[sp], "train", ctx);
        s.val = detail::require_field<std::vector<std::string>>(splits[sp], "val", ctx);
        s.test = detail::require_field<std::vector<std::string>>(splits[sp], "test", ctx);
        m.splits[sp] = std::move(s);
    }
    if (j.contains("normalization_stats_path"))
        m.normalization_stats_path = j["normalization_stats_path"].get<std::string>();
    return m;
}

inline std::filesystem::path segment_path(const std::filesystem::path& root,
                                          const std::string& speaker, const std::string& id) {
    return root / "segments" / speaker / (id + ".bin");
}

// ---- bundle validation ----

inline void check_finite(const Mat64& m, const std::string& stream, const std::string& where) {
    if (m.allFinite()) return;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            if (!std::isfinite(m(r, c)))
                throw DataError(where + ": " + stream + " contains a non-finite value at (" +
                                std::to_string(r) + ", " + std::to_string(c) + ")");
}

inline void validate_bundle(const FeatureBundle& b, const CorpusManifest& m,
                            const std::string& where) {
    const Eigen::Index T = m.frames_per_segment;
    auto check_shape = [&](const Mat64& mat, Eigen::Index rows, Eigen::Index cols,
                           const char* stream) {
        if (mat.rows() != rows || mat.cols() != cols)
            throw DataError(where + ": " + stream + " is " + std::to_string(mat.rows()) + "x" +
                            std::to_string(mat.cols()) + ", expected " + std::to_string(rows) +
                            "x" + std::to_string(cols));
    };
    check_shape(b.speech, T, m.mel_bins, "speech");
    check_shape(b.text, T, m.text_dim, "text");
    check_shape(b.pose, T, m.pose_dim, "pose");
    check_shape(b.face, T, m.face_dim, "face");
    check_shape(b.tags, 1, m.tag_count(), "tags");
    check_finite(b.speech, "speech", where);
    check_finite(b.text, "text", where);
    check_finite(b.pose, "pose", where);
    check_finite(b.face, "face", where);
    for (Eigen::Index c = 0; c < b.tags.cols(); ++c)
        if (b.tags(0, c) != 0.0 && b.tags(0, c) != 1.0)
            throw DataError(where + ": tags entry " + std::to_string(c) + " is not binary");
}

// Read-only lazy segment access. Never caches and never writes, so repeated
// reads are bit-identical and concurrent readers are safe.
class CorpusAccessor {
public:
    CorpusAccessor(std::filesystem::path root, CorpusManifest manifest)
        : root_(std::move(root)), manifest_(std::move(manifest)) {}

    const CorpusManifest& manifest() const { return manifest_; }
    const std::filesystem::path& root() const { return root_; }

    FeatureBundle load(const std::string& speaker, const std::string& id) const {
        FeatureBundle b = read_segment_record(segment_path(root_, speaker, id));
        validate_bundle(b, manifest_, "segment " + speaker + "/" + id);
        return b;
    }

    Segment load_segment(const std::string& speaker, const std::string& id) const {
        return Segment{speaker, id, load(speaker, id)};
    }

    std::size_t segment_count() const {
        std::size_t n = 0;
        for (const auto& sp : manifest_.speakers) {
            const SplitLists& s = manifest_.splits.at(sp);
            n += s.train.size() + s.val.size() + s.test.size();
        }
        return n;
    }

    // all ids of a split, in manifest order
    std::vector<std::pair<std::string, std::string>> split_ids(const std::string& which) const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& sp : manifest_.speakers) {
            const SplitLists& s = manifest_.splits.at(sp);
            const std::vector<std::string>* ids = which == "train" ? &s.train
                                                : which == "val"   ? &s.val
                                                                   : &s.test;
            for (const auto& id : *ids) out.emplace_back(sp, id);
        }
        return out;
    }

private:
    std::filesystem::path root_;
    CorpusManifest manifest_;
};

// Loads the manifest, checks split sanity and validates every declared
// segment once. Returns the manifest and a lazy accessor.
inline std::pair<CorpusManifest, CorpusAccessor> validate_and_load_corpus(
    const std::filesystem::path& root) {
    CorpusManifest m = read_manifest(root);
    {
        std::set<std::string> tags(m.tag_vocabulary.begin(), m.tag_vocabulary.end());
        if (tags.size() != m.tag_vocabulary.size())
            throw DataError("manifest.json: tag_vocabulary entries are not unique");
    }
    CorpusAccessor accessor(root, m);
    for (const auto& sp : m.speakers) {
        if (!m.splits.count(sp)) throw DataError("manifest.json: no splits for speaker " + sp);
        const SplitLists& s = m.splits.at(sp);
        std::set<std::string> seen;
        for (const auto* ids : {&s.train, &s.val, &s.test})
            for (const auto& id : *ids)
                if (!seen.insert(id).second)
                    throw DataError("duplicate segment id " + id + " for speaker " + sp);
        for (const auto* ids : {&s.train, &s.val, &s.test})
            for (const auto& id : *ids) accessor.load(sp, id);  // shape/finite checks
    }
    return {m, std::move(accessor)};
}

inline void write_corpus_segment(const std::filesystem::path& root, const Segment& seg) {
    const auto path = segment_path(root, seg.speaker_id, seg.segment_id);
    std::filesystem::create_directories(path.parent_path());
    write_segment_record(path, seg.bundle);
}

// ---- normalization ----

namespace detail {

struct RunningMoments {
    Vec64 sum, sumsq;
    double n = 0;
    void init(Eigen::Index c) {
        sum = Vec64::Zero(c);
        sumsq = Vec64::Zero(c);
        n = 0;
    }
    void accumulate(const Mat64& m) {
        sum += m.colwise().sum().transpose();
        sumsq += m.array().square().matrix().colwise().sum().transpose();
        n += static_cast<double>(m.rows());
    }
    void finish(Mat64& mean, Mat64& stdev, double epsilon) const {
        mean = (sum / n).transpose();
        Mat64 var = (sumsq / n).transpose() - mean.array().square().matrix();
        stdev = var.array().max(0.0).sqrt().max(epsilon).matrix();
    }
};

}  // namespace detail

// Per-channel mean/std over all frames of the given (train) bundles.
// Population std, clamped below by epsilon for degenerate channels.
inline NormalizationStats compute_normalization_stats(const std::vector<const FeatureBundle*>& train,
                                                      double epsilon = 1e-8) {
    if (train.empty()) throw DataError("compute_normalization_stats: empty input");
    detail::RunningMoments speech, text, pose, face;
    speech.init(train.front()->speech.cols());
    text.init(train.front()->text.cols());
    pose.init(train.front()->pose.cols());
    face.init(train.front()->face.cols());
    for (const FeatureBundle* b : train) {
        if (b->speech.cols() != speech.sum.size() || b->text.cols() != text.sum.size() ||
            b->pose.cols() != pose.sum.size() || b->face.cols() != face.sum.size())
            throw DataError("compute_normalization_stats: inconsistent bundle dimensions");
        speech.accumulate(b->speech);
        text.accumulate(b->text);
        pose.accumulate(b->pose);
        face.accumulate(b->face);
    }
    NormalizationStats s;
    s.epsilon = epsilon;
    speech.finish(s.speech_mean, s.speech_std, epsilon);
    text.finish(s.text_mean, s.text_std, epsilon);
    pose.finish(s.pose_mean, s.pose_std, epsilon);
    face.finish(s.face_mean, s.face_std, epsilon);
    return s;
}

inline NormalizationStats compute_normalization_stats(const std::vector<FeatureBundle>& train,
                                                      double epsilon = 1e-8) {
    std::vector<const FeatureBundle*> ptrs;
    ptrs.reserve(train.size());
    for (const auto& b : train) ptrs.push_back(&b);
    return compute_normalization_stats(ptrs, epsilon);
}

// forward: x -> (x - mean) / (2 std), so the train set lands on mean 0 and
// std 0.5 per channel. inverse is the exact algebraic inverse. Tags pass
// through untouched.
inline FeatureBundle normalize_bundle(const FeatureBundle& b, const NormalizationStats& s,
                                      NormalizeDirection dir) {
    auto apply = [&](const Mat64& x, const Mat64& mean, const Mat64& stdev,
                     const char* stream) -> Mat64 {
        if (x.cols() != mean.cols() || x.cols() != stdev.cols())
            throw DataError(std::string("normalize_bundle: ") + stream + " has " +
                            std::to_string(x.cols()) + " channels, stats have " +
                            std::to_string(mean.cols()));
        if (dir == NormalizeDirection::forward)
            return (x.rowwise() - mean.row(0)).array().rowwise() /
                   (2.0 * stdev.row(0).array());
        return (x.array().rowwise() * (2.0 * stdev.row(0).array())).matrix().rowwise() +
               mean.row(0);
    };
    FeatureBundle out;
    out.speech = apply(b.speech, s.speech_mean, s.speech_std, "speech");
    out.text = apply(b.text, s.text_mean, s.text_std, "text");
    out.pose = apply(b.pose, s.pose_mean, s.pose_std, "pose");
    out.face = apply(b.face, s.face_mean, s.face_std, "face");
    out.tags = b.tags;
    return out;
}

// Stats reuse the five-slot segment container: stream slots are 2 x channels
// (row 0 mean, row 1 std); the tags slot is a 1x1 epsilon.
inline void write_normalization_stats(const std::filesystem::path& path,
                                      const NormalizationStats& s) {
    SegmentRecord rec;
    auto pack = [](const Mat64& mean, const Mat64& stdev) {
        Mat64 m(2, mean.cols());
        m.row(0) = mean.row(0);
        m.row(1) = stdev.row(0);
        return m;
    };
    rec.speech = pack(s.speech_mean, s.speech_std);
    rec.text = pack(s.text_mean, s.text_std);
    rec.pose = pack(s.pose_mean, s.pose_std);
    rec.face = pack(s.face_mean, s.face_std);
    rec.tags = Mat64::Constant(1, 1, s.epsilon);
    write_segment_record(path, rec);
}

inline NormalizationStats read_normalization_stats(const std::filesystem::path& path) {
    SegmentRecord rec = read_segment_record(path);
    auto unpack = [&](const Mat64& m, Mat64& mean, Mat64& stdev, const char* stream) {
        if (m.rows() != 2)
            throw DataError("stats record " + path.string() + ": " + stream +
                            " slot must have 2 rows");
        mean = m.row(0);
        stdev = m.row(1);
    };
    NormalizationStats s;
    unpack(rec.speech, s.speech_mean, s.speech_std, "speech");
    unpack(rec.text, s.text_mean, s.text_std, "text");
    unpack(rec.pose, s.pose_mean, s.pose_std, "pose");
    unpack(rec.face, s.face_mean, s.face_std, "face");
    s.epsilon = rec.tags(0, 0);
    return s;
}

}  // namespace motionstyle
