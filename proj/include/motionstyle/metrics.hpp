// Objective evaluation: the pair-specific transfer-strength classifier and
// its accuracy, content preservation (cosine), Minkowski distances,
// kinematic profiles, and style/content embedding export with 2D
// projections for plotting.
#pragma once

#include "motionstyle/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace motionstyle {

// gesture stream for evaluation: per-frame [pose | face], raw coordinate space
inline Mat64 gesture_stream(const FeatureBundle& b) {
    Mat64 s(b.pose.rows(), b.pose.cols() + b.face.cols());
    s << b.pose, b.face;
    return s;
}

inline Mat64 gesture_stream(const GestureOutput<double>& g) {
    Mat64 s(g.pose.rows(), g.pose.cols() + g.face.cols());
    s << g.pose, g.face;
    return s;
}

// ---- transfer-strength classifier (Fu-style) ----

struct ClassifierConfig {
    int lstm_layers = 3;
    Eigen::Index hidden = 24;
    int batch_size = 256;
    int epochs = 16;  // desk-scale stand-in for the reference 15,000
    double lr = 3e-3;
    double threshold = 0.5;
    std::uint64_t seed = 17;
};

// Binary sequence classifier: stacked LSTMs over the gesture stream, dense
// sigmoid readout on the final hidden state. Source segments are trained
// toward output <= 0.5 ("positive"), target segments toward > 0.5.
template <class S>
class StyleClassifier {
public:
    static StyleClassifier train(const std::vector<Mat64>& source_streams,
                                 const std::vector<Mat64>& target_streams,
                                 const ClassifierConfig& cfg) {
        if (source_streams.empty() || target_streams.empty())
            throw DataError("train_style_classifier: both classes must be non-empty");
        StyleClassifier c;
        c.cfg_ = cfg;
        const Eigen::Index dim = source_streams.front().cols();
        c.fit_standardizer(source_streams, target_streams, dim);

        std::vector<const Mat64*> streams;
        std::vector<double> labels;
        for (const auto& s : source_streams) streams.push_back(&s), labels.push_back(0.0);
        for (const auto& s : target_streams) streams.push_back(&s), labels.push_back(1.0);

        c.lstm_ = nn::LstmParams<S>::init(dim, cfg.hidden, cfg.lstm_layers,
                                          Rng::derive(cfg.seed, {1}));
        c.out_w_ = nn::xavier_uniform<S>(cfg.hidden, 1, Rng::derive(cfg.seed, {2}));
        c.out_b_ = MatX<S>::Zero(1, 1);

        AdamOptimizer<S> opt(0.9, 0.999, 1e-8);
        std::vector<MatX<S>*> tensors;
        for (auto& [name, t] : c.lstm_.tensors("lstm")) tensors.push_back(t);
        tensors.push_back(&c.out_w_);
        tensors.push_back(&c.out_b_);
        opt.attach(tensors);

        const std::size_t n = streams.size();
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            Rng shuffle = Rng::derive(cfg.seed, {3, static_cast<std::uint64_t>(epoch)});
            for (std::size_t i = n - 1; i > 0; --i)
                std::swap(order[i], order[static_cast<std::size_t>(shuffle.below(i + 1))]);
            for (std::size_t at = 0; at < n; at += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t bsz = std::min(static_cast<std::size_t>(cfg.batch_size), n - at);
                c.train_minibatch(streams, labels, order, at, bsz, opt, tensors);
            }
        }
        return c;
    }

    // sigmoid output; > threshold means "target style"
    double predict(const Mat64& stream) const {
        Tape<S> tape;
        nn::LstmVars<S> lv = nn::load_lstm(tape, lstm_, false);
        MatX<S> x = standardize(stream);
        std::vector<typename Tape<S>::Var> seq;
        for (Eigen::Index t = 0; t < x.rows(); ++t)
            seq.push_back(tape.constant(MatX<S>(x.row(t))));
        auto h = nn::lstm_final_hidden(tape, seq, lv);
        auto z = tape.add_rowvec(tape.matmul(h, tape.constant(out_w_)), tape.constant(out_b_));
        double logit = static_cast<double>(tape.val(z)(0, 0));
        return 1.0 / (1.0 + std::exp(-logit));
    }

    double threshold() const { return cfg_.threshold; }

private:
    void fit_standardizer(const std::vector<Mat64>& a, const std::vector<Mat64>& b,
                          Eigen::Index dim) {
        Vec64 sum = Vec64::Zero(dim), sumsq = Vec64::Zero(dim);
        double n = 0;
        for (const auto* set : {&a, &b})
            for (const auto& s : *set) {
                if (s.cols() != dim)
                    throw DataError("train_style_classifier: inconsistent stream widths");
                sum += s.colwise().sum().transpose();
                sumsq += s.array().square().matrix().colwise().sum().transpose();
                n += static_cast<double>(s.rows());
            }
        in_mean_ = (sum / n).transpose();
        in_std_ = ((sumsq / n).transpose() - in_mean_.array().square().matrix())
                      .array()
                      .max(0.0)
                      .sqrt()
                      .max(1e-8)
                      .matrix();
    }

    MatX<S> standardize(const Mat64& stream) const {
        if (stream.cols() != in_mean_.cols())
            throw DataError("classifier input width " + std::to_string(stream.cols()) +
                            " does not match training width " + std::to_string(in_mean_.cols()));
        return ((stream.rowwise() - in_mean_.row(0)).array().rowwise() /
                in_std_.row(0).array())
            .matrix()
            .cast<S>();
    }

    void train_minibatch(const std::vector<const Mat64*>& streams,
                         const std::vector<double>& labels,
                         const std::vector<std::size_t>& order, std::size_t at, std::size_t bsz,
                         AdamOptimizer<S>& opt, std::vector<MatX<S>*>& tensors) {
        const Eigen::Index T = streams[order[at]]->rows();
        const Eigen::Index dim = streams[order[at]]->cols();
        Tape<S> tape;
        nn::LstmVars<S> lv = nn::load_lstm(tape, lstm_, true);
        auto wv = tape.input(out_w_, true);
        auto bv = tape.input(out_b_, true);
        std::vector<MatX<S>> std_streams;
        std_streams.reserve(bsz);
        for (std::size_t i = 0; i < bsz; ++i)
            std_streams.push_back(standardize(*streams[order[at + i]]));
        std::vector<typename Tape<S>::Var> seq;
        for (Eigen::Index t = 0; t < T; ++t) {
            MatX<S> xt(static_cast<Eigen::Index>(bsz), dim);
            for (std::size_t i = 0; i < bsz; ++i) xt.row(static_cast<Eigen::Index>(i)) =
                std_streams[i].row(t);
            seq.push_back(tape.constant(std::move(xt)));
        }
        auto h = nn::lstm_final_hidden(tape, seq, lv);
        auto z = tape.add_rowvec(tape.matmul(h, wv), bv);
        MatX<S> y(static_cast<Eigen::Index>(bsz), 1);
        for (std::size_t i = 0; i < bsz; ++i)
            y(static_cast<Eigen::Index>(i), 0) = static_cast<S>(labels[order[at + i]]);
        auto loss = tape.bce_with_logits(z, y);
        tape.backward(loss);
        // lstm tensors occupy tape slots 0..n-1 in load order
        std::vector<const MatX<S>*> grads;
        const std::size_t lstm_count = lstm_.tensors("lstm").size();
        for (std::size_t k = 0; k < lstm_count; ++k)
            grads.push_back(&tape.grad(static_cast<typename Tape<S>::Var>(k)));
        grads.push_back(&tape.grad(wv));
        grads.push_back(&tape.grad(bv));
        opt.update(tensors, grads, cfg_.lr, 5.0);
    }

    ClassifierConfig cfg_;
    nn::LstmParams<S> lstm_;
    MatX<S> out_w_, out_b_;
    Mat64 in_mean_, in_std_;
};

template <class S>
StyleClassifier<S> train_style_classifier(const std::vector<Mat64>& source_streams,
                                          const std::vector<Mat64>& target_streams,
                                          const ClassifierConfig& cfg) {
    return StyleClassifier<S>::train(source_streams, target_streams, cfg);
}

// percentage of outputs classified as target style (> threshold)
inline double transfer_strength_accuracy(const std::vector<double>& outputs,
                                         double threshold = 0.5) {
    if (outputs.empty()) throw DataError("transfer_strength_accuracy: empty output list");
    std::size_t right = 0;
    for (double p : outputs)
        if (p > threshold) ++right;
    return 100.0 * static_cast<double>(right) / static_cast<double>(outputs.size());
}

template <class S>
double transfer_strength_accuracy(const StyleClassifier<S>& classifier,
                                  const std::vector<Mat64>& transferred) {
    if (transferred.empty()) throw DataError("transfer_strength_accuracy: empty input");
    std::vector<double> outputs;
    outputs.reserve(transferred.size());
    for (const auto& s : transferred) outputs.push_back(classifier.predict(s));
    return transfer_strength_accuracy(outputs, classifier.threshold());
}

// ---- content preservation / distances / kinematics ----

struct ContentPreservation {
    double mean_cosine_distance = 0;
    double percentage = 0;
};

inline double cosine_distance_flat(const Mat64& a, const Mat64& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DataError("cosine distance: shape mismatch");
    const double na = std::sqrt(a.squaredNorm()), nb = std::sqrt(b.squaredNorm());
    if (na == 0.0 || nb == 0.0) throw DataError("cosine distance: zero-norm stream");
    return 1.0 - a.cwiseProduct(b).sum() / (na * nb);
}

inline ContentPreservation content_preservation(const std::vector<Mat64>& source,
                                                const std::vector<Mat64>& predicted) {
    if (source.size() != predicted.size() || source.empty())
        throw DataError("content_preservation: size mismatch or empty input");
    double dist_sum = 0, pct_sum = 0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        double d = cosine_distance_flat(source[i], predicted[i]);
        dist_sum += d;
        pct_sum += std::max(0.0, 1.0 - d) * 100.0;
    }
    ContentPreservation out;
    out.mean_cosine_distance = dist_sum / static_cast<double>(source.size());
    out.percentage = pct_sum / static_cast<double>(source.size());
    return out;
}

inline double minkowski_distance(const Mat64& a, const Mat64& b, double p = 2.0) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DataError("minkowski_distance: shape mismatch");
    if (p < 1.0) throw DataError("minkowski_distance: order must be >= 1");
    return std::pow((a - b).array().abs().pow(p).sum(), 1.0 / p);
}

inline double minkowski_distance(const std::vector<Mat64>& a, const std::vector<Mat64>& b,
                                 double p = 2.0) {
    if (a.size() != b.size() || a.empty())
        throw DataError("minkowski_distance: size mismatch or empty input");
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += minkowski_distance(a[i], b[i], p);
    return sum / static_cast<double>(a.size());
}

struct KinematicsProfile {
    double velocity = 0, acceleration = 0, jerk = 0;

    nlohmann::ordered_json to_json() const {
        return {{"velocity", velocity}, {"acceleration", acceleration}, {"jerk", jerk}};
    }
};

// forward finite differences scaled by fps, fps^2, fps^3; mean magnitudes
inline KinematicsProfile kinematics_profile(const Mat64& stream, double fps) {
    if (stream.rows() < 4)
        throw DataError("kinematics_profile: stream must have at least 4 frames");
    auto diff = [](const Mat64& x) {
        return Mat64(x.bottomRows(x.rows() - 1) - x.topRows(x.rows() - 1));
    };
    Mat64 v = diff(stream) * fps;
    Mat64 a = diff(v) * fps;  // carries fps^2 overall
    Mat64 j = diff(a) * fps;  // fps^3
    KinematicsProfile out;
    out.velocity = v.array().abs().mean();
    out.acceleration = a.array().abs().mean();
    out.jerk = j.array().abs().mean();
    return out;
}

inline KinematicsProfile mean_kinematics(const std::vector<Mat64>& streams, double fps) {
    KinematicsProfile acc;
    for (const auto& s : streams) {
        KinematicsProfile p = kinematics_profile(s, fps);
        acc.velocity += p.velocity;
        acc.acceleration += p.acceleration;
        acc.jerk += p.jerk;
    }
    const double n = static_cast<double>(streams.size());
    acc.velocity /= n;
    acc.acceleration /= n;
    acc.jerk /= n;
    return acc;
}

// ---- embedding export ----

struct EmbeddingRow {
    std::string speaker_id, segment_id;
    Vec64 style;    // h_style
    Vec64 content;  // temporally pooled h_content
};

template <class S>
std::vector<EmbeddingRow> export_embeddings(const LoadedModel<S>& model,
                                            const std::vector<Segment>& segments) {
    std::vector<EmbeddingRow> rows;
    rows.reserve(segments.size());
    for (const Segment& seg : segments) {
        NormalizedBundle<S> n = normalize_and_cast<S>(seg.bundle, model.stats);
        MatX<S> style = encode_style(model.params, n.speech, n.text, n.pose, n.face, n.tags);
        MatX<S> content = encode_content(model.params, n.speech, n.text);
        EmbeddingRow row;
        row.speaker_id = seg.speaker_id;
        row.segment_id = seg.segment_id;
        row.style = style.row(0).transpose().template cast<double>();
        row.content = content.colwise().mean().transpose().template cast<double>();
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_embeddings_tsv(const std::filesystem::path& path,
                                 const std::vector<EmbeddingRow>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write embeddings: " + path.string());
    if (rows.empty()) throw DataError("write_embeddings_tsv: no rows");
    os << "speaker_id\tsegment_id";
    for (Eigen::Index i = 0; i < rows.front().style.size(); ++i) os << "\tstyle_" << i;
    for (Eigen::Index i = 0; i < rows.front().content.size(); ++i) os << "\tcontent_" << i;
    os << "\n";
    char buf[64];
    for (const auto& r : rows) {
        os << r.speaker_id << "\t" << r.segment_id;
        for (Eigen::Index i = 0; i < r.style.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", r.style(i));
            os << "\t" << buf;
        }
        for (Eigen::Index i = 0; i < r.content.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", r.content(i));
            os << "\t" << buf;
        }
        os << "\n";
    }
}

// Nearest-centroid speaker probe: centroids from `fit`, accuracy on `eval`.
inline double nearest_centroid_accuracy(const std::vector<EmbeddingRow>& fit,
                                        const std::vector<EmbeddingRow>& eval_rows,
                                        bool use_style) {
    if (fit.empty() || eval_rows.empty())
        throw DataError("nearest_centroid_accuracy: empty input");
    std::map<std::string, std::pair<Vec64, double>> centroids;
    for (const auto& r : fit) {
        const Vec64& v = use_style ? r.style : r.content;
        auto& [sum, n] = centroids[r.speaker_id];
        if (sum.size() == 0) sum = Vec64::Zero(v.size());
        sum += v;
        n += 1;
    }
    std::size_t right = 0;
    for (const auto& r : eval_rows) {
        const Vec64& v = use_style ? r.style : r.content;
        double best = std::numeric_limits<double>::infinity();
        std::string best_speaker;
        for (const auto& [speaker, cn] : centroids) {
            double d = (v - cn.first / cn.second).squaredNorm();
            if (d < best) {
                best = d;
                best_speaker = speaker;
            }
        }
        if (best_speaker == r.speaker_id) ++right;
    }
    return 100.0 * static_cast<double>(right) / static_cast<double>(eval_rows.size());
}

// ---- 2D projections for plotting ----

// exact PCA to 2 components, deterministic sign convention
inline Mat64 project_pca_2d(const Mat64& x) {
    Mat64 centered = x.rowwise() - x.colwise().mean();
    Mat64 cov = (centered.transpose() * centered) / std::max(1.0, double(x.rows() - 1));
    Eigen::SelfAdjointEigenSolver<Mat64> es(cov);
    Mat64 basis(x.cols(), 2);
    basis.col(0) = es.eigenvectors().col(x.cols() - 1);
    basis.col(1) = es.eigenvectors().col(x.cols() - 2);
    for (int c = 0; c < 2; ++c) {
        Eigen::Index imax = 0;
        basis.col(c).cwiseAbs().maxCoeff(&imax);
        if (basis(imax, c) < 0) basis.col(c) = -basis.col(c);
    }
    return centered * basis;
}

// Exact (O(n^2)) t-SNE, PCA-initialized so runs are deterministic.
inline Mat64 project_tsne_2d(const Mat64& x, double perplexity = 30.0, int iterations = 500) {
    const Eigen::Index n = x.rows();
    if (n < 4) throw DataError("project_tsne_2d: need at least 4 rows");
    perplexity = std::min(perplexity, static_cast<double>(n - 1) / 3.0);
    Mat64 d2(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) d2(i, j) = (x.row(i) - x.row(j)).squaredNorm();
    // per-row bandwidths via binary search on perplexity
    Mat64 p = Mat64::Zero(n, n);
    const double target_entropy = std::log(perplexity);
    for (Eigen::Index i = 0; i < n; ++i) {
        double lo = 1e-20, hi = 1e20, beta = 1.0;
        for (int it = 0; it < 64; ++it) {
            double sum = 0, esum = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                double pij = std::exp(-beta * d2(i, j));
                sum += pij;
                esum += beta * d2(i, j) * pij;
            }
            double entropy = std::log(sum) + esum / sum;
            if (std::abs(entropy - target_entropy) < 1e-5) break;
            if (entropy > target_entropy) lo = beta, beta = (hi > 1e19) ? beta * 2 : (beta + hi) / 2;
            else hi = beta, beta = (lo < 1e-19) ? beta / 2 : (beta + lo) / 2;
        }
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) p(i, j) = std::exp(-beta * d2(i, j));
        p.row(i) /= std::max(1e-300, p.row(i).sum());
    }
    p = (p + p.transpose()) / (2.0 * static_cast<double>(n));
    p = p.cwiseMax(1e-12);

    Mat64 y = project_pca_2d(x);
    y /= std::max(1e-12, y.cwiseAbs().maxCoeff());  // small init
    y *= 1e-2;
    Mat64 vel = Mat64::Zero(n, 2);
    const double lr = 100.0;
    for (int it = 0; it < iterations; ++it) {
        const double exaggeration = it < 100 ? 4.0 : 1.0;
        Mat64 num(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                num(i, j) = (i == j) ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        const double qsum = num.sum();
        Mat64 grad = Mat64::Zero(n, 2);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                double q = num(i, j) / qsum;
                double coeff = 4.0 * (exaggeration * p(i, j) - q) * num(i, j);
                grad.row(i) += coeff * (y.row(i) - y.row(j));
            }
        const double momentum = it < 250 ? 0.5 : 0.8;
        vel = momentum * vel - lr * grad;
        y += vel;
        y.rowwise() -= y.colwise().mean();
    }
    return y;
}

// ---- per-pair evaluation report ----

struct MetricReport {
    std::string pair;
    double transfer_strength_accuracy = 0;
    double content_preservation_percent = 0;
    double content_cosine_distance = 0;
    double dist_to_source = 0;
    double dist_to_target = 0;
    KinematicsProfile kin_source_pose, kin_source_face;
    KinematicsProfile kin_target_pose, kin_target_face;
    KinematicsProfile kin_prediction_pose, kin_prediction_face;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json kin;
        kin["source"] = {{"pose", kin_source_pose.to_json()},
                         {"face", kin_source_face.to_json()}};
        kin["target"] = {{"pose", kin_target_pose.to_json()},
                         {"face", kin_target_face.to_json()}};
        kin["prediction"] = {{"pose", kin_prediction_pose.to_json()},
                             {"face", kin_prediction_face.to_json()}};
        return {{"pair", pair},
                {"transfer_strength_accuracy", transfer_strength_accuracy},
                {"content_preservation_percent", content_preservation_percent},
                {"content_cosine_distance", content_cosine_distance},
                {"dist_to_source", dist_to_source},
                {"dist_to_target", dist_to_target},
                {"kinematics", kin}};
    }
};

struct EvalConfig {
    ClassifierConfig classifier;
    int style_pool_segments = 16;  // target segments pooled into one style vector
    double minkowski_p = 2.0;
    double fps = 15.0;
};

struct PairEvaluation {
    MetricReport report;
    std::vector<FeatureBundle> transferred;      // one per source test segment
    std::vector<std::string> source_segment_ids;
};

// Full objective evaluation for one source -> target pair: transfers every
// source test segment into the target's style, trains the pair classifier
// on real train segments, and fills a MetricReport.
template <class S>
PairEvaluation evaluate_pair(const LoadedModel<S>& model, const CorpusAccessor& corpus,
                             const std::string& source_speaker,
                             const std::string& target_speaker, const EvalConfig& cfg) {
    const CorpusManifest& m = corpus.manifest();
    if (!m.splits.count(source_speaker))
        throw DataError("evaluate_pair: unknown source speaker " + source_speaker);
    if (!m.splits.count(target_speaker))
        throw DataError("evaluate_pair: unknown target speaker " + target_speaker);

    // target style vector pooled over the target's train segments
    const auto& tgt_train_ids = m.splits.at(target_speaker).train;
    std::vector<FeatureBundle> style_pool;
    for (std::size_t i = 0;
         i < std::min<std::size_t>(tgt_train_ids.size(),
                                   static_cast<std::size_t>(cfg.style_pool_segments));
         ++i)
        style_pool.push_back(corpus.load(target_speaker, tgt_train_ids[i]));
    MatX<S> style = mean_style_vector(model.params, model.stats, style_pool);

    PairEvaluation out;
    out.report.pair = source_speaker + ":" + target_speaker;

    std::vector<Mat64> src_streams, pred_streams, tgt_streams;
    for (const auto& id : m.splits.at(source_speaker).test) {
        FeatureBundle src = corpus.load(source_speaker, id);
        FeatureBundle pred = transfer_bundle(model.params, model.stats, src, style);
        src_streams.push_back(gesture_stream(src));
        pred_streams.push_back(gesture_stream(pred));
        out.transferred.push_back(std::move(pred));
        out.source_segment_ids.push_back(id);
    }
    if (src_streams.empty()) throw DataError("evaluate_pair: source speaker has no test split");
    for (const auto& id : m.splits.at(target_speaker).test)
        tgt_streams.push_back(gesture_stream(corpus.load(target_speaker, id)));
    if (tgt_streams.empty()) throw DataError("evaluate_pair: target speaker has no test split");

    // pair classifier on real train segments of both speakers
    std::vector<Mat64> src_train, tgt_train;
    for (const auto& id : m.splits.at(source_speaker).train)
        src_train.push_back(gesture_stream(corpus.load(source_speaker, id)));
    for (const auto& id : tgt_train_ids)
        tgt_train.push_back(gesture_stream(corpus.load(target_speaker, id)));
    StyleClassifier<S> classifier = StyleClassifier<S>::train(src_train, tgt_train, cfg.classifier);
    out.report.transfer_strength_accuracy = transfer_strength_accuracy(classifier, pred_streams);

    ContentPreservation cp = content_preservation(src_streams, pred_streams);
    out.report.content_preservation_percent = cp.percentage;
    out.report.content_cosine_distance = cp.mean_cosine_distance;

    out.report.dist_to_source = minkowski_distance(pred_streams, src_streams, cfg.minkowski_p);
    const std::size_t matched = std::min(pred_streams.size(), tgt_streams.size());
    std::vector<Mat64> pred_matched(pred_streams.begin(),
                                    pred_streams.begin() + static_cast<std::ptrdiff_t>(matched));
    std::vector<Mat64> tgt_matched(tgt_streams.begin(),
                                   tgt_streams.begin() + static_cast<std::ptrdiff_t>(matched));
    out.report.dist_to_target = minkowski_distance(pred_matched, tgt_matched, cfg.minkowski_p);

    auto pose_of = [](const std::vector<Mat64>& streams, Eigen::Index pose_dim) {
        std::vector<Mat64> out_;
        for (const auto& s : streams) out_.push_back(s.leftCols(pose_dim));
        return out_;
    };
    auto face_of = [](const std::vector<Mat64>& streams, Eigen::Index pose_dim) {
        std::vector<Mat64> out_;
        for (const auto& s : streams) out_.push_back(s.rightCols(s.cols() - pose_dim));
        return out_;
    };
    const Eigen::Index pd = m.pose_dim;
    out.report.kin_source_pose = mean_kinematics(pose_of(src_streams, pd), cfg.fps);
    out.report.kin_source_face = mean_kinematics(face_of(src_streams, pd), cfg.fps);
    out.report.kin_target_pose = mean_kinematics(pose_of(tgt_streams, pd), cfg.fps);
    out.report.kin_target_face = mean_kinematics(face_of(tgt_streams, pd), cfg.fps);
    out.report.kin_prediction_pose = mean_kinematics(pose_of(pred_streams, pd), cfg.fps);
    out.report.kin_prediction_face = mean_kinematics(face_of(pred_streams, pd), cfg.fps);
    return out;
}

}  // namespace motionstyle
