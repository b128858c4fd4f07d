// Evaluation metrics: classifier, accuracy counting, cosine preservation,
// Minkowski distances, kinematics, embeddings.
#include "motionstyle/metrics.hpp"
#include "motionstyle/presets.hpp"

#include "helpers.hpp"

#include <catch2/catch.hpp>

using namespace motionstyle;
using testutil::TempDir;
using testutil::random_matrix;

TEST_CASE("transfer strength accuracy equals brute-force counting", "[metrics]") {
    SECTION("pinned examples") {
        CHECK(transfer_strength_accuracy(std::vector<double>(10, 0.9)) == 100.0);
        CHECK(transfer_strength_accuracy({0.4, 0.6, 0.7, 0.2}) == 50.0);
    }
    SECTION("100 random output/threshold sets") {
        Rng rng(50);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t n = 1 + rng.below(40);
            double threshold = rng.uniform(0.05, 0.95);
            std::vector<double> outputs;
            for (std::size_t i = 0; i < n; ++i) outputs.push_back(rng.uniform());
            std::size_t count = 0;
            for (double p : outputs)
                if (p > threshold) ++count;
            double expected = 100.0 * static_cast<double>(count) / static_cast<double>(n);
            CHECK(transfer_strength_accuracy(outputs, threshold) == expected);
        }
    }
    CHECK_THROWS_AS(transfer_strength_accuracy(std::vector<double>{}), DataError);
}

TEST_CASE("content preservation endpoints and oracle", "[metrics]") {
    Rng rng(51);
    Mat64 x = random_matrix(8, 5, rng);
    auto cp_same = content_preservation({x}, {x});
    CHECK(cp_same.mean_cosine_distance == Approx(0.0).margin(1e-12));
    CHECK(cp_same.percentage == Approx(100.0).margin(1e-9));

    Mat64 a = Mat64::Zero(1, 4), b = Mat64::Zero(1, 4);
    a(0, 0) = 1.0;
    b(0, 1) = 1.0;  // orthogonal
    auto cp_orth = content_preservation({a}, {b});
    CHECK(cp_orth.mean_cosine_distance == Approx(1.0));
    CHECK(cp_orth.percentage == Approx(0.0));

    SECTION("random batches match the direct formula") {
        std::vector<Mat64> src, pred;
        for (int i = 0; i < 7; ++i) {
            src.push_back(random_matrix(6, 4, rng));
            pred.push_back(random_matrix(6, 4, rng));
        }
        double dist = 0, pct = 0;
        for (int i = 0; i < 7; ++i) {
            double dot = 0, na = 0, nb = 0;
            for (Eigen::Index r = 0; r < 6; ++r)
                for (Eigen::Index c = 0; c < 4; ++c) {
                    dot += src[static_cast<std::size_t>(i)](r, c) *
                           pred[static_cast<std::size_t>(i)](r, c);
                    na += src[static_cast<std::size_t>(i)](r, c) *
                          src[static_cast<std::size_t>(i)](r, c);
                    nb += pred[static_cast<std::size_t>(i)](r, c) *
                          pred[static_cast<std::size_t>(i)](r, c);
                }
            double d = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
            dist += d;
            pct += std::max(0.0, 1.0 - d) * 100.0;
        }
        auto cp = content_preservation(src, pred);
        CHECK(std::abs(cp.mean_cosine_distance - dist / 7.0) < 1e-9);
        CHECK(std::abs(cp.percentage - pct / 7.0) < 1e-9);
    }

    SECTION("zero-norm input is an error") {
        CHECK_THROWS_AS(content_preservation({Mat64::Zero(2, 2)}, {Mat64::Ones(2, 2)}),
                        DataError);
    }

    SECTION("cosine distance stays in [0, 2]") {
        for (int i = 0; i < 50; ++i) {
            Mat64 u = random_matrix(3, 3, rng), v = random_matrix(3, 3, rng);
            double d = cosine_distance_flat(u, v);
            CHECK(d >= 0.0);
            CHECK(d <= 2.0);
        }
    }
}

TEST_CASE("minkowski distance: pinned values, oracle, triangle inequality", "[metrics]") {
    Mat64 a = Mat64::Zero(1, 2), b(1, 2);
    b << 3, 4;
    CHECK(minkowski_distance(a, a) == 0.0);
    CHECK(minkowski_distance(a, b, 2.0) == Approx(5.0));
    CHECK(minkowski_distance(a, b, 1.0) == Approx(7.0));
    CHECK_THROWS_AS(minkowski_distance(a, Mat64::Zero(1, 3)), DataError);
    CHECK_THROWS_AS(minkowski_distance(a, b, 0.5), DataError);

    Rng rng(52);
    SECTION("matches the direct formula") {
        for (int i = 0; i < 20; ++i) {
            Mat64 u = random_matrix(4, 3, rng), v = random_matrix(4, 3, rng);
            double p = rng.uniform(1.0, 4.0);
            double expected = 0;
            for (Eigen::Index r = 0; r < 4; ++r)
                for (Eigen::Index c = 0; c < 3; ++c)
                    expected += std::pow(std::abs(u(r, c) - v(r, c)), p);
            expected = std::pow(expected, 1.0 / p);
            CHECK(std::abs(minkowski_distance(u, v, p) - expected) < 1e-9);
        }
    }
    SECTION("triangle inequality at p = 2") {
        for (int i = 0; i < 50; ++i) {
            Mat64 x = random_matrix(3, 4, rng), y = random_matrix(3, 4, rng),
                  z = random_matrix(3, 4, rng);
            CHECK(minkowski_distance(x, z, 2.0) <=
                  minkowski_distance(x, y, 2.0) + minkowski_distance(y, z, 2.0) + 1e-12);
        }
    }
}

TEST_CASE("kinematics: exact on polynomials, fps scaling", "[metrics]") {
    const Eigen::Index T = 16;
    SECTION("constant positions") {
        KinematicsProfile k = kinematics_profile(Mat64::Constant(T, 3, 2.5), 15.0);
        CHECK(k.velocity == 0.0);
        CHECK(k.acceleration == 0.0);
        CHECK(k.jerk == 0.0);
    }
    SECTION("linear motion x = 2t at unit fps") {
        Mat64 x(T, 1);
        for (Eigen::Index t = 0; t < T; ++t) x(t, 0) = 2.0 * static_cast<double>(t);
        KinematicsProfile k = kinematics_profile(x, 1.0);
        CHECK(k.velocity == Approx(2.0));
        CHECK(k.acceleration == Approx(0.0).margin(1e-12));
        CHECK(k.jerk == Approx(0.0).margin(1e-12));
        // fps scales the derivative
        CHECK(kinematics_profile(x, 15.0).velocity == Approx(30.0));
    }
    SECTION("cubic motion x = t^3: exact third difference of 6") {
        Mat64 x(T, 1);
        for (Eigen::Index t = 0; t < T; ++t)
            x(t, 0) = std::pow(static_cast<double>(t), 3.0);
        KinematicsProfile k = kinematics_profile(x, 1.0);
        CHECK(k.jerk == Approx(6.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(kinematics_profile(Mat64::Zero(3, 2), 1.0), DataError);
}

namespace {

std::vector<Mat64> streams_of(const CorpusAccessor& accessor, const std::string& speaker,
                              const std::vector<std::string>& ids) {
    std::vector<Mat64> out;
    for (const auto& id : ids) out.push_back(gesture_stream(accessor.load(speaker, id)));
    return out;
}

}  // namespace

TEST_CASE("classifier separates a 4x amplitude gap and sits at chance on identical data",
          "[metrics][slow]") {
    TempDir dir("metrics_cls");
    SynthConfig sc;
    sc.n_speakers = 2;
    sc.segments_per_speaker = 80;
    sc.seed = 9;
    sc.mel_bins = 16;
    sc.text_dim = 12;
    sc.tag_count = 8;
    StyleFactors lo = StyleFactors::identity(sc.tag_count);
    lo.amplitude_scale = 0.6;
    StyleFactors hi = lo;
    hi.amplitude_scale = 2.4;  // ratio 4
    sc.factors_override = {lo, hi};
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());

    ClassifierConfig ccfg;
    ccfg.hidden = 16;
    ccfg.epochs = 16;
    ccfg.batch_size = 64;
    ccfg.seed = 21;

    SECTION("separable speakers reach 95% held out") {
        auto cls = train_style_classifier<double>(
            streams_of(accessor, "sp00", manifest.splits.at("sp00").train),
            streams_of(accessor, "sp01", manifest.splits.at("sp01").train), ccfg);
        int right = 0, total = 0;
        for (const auto& id : manifest.splits.at("sp00").test)
            right += cls.predict(gesture_stream(accessor.load("sp00", id))) <= 0.5, ++total;
        for (const auto& id : manifest.splits.at("sp01").test)
            right += cls.predict(gesture_stream(accessor.load("sp01", id))) > 0.5, ++total;
        double acc = 100.0 * right / total;
        INFO("held-out accuracy " << acc);
        CHECK(acc >= 95.0);
    }

    SECTION("identical class distributions score near chance") {
        // both classes drawn from the same speaker
        auto all = manifest.splits.at("sp00").train;
        std::vector<std::string> first(all.begin(), all.begin() + 32);
        std::vector<std::string> second(all.begin() + 32, all.end());
        auto cls = train_style_classifier<double>(streams_of(accessor, "sp00", first),
                                                  streams_of(accessor, "sp00", second), ccfg);
        std::vector<double> outputs;
        for (const auto& id : manifest.splits.at("sp00").test)
            outputs.push_back(cls.predict(gesture_stream(accessor.load("sp00", id))));
        for (const auto& id : manifest.splits.at("sp00").val)
            outputs.push_back(cls.predict(gesture_stream(accessor.load("sp00", id))));
        double acc = transfer_strength_accuracy(outputs);
        INFO("chance-level accuracy " << acc);
        CHECK(acc >= 45.0);
        CHECK(acc <= 55.0);
    }

    SECTION("single-class input is rejected") {
        CHECK_THROWS_AS(train_style_classifier<double>(
                            {}, streams_of(accessor, "sp01", manifest.splits.at("sp01").train),
                            ccfg),
                        DataError);
    }
}

TEST_CASE("embedding export: shape, determinism, projections", "[metrics]") {
    TempDir dir("metrics_emb");
    SynthConfig sc;
    sc.n_speakers = 5;
    sc.segments_per_speaker = 20;
    sc.seed = 13;
    sc.mel_bins = 16;
    sc.text_dim = 12;
    sc.tag_count = 8;
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());

    ModelConfig mc;
    mc.d_model = 8;
    mc.text_dim = sc.text_dim;
    mc.mel_bins = sc.mel_bins;
    mc.tag_count = sc.tag_count;
    LoadedModel<double> model;
    model.cfg = mc;
    model.params = ModelParams<double>::init(mc, 77);
    std::vector<FeatureBundle> all;
    std::vector<Segment> segments;
    for (const auto& sp : manifest.speakers)
        for (const auto* ids : {&manifest.splits.at(sp).train, &manifest.splits.at(sp).val,
                                &manifest.splits.at(sp).test})
            for (const auto& id : *ids) {
                segments.push_back(accessor.load_segment(sp, id));
                all.push_back(segments.back().bundle);
            }
    REQUIRE(segments.size() == 100);
    model.stats = compute_normalization_stats(all);

    auto rows = export_embeddings(model, segments);
    CHECK(rows.size() == 100);
    CHECK(rows.front().style.size() == mc.style_dim());
    CHECK(rows.front().content.size() == mc.d_att());

    auto rows2 = export_embeddings(model, segments);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].style == rows2[i].style);
        CHECK(rows[i].content == rows2[i].content);
    }

    // writable and projectable
    write_embeddings_tsv(dir.path() / "emb.tsv", rows);
    CHECK(std::filesystem::file_size(dir.path() / "emb.tsv") > 0);
    Mat64 style_mat(static_cast<Eigen::Index>(rows.size()), rows.front().style.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        style_mat.row(static_cast<Eigen::Index>(i)) = rows[i].style.transpose();
    Mat64 p2 = project_pca_2d(style_mat);
    CHECK(p2.rows() == 100);
    CHECK(p2.cols() == 2);
    CHECK(p2.allFinite());
    Mat64 t2 = project_tsne_2d(style_mat, 10.0, 60);
    CHECK(t2.rows() == 100);
    CHECK(t2.allFinite());
}
