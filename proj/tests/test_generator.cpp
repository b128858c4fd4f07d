// Fusion, decoding and the reconstruction loss.
#include "motionstyle/generator.hpp"

#include "helpers.hpp"

#include <catch2/catch.hpp>

using namespace motionstyle;
using testutil::finite_diff_check;
using testutil::random_matrix;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.d_model = 8;
    c.text_dim = 16;
    c.mel_bins = 16;
    c.frames = 16;
    c.tag_count = 6;
    c.disc_hidden = 12;
    return c;
}

}  // namespace

TEST_CASE("fuse: shape, zero params, style sensitivity", "[generator]") {
    ModelConfig cfg;  // d_model 64
    ModelParams<double> p = ModelParams<double>::init(cfg, 17);
    Rng rng(18);
    Mat64 content = random_matrix(cfg.frames, cfg.d_att(), rng, 0.3);
    Mat64 style_a = random_matrix(1, cfg.style_dim(), rng, 0.3);
    Mat64 style_b = random_matrix(1, cfg.style_dim(), rng, 0.3);

    Mat64 fused = fuse(p, content, style_a);
    CHECK(fused.rows() == 64);
    CHECK(fused.cols() == 64);

    ModelParams<double> zero = p;
    zero.fuse_w.setZero();
    zero.fuse_b.setZero();
    CHECK(fuse(zero, content, style_a).cwiseAbs().maxCoeff() == 0.0);

    // generic params separate different styles under the same content
    Mat64 fused_b = fuse(p, content, style_b);
    CHECK((fused - fused_b).cwiseAbs().maxCoeff() > 1e-8);

    Mat64 bad = random_matrix(1, cfg.style_dim() - 1, rng);
    CHECK_THROWS_WITH(fuse(p, content, bad), Catch::Contains("style_dim"));
}

TEST_CASE("decode: head shapes and determinism", "[generator]") {
    ModelConfig cfg;
    ModelParams<double> p = ModelParams<double>::init(cfg, 19);
    Rng rng(20);
    Mat64 fused = random_matrix(cfg.frames, cfg.d_model, rng, 0.4);
    Mat64 pose = decode(p, fused, GestureHead::pose);
    Mat64 face = decode(p, fused, GestureHead::face);
    CHECK(pose.rows() == 64);
    CHECK(pose.cols() == 22);
    CHECK(face.rows() == 64);
    CHECK(face.cols() == 30);
    CHECK(pose == decode(p, fused, GestureHead::pose));

    Mat64 wide = random_matrix(cfg.frames, cfg.d_model + 1, rng);
    CHECK_THROWS_WITH(decode(p, wide, GestureHead::pose), Catch::Contains("d_model"));
}

TEST_CASE("decode gradient w.r.t. the fused input matches finite differences", "[generator]") {
    ModelConfig cfg = small_config();
    ModelParams<double> p = ModelParams<double>::init(cfg, 23);
    Rng rng(24);
    Mat64 fused = random_matrix(cfg.frames, cfg.d_model, rng, 0.4);
    auto eval = [&]() {
        Tape<double> t;
        ModelVars<double> v = load_model_vars(t, p, TrainableGroups::none());
        auto out = ops::decode(t, v, t.input(fused, false), GestureHead::pose);
        return t.val(t.mean_all(out))(0, 0);
    };
    Tape<double> t;
    ModelVars<double> v = load_model_vars(t, p, TrainableGroups::none());
    auto in = t.input(fused, true);
    auto out = ops::decode(t, v, in, GestureHead::pose);
    auto loss = t.mean_all(out);
    t.backward(loss);
    Mat64 g = t.grad(in);
    auto rep = finite_diff_check(fused, g, eval, 10, 500);
    CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("reconstruction loss identities and analytic value", "[generator]") {
    Rng rng(25);
    GestureOutput<double> x{random_matrix(64, 22, rng), random_matrix(64, 30, rng)};
    CHECK(reconstruction_loss(x, x) == 0.0);

    GestureOutput<double> pred = x;
    pred.pose.array() += 1.0;  // pose residual all ones, face exact
    CHECK(reconstruction_loss(pred, x) == Approx(std::sqrt(1408.0)).epsilon(1e-12));
    CHECK(std::sqrt(1408.0) == Approx(37.5233).margin(5e-5));

    GestureOutput<double> bad{random_matrix(63, 22, rng), random_matrix(64, 30, rng)};
    CHECK_THROWS_AS(reconstruction_loss(bad, x), DataError);
}

TEST_CASE("reconstruction loss is nonnegative on random inputs", "[generator]") {
    Rng rng(29);
    for (int i = 0; i < 30; ++i) {
        GestureOutput<double> a{random_matrix(8, 4, rng, 3.0), random_matrix(8, 6, rng, 3.0)};
        GestureOutput<double> b{random_matrix(8, 4, rng, 3.0), random_matrix(8, 6, rng, 3.0)};
        CHECK(reconstruction_loss(a, b) >= 0.0);
    }
}

TEST_CASE("reconstruction loss matches an elementwise oracle on random batches",
          "[generator]") {
    Rng rng(26);
    std::vector<GestureOutput<double>> pred, target;
    for (int i = 0; i < 5; ++i) {
        pred.push_back({random_matrix(12, 4, rng), random_matrix(12, 6, rng)});
        target.push_back({random_matrix(12, 4, rng), random_matrix(12, 6, rng)});
    }
    // independent oracle: explicit elementwise sums
    double expected = 0;
    for (int i = 0; i < 5; ++i) {
        double sp = 0, sf = 0;
        for (Eigen::Index r = 0; r < 12; ++r) {
            for (Eigen::Index c = 0; c < 4; ++c)
                sp += std::pow(pred[i].pose(r, c) - target[i].pose(r, c), 2.0);
            for (Eigen::Index c = 0; c < 6; ++c)
                sf += std::pow(pred[i].face(r, c) - target[i].face(r, c), 2.0);
        }
        expected += std::sqrt(sp) + std::sqrt(sf);
    }
    expected /= 5.0;
    CHECK(std::abs(reconstruction_loss(pred, target) - expected) < 1e-9);
}

TEST_CASE("generation stays finite on extreme finite inputs", "[generator]") {
    ModelConfig cfg = small_config();
    ModelParams<double> p = ModelParams<double>::init(cfg, 27);
    Rng rng(28);
    for (double scale : {1.0, 1e3, 1e6}) {
        Mat64 speech = random_matrix(cfg.frames, cfg.mel_bins, rng, scale);
        Mat64 text = random_matrix(cfg.frames, cfg.text_dim, rng, scale);
        Mat64 style = random_matrix(1, cfg.style_dim(), rng, scale);
        GestureOutput<double> out = generate_gestures(p, speech, text, style);
        CHECK(out.pose.allFinite());
        CHECK(out.face.allFinite());
    }
}
