// Discriminator, fader losses, the combined objective and the lambda ramp.
#include "motionstyle/disentangle.hpp"

#include "helpers.hpp"

#include <catch2/catch.hpp>

using namespace motionstyle;
using testutil::finite_diff_check;
using testutil::random_matrix;

TEST_CASE("discriminator prediction: width, zero weights, determinism", "[disentangle]") {
    ModelConfig cfg;  // reference dims
    ModelParams<double> p = ModelParams<double>::init(cfg, 31);
    Rng rng(32);
    Mat64 content = random_matrix(cfg.frames, cfg.d_att(), rng, 0.4);
    Mat64 pred = discriminator_predict(p, content);
    CHECK(pred.rows() == 1);
    CHECK(pred.cols() == 998);
    CHECK(pred == discriminator_predict(p, content));

    ModelParams<double> zero = p;
    zero.disc_w1.setZero();
    zero.disc_w2.setZero();
    zero.disc_w3.setZero();
    zero.disc_b1.setZero();
    zero.disc_b2.setZero();
    Mat64 bias_only = discriminator_predict(zero, content);
    CHECK((bias_only - zero.disc_b3).cwiseAbs().maxCoeff() == 0.0);

    Mat64 bad = random_matrix(cfg.frames, cfg.d_att() + 1, rng);
    CHECK_THROWS_AS(discriminator_predict(p, bad), DataError);
}

TEST_CASE("discriminator loss identities and oracle", "[disentangle]") {
    Rng rng(33);
    Mat64 style = random_matrix(1, 998, rng);
    CHECK(discriminator_loss(style, style) == 0.0);

    Mat64 off = style;
    off.array() += 1.0;
    CHECK(discriminator_loss(style, off) == Approx(std::sqrt(998.0)).epsilon(1e-12));
    CHECK(std::sqrt(998.0) == Approx(31.5911).margin(5e-5));

    // random batch vs brute-force oracle
    Mat64 a = random_matrix(6, 17, rng), b = random_matrix(6, 17, rng);
    double expected = 0;
    for (int r = 0; r < 6; ++r) {
        double s = 0;
        for (int c = 0; c < 17; ++c) s += std::pow(a(r, c) - b(r, c), 2.0);
        expected += std::sqrt(s);
    }
    expected /= 6.0;
    CHECK(std::abs(discriminator_loss(a, b) - expected) < 1e-9);

    Mat64 bad = random_matrix(1, 997, rng);
    CHECK_THROWS_AS(discriminator_loss(style, bad), DataError);
}

TEST_CASE("adversarial loss: endpoints and analytic midpoint", "[disentangle]") {
    Rng rng(34);
    Mat64 style = random_matrix(1, 40, rng);
    CHECK(adversarial_loss(style, style) == Approx(1.0));  // perfect discriminator

    Mat64 far = style;
    far.array() += 1e9;
    CHECK(adversarial_loss(style, far) < 1e-6);  // error -> infinity: loss -> 0

    Mat64 one_off = style;
    one_off.array() += 1.0;  // uniform r = 1 -> e = 0.5 -> loss 0.5
    CHECK(adversarial_loss(style, one_off) == Approx(0.5));
}

TEST_CASE("adversarial loss strictly decreases as errors grow", "[disentangle]") {
    Rng rng(35);
    for (int trial = 0; trial < 25; ++trial) {
        Mat64 style = random_matrix(1, 12, rng);
        Mat64 delta = random_matrix(1, 12, rng, 0.8);
        for (int c = 0; c < 12; ++c)
            delta(0, c) = std::abs(delta(0, c)) + 0.05;  // strictly positive growth
        Mat64 pred1 = style - delta;
        Mat64 pred2 = style - Mat64(1.5 * delta);
        CHECK(adversarial_loss(style, pred2) < adversarial_loss(style, pred1));
    }
}

TEST_CASE("fader consistency: argmin of adversarial = argmax of discriminator loss",
          "[disentangle]") {
    Rng rng(36);
    for (int trial = 0; trial < 20; ++trial) {
        Mat64 style = random_matrix(1, 9, rng);
        Mat64 direction = random_matrix(1, 9, rng);
        // candidates at increasing distances along one direction
        std::vector<double> magnitudes;
        for (int k = 0; k < 6; ++k) magnitudes.push_back(rng.uniform(0.01, 5.0));
        std::size_t argmin_adv = 0, argmax_dis = 0;
        double best_adv = 1e300, best_dis = -1;
        for (std::size_t k = 0; k < magnitudes.size(); ++k) {
            Mat64 pred = style - Mat64(magnitudes[k] * direction);
            double adv = adversarial_loss(style, pred);
            double dis = discriminator_loss(style, pred);
            if (adv < best_adv) best_adv = adv, argmin_adv = k;
            if (dis > best_dis) best_dis = dis, argmax_dis = k;
        }
        CHECK(argmin_adv == argmax_dis);
    }
}

TEST_CASE("discriminator loss is zero only at exact equality", "[disentangle]") {
    Rng rng(38);
    for (int i = 0; i < 30; ++i) {
        Mat64 style = random_matrix(2, 7, rng);
        Mat64 pred = style;
        pred(1, static_cast<Eigen::Index>(rng.below(7))) += rng.uniform(1e-9, 2.0);
        CHECK(discriminator_loss(style, pred) > 0.0);
        CHECK(discriminator_loss(style, style) == 0.0);
    }
}

TEST_CASE("total generator loss", "[disentangle]") {
    CHECK(total_generator_loss(2.0, 0.5, 0.0) == 2.0);
    CHECK(total_generator_loss(2.0, 0.5, 1.0) == 2.5);
    CHECK(total_generator_loss(0.0, 0.0, 0.7) == 0.0);
}

TEST_CASE("lambda ramp", "[disentangle]") {
    CHECK(lambda_at_step(0) == 0.0);
    CHECK(lambda_at_step(50) == Approx(0.5).epsilon(1e-15));
    CHECK(lambda_at_step(200) == 1.0);
    CHECK(lambda_at_step(100000) == 1.0);  // capped
    // non-decreasing
    double prev = -1;
    for (std::uint64_t t = 0; t < 300; t += 7) {
        double l = lambda_at_step(t);
        CHECK(l >= prev);
        prev = l;
    }
}

TEST_CASE("loss gradients match finite differences", "[disentangle]") {
    Rng rng(37);
    Mat64 style = random_matrix(3, 11, rng);
    Mat64 pred = style + random_matrix(3, 11, rng, 0.9);

    SECTION("discriminator loss wrt prediction") {
        auto eval = [&]() {
            Tape<double> t;
            auto loss = t.row_l2_mean(t.constant(style), t.input(pred, false));
            return t.val(loss)(0, 0);
        };
        Tape<double> t;
        auto pv = t.input(pred, true);
        auto loss = t.row_l2_mean(t.constant(style), pv);
        t.backward(loss);
        Mat64 g = t.grad(pv);
        auto rep = finite_diff_check(pred, g, eval, 12, 600);
        CHECK(rep.max_rel_err <= 1e-4);
    }

    SECTION("adversarial loss wrt prediction and style") {
        auto eval = [&]() {
            Tape<double> t;
            auto loss = t.fader_penalty(t.input(style, false), t.input(pred, false));
            return t.val(loss)(0, 0);
        };
        Tape<double> t;
        auto sv = t.input(style, true);
        auto pv = t.input(pred, true);
        auto loss = t.fader_penalty(sv, pv);
        t.backward(loss);
        Mat64 gs = t.grad(sv), gp = t.grad(pv);
        auto rep_p = finite_diff_check(pred, gp, eval, 12, 601);
        CHECK(rep_p.max_rel_err <= 1e-4);
        auto rep_s = finite_diff_check(style, gs, eval, 12, 602);
        CHECK(rep_s.max_rel_err <= 1e-4);
    }

    SECTION("tape and plain loss values agree") {
        Tape<double> t;
        auto ldis = t.row_l2_mean(t.constant(style), t.constant(pred));
        auto ladv = t.fader_penalty(t.constant(style), t.constant(pred));
        CHECK(t.val(ldis)(0, 0) == Approx(discriminator_loss(style, pred)).epsilon(1e-14));
        CHECK(t.val(ladv)(0, 0) == Approx(adversarial_loss(style, pred)).epsilon(1e-14));
    }
}
