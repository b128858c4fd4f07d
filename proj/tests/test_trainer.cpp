// CLR schedule, Adam, alternation, determinism, checkpoint resume and the
// short-training contract.
#include "motionstyle/presets.hpp"
#include "motionstyle/trainer.hpp"

#include "helpers.hpp"

#include <catch2/catch.hpp>

using namespace motionstyle;
using testutil::TempDir;

namespace {

SynthConfig tiny_synth(int speakers = 3, int segments = 10) {
    SynthConfig cfg;
    cfg.n_speakers = speakers;
    cfg.segments_per_speaker = segments;
    cfg.seed = 5;
    cfg.mel_bins = 16;
    cfg.text_dim = 12;
    cfg.tag_count = 8;
    cfg.frames_per_segment = 32;
    return cfg;
}

ModelConfig tiny_model(const SynthConfig& s) {
    ModelConfig c;
    c.d_model = 8;
    c.text_dim = s.text_dim;
    c.mel_bins = s.mel_bins;
    c.tag_count = s.tag_count;
    c.frames = s.frames_per_segment;
    c.disc_hidden = 16;
    return c;
}

TrainConfig tiny_train(std::uint64_t steps, std::uint64_t seed = 7) {
    TrainConfig c;
    c.batch_size = 6;
    c.total_iterations = steps;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("clr triangular schedule hits the pinned values", "[trainer]") {
    TrainConfig cfg;  // base 1e-7, max 0.1, step 196
    CHECK(clr_learning_rate(0, cfg) == Approx(1e-7).epsilon(1e-15));
    CHECK(clr_learning_rate(98, cfg) == Approx(0.05000005).epsilon(1e-12));
    CHECK(clr_learning_rate(196, cfg) == Approx(0.1).epsilon(1e-15));
    CHECK(clr_learning_rate(392, cfg) == Approx(1e-7).epsilon(1e-15));
    // periodicity and bounds
    for (std::uint64_t s = 0; s < 1200; ++s) {
        double lr = clr_learning_rate(s, cfg);
        CHECK(lr >= cfg.clr_base);
        CHECK(lr <= cfg.clr_max);
    }
    CHECK(clr_learning_rate(784, cfg) == Approx(1e-7).epsilon(1e-15));
    CHECK(clr_learning_rate(588, cfg) == Approx(0.1).epsilon(1e-15));
}

TEST_CASE("adam update matches a hand-rolled single-step oracle", "[trainer]") {
    const double beta1 = 0.95, beta2 = 0.999, eps = 1e-8, lr = 0.01;
    MatX<double> p1(1, 1), p2(1, 1), p3(1, 1);
    p1 << 0.5;
    p2 << -1.25;
    p3 << 2.0;
    MatX<double> g1(1, 1), g2(1, 1), g3(1, 1);
    g1 << 0.3;
    g2 << -0.04;
    g3 << 1.7;

    AdamOptimizer<double> opt(beta1, beta2, eps);
    std::vector<MatX<double>*> params = {&p1, &p2, &p3};
    opt.attach(params);
    std::vector<const MatX<double>*> grads = {&g1, &g2, &g3};
    opt.update(params, grads, lr, 0.0);

    auto oracle = [&](double theta, double g) {
        double m = (1 - beta1) * g;
        double v = (1 - beta2) * g * g;
        double mhat = m / (1 - beta1);
        double vhat = v / (1 - beta2);
        return theta - lr * mhat / (std::sqrt(vhat) + eps);
    };
    CHECK(std::abs(p1(0, 0) - oracle(0.5, 0.3)) <= 1e-12);
    CHECK(std::abs(p2(0, 0) - oracle(-1.25, -0.04)) <= 1e-12);
    CHECK(std::abs(p3(0, 0) - oracle(2.0, 1.7)) <= 1e-12);
}

TEST_CASE("gradient clipping bounds the global norm", "[trainer]") {
    MatX<double> p(2, 1);
    p << 0.0, 0.0;
    MatX<double> g(2, 1);
    g << 30.0, 40.0;  // norm 50
    AdamOptimizer<double> opt(0.9, 0.999, 1e-8);
    std::vector<MatX<double>*> params = {&p};
    opt.attach(params);
    opt.update(params, {&g}, 1.0, 5.0);
    // scaled gradient is (3, 4); adam normalizes per-coordinate, so just
    // confirm the direction ratio survived the clip
    CHECK(p(0, 0) < 0.0);
    CHECK(p(1, 0) < 0.0);
}

TEST_CASE("training steps alternate without cross-contamination", "[trainer]") {
    TempDir dir("trainer_alt");
    SynthConfig sc = tiny_synth();
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());
    Trainer<double> trainer(accessor, tiny_model(sc), tiny_train(4));
    trainer.enable_step_trace(true);
    for (int i = 0; i < 3; ++i) {
        trainer.step();
        const StepTrace& tr = trainer.last_trace();
        // discriminator update leaves generator-side parameters untouched
        CHECK(tr.gen_before == tr.gen_after_disc_update);
        // generator update leaves the discriminator untouched
        CHECK(tr.disc_after_disc_update == tr.disc_after_gen_update);
        // and both updates actually moved their own group
        CHECK(tr.disc_before != tr.disc_after_disc_update);
        CHECK(tr.gen_after_disc_update != tr.gen_after_gen_update);
    }
}

TEST_CASE("logged lr and lambda equal the closed-form schedules", "[trainer]") {
    TempDir dir("trainer_sched");
    SynthConfig sc = tiny_synth();
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());
    TrainConfig tc = tiny_train(6);
    Trainer<double> trainer(accessor, tiny_model(sc), tc);
    for (int i = 0; i < 6; ++i) trainer.step();
    for (const LogEntry& e : trainer.log()) {
        CHECK(e.lr == clr_learning_rate(e.step, tc));
        CHECK(e.lambda == lambda_at_step(e.step, tc.adversarial));
        CHECK(e.self_batch == (e.step % 2 == 0));
        if (!e.self_batch) CHECK(e.rec == 0.0);
    }
}

TEST_CASE("same seed, same platform: identical losses", "[trainer]") {
    TempDir dir("trainer_det");
    SynthConfig sc = tiny_synth();
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());
    auto run = [&]() {
        Trainer<double> t(accessor, tiny_model(sc), tiny_train(10, 99));
        for (int i = 0; i < 10; ++i) t.step();
        return t.log().back().total;
    };
    double a = run(), b = run();
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);  // bit-identical
}

TEST_CASE("all generator-side parameters receive gradient on a self batch", "[trainer]") {
    TempDir dir("trainer_grads");
    SynthConfig sc = tiny_synth();
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());
    Trainer<double> trainer(accessor, tiny_model(sc), tiny_train(2, 3));
    ModelParams<double> before = trainer.params();
    trainer.step();  // step 0: self batch
    // every generator-side tensor moved, which requires a nonzero gradient
    auto entries_after = trainer.params().registry();
    auto entries_before = before.registry();
    for (std::size_t i = 0; i < entries_after.size(); ++i) {
        if (entries_after[i].group == "discriminator") continue;
        INFO(entries_after[i].name);
        CHECK((*entries_after[i].tensor - *entries_before[i].tensor).cwiseAbs().maxCoeff() >
              0.0);
    }
}

TEST_CASE("parameter registry order matches tape load order", "[trainer]") {
    ModelConfig cfg;
    cfg.d_model = 4;
    cfg.text_dim = 16;
    cfg.mel_bins = 8;
    cfg.frames = 8;
    cfg.tag_count = 6;
    cfg.disc_hidden = 12;
    ModelParams<double> p = ModelParams<double>::init(cfg, 1);
    Tape<double> tape;
    auto entries = p.registry();
    load_model_vars(tape, p, TrainableGroups::all());
    REQUIRE(tape.size() == entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        INFO(entries[i].name);
        CHECK(tape.val(static_cast<Tape<double>::Var>(i)) == *entries[i].tensor);
    }
}

TEST_CASE("every parameter receives gradient from the total objective", "[trainer]") {
    using Var = Tape<double>::Var;
    ModelConfig cfg;
    cfg.d_model = 4;
    cfg.text_dim = 16;
    cfg.mel_bins = 8;
    cfg.frames = 8;
    cfg.tag_count = 6;
    cfg.disc_hidden = 12;
    ModelParams<double> p = ModelParams<double>::init(cfg, 2);
    Rng rng(3);
    auto rand = [&](Eigen::Index r, Eigen::Index c) {
        Mat64 m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal() * 0.5;
        return m;
    };
    Tape<double> tape;
    auto entries = p.registry();
    ModelVars<double> v = load_model_vars(tape, p, TrainableGroups::all());
    std::vector<Var> pooled, styles;
    Var rec = -1;
    for (int i = 0; i < 2; ++i) {
        Var speech = tape.constant(rand(cfg.frames, cfg.mel_bins));
        Var text = tape.constant(rand(cfg.frames, cfg.text_dim));
        Var pose = tape.constant(rand(cfg.frames, cfg.pose_dim));
        Var face = tape.constant(rand(cfg.frames, cfg.face_dim));
        Mat64 tags = Mat64::Zero(1, cfg.tag_count);
        tags(0, i) = 1.0;
        Var content = ops::encode_content(tape, v, speech, text);
        pooled.push_back(tape.mean_rows(content));
        Var style = ops::encode_style(tape, v, speech, text, pose, face, tape.constant(tags));
        styles.push_back(style);
        Var fused = ops::fuse(tape, v, content, style);
        Var li = tape.add(
            tape.frob_norm(tape.sub(ops::decode(tape, v, fused, GestureHead::pose), pose)),
            tape.frob_norm(tape.sub(ops::decode(tape, v, fused, GestureHead::face), face)));
        rec = rec < 0 ? li : tape.add(rec, li);
    }
    Var pred = ops::discriminator_mlp(tape, v.disc, tape.concat_rows(pooled));
    Var adv = tape.fader_penalty(tape.concat_rows(styles), pred);
    Var total = tape.add(tape.scale(rec, 0.5), tape.scale(adv, 0.7));
    tape.backward(total);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        INFO(entries[i].name);
        CHECK(tape.grad(static_cast<Var>(i)).norm() > 0.0);
    }
}

TEST_CASE("divergence guard aborts with a diagnostic", "[trainer]") {
    TempDir dir("trainer_div");
    SynthConfig sc = tiny_synth();
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());
    Trainer<double> trainer(accessor, tiny_model(sc), tiny_train(2));
    trainer.params().fuse_w.array() += std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(trainer.step(), DivergenceError);
}

TEST_CASE("checkpoint resume reproduces an uninterrupted run", "[trainer][slow]") {
    TempDir dir("trainer_resume");
    SynthConfig sc = tiny_synth();
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());

    Trainer<double> full(accessor, tiny_model(sc), tiny_train(16, 42));
    for (int i = 0; i < 16; ++i) full.step();

    Trainer<double> half(accessor, tiny_model(sc), tiny_train(16, 42));
    for (int i = 0; i < 8; ++i) half.step();
    half.save_checkpoint(dir.path() / "mid.bin");
    Trainer<double> resumed = Trainer<double>::resume(dir.path() / "mid.bin", accessor);
    CHECK(resumed.step_count() == 8);
    for (int i = 0; i < 8; ++i) resumed.step();

    double a = full.log().back().total;
    double b = resumed.log().back().total;
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);

    // and the parameters themselves are bit-identical
    auto ea = full.params().registry();
    auto eb = resumed.params().registry();
    for (std::size_t i = 0; i < ea.size(); ++i) {
        CHECK(std::memcmp(ea[i].tensor->data(), eb[i].tensor->data(),
                          sizeof(double) * static_cast<std::size_t>(ea[i].tensor->size())) == 0);
    }
}

TEST_CASE("float32 resume is also bit-exact", "[trainer]") {
    TempDir dir("trainer_resume32");
    SynthConfig sc = tiny_synth(2, 6);
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());
    TrainConfig tc = tiny_train(8, 11);
    tc.precision_bits = 32;
    Trainer<float> full(accessor, tiny_model(sc), tc);
    for (int i = 0; i < 8; ++i) full.step();
    Trainer<float> half(accessor, tiny_model(sc), tc);
    for (int i = 0; i < 4; ++i) half.step();
    half.save_checkpoint(dir.path() / "mid32.bin");
    Trainer<float> resumed = Trainer<float>::resume(dir.path() / "mid32.bin", accessor);
    for (int i = 0; i < 4; ++i) resumed.step();
    double a = full.log().back().total, b = resumed.log().back().total;
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("checkpoint precision mismatch is rejected", "[trainer]") {
    TempDir dir("trainer_prec");
    SynthConfig sc = tiny_synth(2, 6);
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());
    Trainer<double> t(accessor, tiny_model(sc), tiny_train(2));
    t.step();
    t.save_checkpoint(dir.path() / "ck.bin");
    CHECK_THROWS_AS(Trainer<float>::resume(dir.path() / "ck.bin", accessor), DataError);
}

TEST_CASE("transfer with target = source equals the trainer's eval pass bit for bit",
          "[trainer]") {
    TempDir dir("trainer_selfrec");
    SynthConfig sc = tiny_synth();
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());
    Trainer<double> trainer(accessor, tiny_model(sc), tiny_train(4));
    for (int i = 0; i < 4; ++i) trainer.step();
    FeatureBundle seg = accessor.load("sp00", "s0001");

    GestureOutput<double> via_trainer = trainer.eval_self_reconstruction(seg);
    MatX<double> style = style_vector_of(trainer.params(), trainer.stats(), seg);
    GestureOutput<double> via_transfer =
        transfer_gestures(trainer.params(), trainer.stats(), seg, style);
    CHECK(via_trainer.pose == via_transfer.pose);
    CHECK(via_trainer.face == via_transfer.face);
}

TEST_CASE("short training halves the reconstruction loss", "[trainer][slow]") {
    TempDir dir("trainer_500");
    SynthConfig sc;
    sc.n_speakers = 4;
    sc.segments_per_speaker = 60;
    sc.seed = 7;
    sc.mel_bins = 32;
    sc.text_dim = 32;
    sc.tag_count = 38;
    generate_synthetic_corpus(sc, dir.path());
    auto [manifest, accessor] = validate_and_load_corpus(dir.path());

    ModelConfig mc = desk_model_config();  // d_model 16
    mc.text_dim = sc.text_dim;
    mc.mel_bins = sc.mel_bins;
    TrainConfig tc = desk_train_config();
    tc.total_iterations = 500;
    tc.seed = 7;

    Trainer<float> trainer(accessor, mc, tc);
    for (int i = 0; i < 500; ++i) trainer.step();

    const auto& log = trainer.log();
    double initial = log.front().rec;  // step 0 is a self batch
    double final_avg = 0;
    int count = 0;
    for (auto it = log.rbegin(); it != log.rend() && count < 5; ++it)
        if (it->self_batch) {
            final_avg += it->rec;
            ++count;
        }
    final_avg /= count;
    INFO("initial " << initial << " final " << final_avg);
    CHECK(final_avg < 0.5 * initial);
}
