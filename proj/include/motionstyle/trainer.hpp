// Alternating fader training: one discriminator regression step, then one
// generator-side step (both encoders, fusion, both decoders) against the
// reconstruction + lambda-ramped adversarial objective. Adam with a
// triangular cyclical learning rate. Checkpoints capture parameters,
// optimizer moments, the step counter and normalization stats, so a resumed
// run reproduces an uninterrupted one bit for bit.
#pragma once

#include "motionstyle/disentangle.hpp"
#include "motionstyle/generator.hpp"
#include "motionstyle/inference.hpp"
#include "motionstyle/synthcorpus.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace motionstyle {

struct TrainConfig {
    int batch_size = 24;
    double beta1 = 0.95;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clr_base = 1e-7;
    double clr_max = 0.1;
    std::uint64_t clr_step_size = 196;
    std::uint64_t total_iterations = 78400;
    std::uint64_t seed = 0;
    std::uint64_t checkpoint_every = 0;  // 0: final checkpoint only
    int precision_bits = 64;             // recorded in checkpoints
    double grad_clip = 5.0;
    AdversarialSchedule adversarial;
    std::vector<std::string> train_speakers;  // empty: every manifest speaker

    nlohmann::ordered_json to_json() const {
        return {{"batch_size", batch_size},
                {"beta1", beta1},
                {"beta2", beta2},
                {"adam_eps", adam_eps},
                {"clr_base", clr_base},
                {"clr_max", clr_max},
                {"clr_step_size", clr_step_size},
                {"total_iterations", total_iterations},
                {"seed", seed},
                {"checkpoint_every", checkpoint_every},
                {"precision_bits", precision_bits},
                {"grad_clip", grad_clip},
                {"lambda_step_increment", adversarial.lambda_step_increment},
                {"lambda_max", adversarial.lambda_max},
                {"train_speakers", train_speakers}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("batch_size", c.batch_size);
        get("beta1", c.beta1);
        get("beta2", c.beta2);
        get("adam_eps", c.adam_eps);
        get("clr_base", c.clr_base);
        get("clr_max", c.clr_max);
        get("clr_step_size", c.clr_step_size);
        get("total_iterations", c.total_iterations);
        get("seed", c.seed);
        get("checkpoint_every", c.checkpoint_every);
        get("precision_bits", c.precision_bits);
        get("grad_clip", c.grad_clip);
        get("lambda_step_increment", c.adversarial.lambda_step_increment);
        get("lambda_max", c.adversarial.lambda_max);
        get("train_speakers", c.train_speakers);
        if (c.clr_base >= c.clr_max) throw DataError("TrainConfig: clr_base must be < clr_max");
        if (c.clr_step_size < 1) throw DataError("TrainConfig: clr_step_size must be >= 1");
        return c;
    }
};

// Triangular policy: lr walks base -> max over one step-size, back down over
// the next, repeating.
inline double clr_learning_rate(std::uint64_t step, const TrainConfig& cfg) {
    const double st = static_cast<double>(cfg.clr_step_size);
    const double s = static_cast<double>(step);
    const double cycle = std::floor(1.0 + s / (2.0 * st));
    const double x = std::abs(s / st - 2.0 * cycle + 1.0);
    return cfg.clr_base + (cfg.clr_max - cfg.clr_base) * std::max(0.0, 1.0 - x);
}

template <class S>
class AdamOptimizer {
public:
    AdamOptimizer() = default;
    AdamOptimizer(double beta1, double beta2, double eps)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void attach(const std::vector<MatX<S>*>& params) {
        m_.clear();
        v_.clear();
        for (const MatX<S>* p : params) {
            m_.push_back(MatX<S>::Zero(p->rows(), p->cols()));
            v_.push_back(MatX<S>::Zero(p->rows(), p->cols()));
        }
        t_ = 0;
    }

    // grads[i] pairs with params[i]; clip is a global-norm bound (<= 0: off)
    void update(const std::vector<MatX<S>*>& params, const std::vector<const MatX<S>*>& grads,
                double lr, double clip) {
        t_ += 1;
        S scale = S(1);
        if (clip > 0) {
            S sq = S(0);
            for (const MatX<S>* g : grads) sq += g->squaredNorm();
            S norm = std::sqrt(sq);
            if (norm > S(clip)) scale = S(clip) / norm;
        }
        const S b1 = S(beta1_), b2 = S(beta2_);
        const S corr1 = S(1) - static_cast<S>(std::pow(beta1_, static_cast<double>(t_)));
        const S corr2 = S(1) - static_cast<S>(std::pow(beta2_, static_cast<double>(t_)));
        for (std::size_t i = 0; i < params.size(); ++i) {
            MatX<S> g = *grads[i] * scale;
            m_[i] = b1 * m_[i] + (S(1) - b1) * g;
            v_[i] = b2 * v_[i] + (S(1) - b2) * g.cwiseProduct(g);
            params[i]->array() -= S(lr) * (m_[i].array() / corr1) /
                                  ((v_[i].array() / corr2).sqrt() + S(eps_));
        }
    }

    std::uint64_t step_count() const { return t_; }
    std::vector<MatX<S>>& moments_m() { return m_; }
    std::vector<MatX<S>>& moments_v() { return v_; }
    void set_step_count(std::uint64_t t) { t_ = t; }

private:
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::uint64_t t_ = 0;
    std::vector<MatX<S>> m_, v_;
};

struct LogEntry {
    std::uint64_t step = 0;
    bool self_batch = true;
    double lr = 0, lambda = 0, rec = 0, adv = 0, dis = 0, total = 0;

    nlohmann::ordered_json to_json() const {
        return {{"step", step},   {"kind", self_batch ? "self" : "cross"},
                {"lr", lr},       {"lambda", lambda},
                {"L_rec", rec},   {"L_adv", adv},
                {"L_dis", dis},   {"L_total", total}};
    }
};

// Group hashes around the two sub-updates of one step, for alternation
// checks: the discriminator update must leave generator-side tensors
// untouched and vice versa.
struct StepTrace {
    std::uint64_t gen_before = 0, gen_after_disc_update = 0, gen_after_gen_update = 0;
    std::uint64_t disc_before = 0, disc_after_disc_update = 0, disc_after_gen_update = 0;
};

template <class S>
class Trainer {
public:
    Trainer(const CorpusAccessor& corpus, ModelConfig mcfg, TrainConfig tcfg)
        : mcfg_(mcfg), tcfg_(tcfg), params_(ModelParams<S>::init(mcfg, tcfg.seed)),
          gen_opt_(tcfg.beta1, tcfg.beta2, tcfg.adam_eps),
          disc_opt_(tcfg.beta1, tcfg.beta2, tcfg.adam_eps) {
        check_against_manifest(corpus.manifest());
        load_training_data(corpus);
        attach_optimizers();
    }

    std::uint64_t step_count() const { return step_; }
    ModelParams<S>& params() { return params_; }
    const ModelParams<S>& params() const { return params_; }
    const NormalizationStats& stats() const { return stats_; }
    const std::vector<LogEntry>& log() const { return log_; }
    const TrainConfig& train_config() const { return tcfg_; }
    const ModelConfig& model_config() const { return mcfg_; }
    void enable_step_trace(bool on) { trace_enabled_ = on; }
    const StepTrace& last_trace() const { return trace_; }

    // one full alternation: discriminator update, then generator update
    LogEntry step() {
        const double lr = clr_learning_rate(step_, tcfg_);
        const double lambda = lambda_at_step(step_, tcfg_.adversarial);
        const bool self_batch = (step_ % 2 == 0);
        const auto pairs = sample_batch(step_, self_batch);
        const Eigen::Index B = static_cast<Eigen::Index>(pairs.size());

        using Var = typename Tape<S>::Var;
        Tape<S> tape;
        auto entries = params_.registry();
        ModelVars<S> v = load_model_vars(tape, params_, TrainableGroups::generator_side());
        // registry order == tape load order; gradients are read back by index
        if (tape.size() != entries.size())
            throw DivergenceError("internal: parameter registry / tape order mismatch");

        std::vector<Var> contents, pooled_list, style_pooled;
        contents.reserve(pairs.size());
        for (const auto& pr : pairs) {
            const Sample& src = data_[pr.first];
            Var c = ops::encode_content(tape, v, tape.constant(src.speech),
                                        tape.constant(src.text));
            contents.push_back(c);
            pooled_list.push_back(tape.mean_rows(c));
        }
        for (const auto& pr : pairs) {
            const Sample& tgt = data_[pr.second];
            style_pooled.push_back(ops::style_pooled_attention(
                tape, v, tape.constant(tgt.speech), tape.constant(tgt.text)));
        }
        // pose/face LSTMs batched over the target segments
        std::vector<Var> pose_seq, face_seq;
        for (Eigen::Index t = 0; t < mcfg_.frames; ++t) {
            MatX<S> xp(B, mcfg_.pose_dim), xf(B, mcfg_.face_dim);
            for (Eigen::Index i = 0; i < B; ++i) {
                const Sample& tgt = data_[pairs[static_cast<std::size_t>(i)].second];
                xp.row(i) = tgt.pose.row(t);
                xf.row(i) = tgt.face.row(t);
            }
            pose_seq.push_back(tape.constant(std::move(xp)));
            face_seq.push_back(tape.constant(std::move(xf)));
        }
        Var hp = nn::lstm_final_hidden(tape, pose_seq, v.lstm_pose);
        Var hf = nn::lstm_final_hidden(tape, face_seq, v.lstm_face);
        std::vector<Var> styles;
        for (Eigen::Index i = 0; i < B; ++i) {
            const Sample& tgt = data_[pairs[static_cast<std::size_t>(i)].second];
            styles.push_back(tape.concat_cols({style_pooled[static_cast<std::size_t>(i)],
                                               tape.slice_rows(hp, i, 1),
                                               tape.slice_rows(hf, i, 1),
                                               tape.constant(tgt.tags)}));
        }
        Var pooled_b = tape.concat_rows(pooled_list);
        Var style_b = tape.concat_rows(styles);

        if (trace_enabled_) {
            trace_.gen_before = group_hash(false);
            trace_.disc_before = group_hash(true);
        }

        // (a) discriminator step, encoders frozen
        double dis_loss_val;
        {
            Tape<S> dt;
            Var pc = dt.constant(tape.val(pooled_b));
            Var sb = dt.constant(tape.val(style_b));
            DiscVars<S> dv = load_disc_vars(dt, params_, true);
            Var pred = ops::discriminator_mlp(dt, dv, pc);
            Var ldis = dt.row_l2_mean(sb, pred);
            dis_loss_val = static_cast<double>(dt.val(ldis)(0, 0));
            dt.backward(ldis);
            std::vector<const MatX<S>*> grads = {&dt.grad(dv.w1), &dt.grad(dv.b1),
                                                 &dt.grad(dv.w2), &dt.grad(dv.b2),
                                                 &dt.grad(dv.w3), &dt.grad(dv.b3)};
            disc_opt_.update(disc_tensors(), grads, lr, tcfg_.grad_clip);
        }
        if (trace_enabled_) {
            trace_.gen_after_disc_update = group_hash(false);
            trace_.disc_after_disc_update = group_hash(true);
        }

        // (b) generator step against the freshly updated, frozen discriminator
        DiscVars<S> frozen = load_disc_vars(tape, params_, false);
        Var predicted = ops::discriminator_mlp(tape, frozen, pooled_b);
        Var l_adv = tape.fader_penalty(style_b, predicted);
        double rec_loss_val = 0.0;
        Var total;
        if (self_batch) {
            Var acc = -1;
            for (Eigen::Index i = 0; i < B; ++i) {
                const Sample& tgt = data_[pairs[static_cast<std::size_t>(i)].second];
                Var fused = ops::fuse(tape, v, contents[static_cast<std::size_t>(i)],
                                      styles[static_cast<std::size_t>(i)]);
                Var dp = ops::decode(tape, v, fused, GestureHead::pose);
                Var df = ops::decode(tape, v, fused, GestureHead::face);
                Var li = tape.add(tape.frob_norm(tape.sub(dp, tape.constant(tgt.pose))),
                                  tape.frob_norm(tape.sub(df, tape.constant(tgt.face))));
                acc = (acc < 0) ? li : tape.add(acc, li);
            }
            Var l_rec = tape.scale(acc, S(1) / static_cast<S>(B));
            rec_loss_val = static_cast<double>(tape.val(l_rec)(0, 0));
            total = tape.add(l_rec, tape.scale(l_adv, static_cast<S>(lambda)));
        } else {
            total = tape.scale(l_adv, static_cast<S>(lambda));
        }

        LogEntry e;
        e.step = step_;
        e.self_batch = self_batch;
        e.lr = lr;
        e.lambda = lambda;
        e.rec = rec_loss_val;
        e.adv = static_cast<double>(tape.val(l_adv)(0, 0));
        e.dis = dis_loss_val;
        e.total = static_cast<double>(tape.val(total)(0, 0));
        if (!std::isfinite(e.total) || !std::isfinite(e.dis))
            throw DivergenceError("non-finite loss at step " + std::to_string(step_) +
                                  " (L_rec=" + std::to_string(e.rec) +
                                  ", L_adv=" + std::to_string(e.adv) +
                                  ", L_dis=" + std::to_string(e.dis) + ")");

        tape.backward(total);
        std::vector<MatX<S>*> gp;
        std::vector<const MatX<S>*> gg;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].group == "discriminator") continue;
            gp.push_back(entries[i].tensor);
            gg.push_back(&tape.grad(static_cast<Var>(i)));
        }
        gen_opt_.update(gp, gg, lr, tcfg_.grad_clip);
        if (trace_enabled_) {
            trace_.gen_after_gen_update = group_hash(false);
            trace_.disc_after_gen_update = group_hash(true);
        }

        log_.push_back(e);
        step_ += 1;
        return e;
    }

    void run(std::uint64_t until_step, std::ostream* log_stream = nullptr,
             const std::filesystem::path& checkpoint_dir = {}) {
        while (step_ < until_step) {
            LogEntry e = step();
            if (log_stream) (*log_stream) << e.to_json().dump() << "\n";
            if (tcfg_.checkpoint_every > 0 && !checkpoint_dir.empty() &&
                step_ % tcfg_.checkpoint_every == 0 && step_ < until_step) {
                char name[64];
                std::snprintf(name, sizeof name, "checkpoint_step%06llu.bin",
                              static_cast<unsigned long long>(step_));
                save_checkpoint(checkpoint_dir / name);
            }
        }
    }

    // same code path as the CLI transfer with target = source
    GestureOutput<double> eval_self_reconstruction(const FeatureBundle& segment) const {
        return self_reconstruct(params_, stats_, segment);
    }

    // ---- checkpointing ----

    void save_checkpoint(const std::filesystem::path& path) const {
        nlohmann::ordered_json header;
        header["kind"] = "checkpoint";
        header["precision"] = static_cast<int>(sizeof(S) * 8);
        header["step"] = step_;
        header["lambda"] = lambda_at_step(step_, tcfg_.adversarial);
        header["rng_state"] = Rng::mix(tcfg_.seed, step_);
        header["model_config"] = mcfg_.to_json();
        header["train_config"] = tcfg_.to_json();
        header["config_hash"] = config_hash();
        header["adam"] = {{"gen_t", gen_opt_.step_count()}, {"disc_t", disc_opt_.step_count()}};
        const std::string hs = header.dump();

        std::vector<NamedTensor> tensors;
        const bool f64 = sizeof(S) == 8;
        auto& self = const_cast<Trainer&>(*this);
        for (auto& e : self.params_.registry())
            tensors.push_back({e.name, e.tensor->template cast<double>(), f64});
        auto dump_opt = [&](AdamOptimizer<S>& opt, const std::string& prefix,
                            const std::vector<std::string>& names) {
            for (std::size_t i = 0; i < names.size(); ++i) {
                tensors.push_back(
                    {prefix + ".m." + names[i], opt.moments_m()[i].template cast<double>(), f64});
                tensors.push_back(
                    {prefix + ".v." + names[i], opt.moments_v()[i].template cast<double>(), f64});
            }
        };
        dump_opt(self.gen_opt_, "opt.gen", gen_tensor_names());
        dump_opt(self.disc_opt_, "opt.disc", disc_tensor_names());
        tensors.push_back({"stats.speech_mean", stats_.speech_mean, true});
        tensors.push_back({"stats.speech_std", stats_.speech_std, true});
        tensors.push_back({"stats.text_mean", stats_.text_mean, true});
        tensors.push_back({"stats.text_std", stats_.text_std, true});
        tensors.push_back({"stats.pose_mean", stats_.pose_mean, true});
        tensors.push_back({"stats.pose_std", stats_.pose_std, true});
        tensors.push_back({"stats.face_mean", stats_.face_mean, true});
        tensors.push_back({"stats.face_std", stats_.face_std, true});
        tensors.push_back({"stats.epsilon", Mat64::Constant(1, 1, stats_.epsilon), true});

        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("cannot write checkpoint: " + path.string());
        std::uint32_t len = static_cast<std::uint32_t>(hs.size());
        os.write(reinterpret_cast<const char*>(&len), 4);
        os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        write_named_tensors(os, tensors);
        if (!os) throw DataError("checkpoint write failed: " + path.string());
    }

    static Trainer resume(const std::filesystem::path& path, const CorpusAccessor& corpus) {
        std::pair<nlohmann::json, std::vector<NamedTensor>> raw = read_checkpoint_raw(path);
        const nlohmann::json& header = raw.first;
        const std::vector<NamedTensor>& tensors = raw.second;
        if (header.at("precision").get<int>() != static_cast<int>(sizeof(S) * 8))
            throw DataError("checkpoint precision " +
                            std::to_string(header.at("precision").get<int>()) +
                            " does not match this trainer instantiation");
        ModelConfig mcfg = ModelConfig::from_json(header.at("model_config"));
        TrainConfig tcfg = TrainConfig::from_json(header.at("train_config"));
        Trainer tr(corpus, mcfg, tcfg);
        if (tr.config_hash() != header.at("config_hash").get<std::uint64_t>())
            throw DataError("checkpoint config hash mismatch");
        tr.params_.load_named_tensors(tensors);
        tr.stats_ = stats_from_tensors(tensors);
        tr.rebuild_normalized_data();
        auto load_opt = [&](AdamOptimizer<S>& opt, const std::string& prefix,
                            const std::vector<std::string>& names, std::uint64_t t) {
            std::map<std::string, const NamedTensor*> by_name;
            for (const auto& nt : tensors) by_name[nt.name] = &nt;
            for (std::size_t i = 0; i < names.size(); ++i) {
                auto mi = by_name.find(prefix + ".m." + names[i]);
                auto vi = by_name.find(prefix + ".v." + names[i]);
                if (mi == by_name.end() || vi == by_name.end())
                    throw DataError("checkpoint missing optimizer state for " + names[i]);
                opt.moments_m()[i] = mi->second->value.cast<S>();
                opt.moments_v()[i] = vi->second->value.cast<S>();
            }
            opt.set_step_count(t);
        };
        load_opt(tr.gen_opt_, "opt.gen", tr.gen_tensor_names(),
                 header.at("adam").at("gen_t").get<std::uint64_t>());
        load_opt(tr.disc_opt_, "opt.disc", tr.disc_tensor_names(),
                 header.at("adam").at("disc_t").get<std::uint64_t>());
        tr.step_ = header.at("step").get<std::uint64_t>();
        return tr;
    }

    static std::pair<nlohmann::json, std::vector<NamedTensor>> read_checkpoint_raw(
        const std::filesystem::path& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw DataError("cannot open checkpoint: " + path.string());
        std::uint32_t len = 0;
        if (!is.read(reinterpret_cast<char*>(&len), 4))
            throw DataError("truncated checkpoint header: " + path.string());
        std::string hs(len, '\0');
        if (!is.read(hs.data(), len))
            throw DataError("truncated checkpoint header: " + path.string());
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(hs);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("checkpoint header parse error: " + std::string(e.what()));
        }
        return {header, read_named_tensors(is, path.string())};
    }

    static NormalizationStats stats_from_tensors(const std::vector<NamedTensor>& tensors) {
        NormalizationStats s;
        std::map<std::string, const NamedTensor*> by_name;
        for (const auto& nt : tensors) by_name[nt.name] = &nt;
        auto need = [&](const std::string& name) -> const Mat64& {
            auto it = by_name.find(name);
            if (it == by_name.end()) throw DataError("checkpoint missing " + name);
            return it->second->value;
        };
        s.speech_mean = need("stats.speech_mean");
        s.speech_std = need("stats.speech_std");
        s.text_mean = need("stats.text_mean");
        s.text_std = need("stats.text_std");
        s.pose_mean = need("stats.pose_mean");
        s.pose_std = need("stats.pose_std");
        s.face_mean = need("stats.face_mean");
        s.face_std = need("stats.face_std");
        s.epsilon = need("stats.epsilon")(0, 0);
        return s;
    }

    std::uint64_t config_hash() const {
        return fnv1a(mcfg_.to_json().dump() + tcfg_.to_json().dump());
    }

private:
    struct Sample {
        int speaker = 0;
        MatX<S> speech, text, pose, face, tags;
    };

    void check_against_manifest(const CorpusManifest& m) {
        if (mcfg_.mel_bins != m.mel_bins || mcfg_.text_dim != m.text_dim ||
            mcfg_.pose_dim != m.pose_dim || mcfg_.face_dim != m.face_dim ||
            mcfg_.tag_count != m.tag_count() || mcfg_.frames != m.frames_per_segment)
            throw DataError(
                "model config does not match the corpus manifest (mel_bins/text_dim/pose_dim/"
                "face_dim/tag_count/frames)");
        speakers_ = tcfg_.train_speakers.empty() ? m.speakers : tcfg_.train_speakers;
        for (const auto& sp : speakers_)
            if (std::find(m.speakers.begin(), m.speakers.end(), sp) == m.speakers.end())
                throw DataError("train speaker " + sp + " not present in the corpus");
    }

    void load_training_data(const CorpusAccessor& corpus) {
        raw_train_.clear();
        for (std::size_t si = 0; si < speakers_.size(); ++si) {
            const auto& sp = speakers_[si];
            for (const auto& id : corpus.manifest().splits.at(sp).train)
                raw_train_.push_back({static_cast<int>(si), corpus.load(sp, id)});
        }
        if (raw_train_.empty()) throw DataError("no training segments for the selected speakers");
        std::vector<const FeatureBundle*> ptrs;
        for (const auto& [spk, b] : raw_train_) ptrs.push_back(&b);
        stats_ = compute_normalization_stats(ptrs);
        rebuild_normalized_data();
    }

    void rebuild_normalized_data() {
        data_.clear();
        by_speaker_.assign(speakers_.size(), {});
        for (const auto& [spk, bundle] : raw_train_) {
            NormalizedBundle<S> n = normalize_and_cast<S>(bundle, stats_);
            Sample s;
            s.speaker = spk;
            s.speech = std::move(n.speech);
            s.text = std::move(n.text);
            s.pose = std::move(n.pose);
            s.face = std::move(n.face);
            s.tags = std::move(n.tags);
            by_speaker_[static_cast<std::size_t>(spk)].push_back(data_.size());
            data_.push_back(std::move(s));
        }
    }

    void attach_optimizers() {
        std::vector<MatX<S>*> gen, disc;
        for (auto& e : params_.registry())
            (e.group == "discriminator" ? disc : gen).push_back(e.tensor);
        gen_opt_.attach(gen);
        disc_opt_.attach(disc);
    }

    std::vector<MatX<S>*> disc_tensors() {
        std::vector<MatX<S>*> out;
        for (auto& e : params_.registry())
            if (e.group == "discriminator") out.push_back(e.tensor);
        return out;
    }

    std::uint64_t group_hash(bool discriminator) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (auto& e : params_.registry()) {
            if ((e.group == "discriminator") != discriminator) continue;
            const auto* bytes = reinterpret_cast<const unsigned char*>(e.tensor->data());
            const std::size_t n = sizeof(S) * static_cast<std::size_t>(e.tensor->size());
            for (std::size_t i = 0; i < n; ++i) {
                h ^= bytes[i];
                h *= 0x100000001b3ULL;
            }
        }
        return h;
    }

    std::vector<std::string> gen_tensor_names() const {
        std::vector<std::string> out;
        auto& self = const_cast<Trainer&>(*this);
        for (auto& e : self.params_.registry())
            if (e.group != "discriminator") out.push_back(e.name);
        return out;
    }

    std::vector<std::string> disc_tensor_names() const {
        std::vector<std::string> out;
        auto& self = const_cast<Trainer&>(*this);
        for (auto& e : self.params_.registry())
            if (e.group == "discriminator") out.push_back(e.name);
        return out;
    }

    // Stateless batch composition: a pure function of (seed, step), so a
    // resumed run draws exactly the batches an uninterrupted run would.
    std::vector<std::pair<std::size_t, std::size_t>> sample_batch(std::uint64_t step,
                                                                  bool self_batch) const {
        Rng rng = Rng::derive(tcfg_.seed, {0xBA7C4ULL, step});
        std::vector<std::pair<std::size_t, std::size_t>> out;
        out.reserve(static_cast<std::size_t>(tcfg_.batch_size));
        for (int i = 0; i < tcfg_.batch_size; ++i) {
            std::size_t src = static_cast<std::size_t>(rng.below(data_.size()));
            std::size_t tgt = src;
            if (!self_batch && speakers_.size() > 1) {
                int src_speaker = data_[src].speaker;
                std::size_t other =
                    static_cast<std::size_t>(rng.below(speakers_.size() - 1));
                if (other >= static_cast<std::size_t>(src_speaker)) other += 1;
                const auto& pool = by_speaker_[other];
                tgt = pool[static_cast<std::size_t>(rng.below(pool.size()))];
            }
            out.emplace_back(src, tgt);
        }
        return out;
    }

    ModelConfig mcfg_;
    TrainConfig tcfg_;
    ModelParams<S> params_;
    AdamOptimizer<S> gen_opt_, disc_opt_;
    NormalizationStats stats_;
    std::uint64_t step_ = 0;
    std::vector<std::string> speakers_;
    std::vector<std::pair<int, FeatureBundle>> raw_train_;
    std::vector<Sample> data_;
    std::vector<std::vector<std::size_t>> by_speaker_;
    std::vector<LogEntry> log_;
    bool trace_enabled_ = false;
    StepTrace trace_;
};

// Loaded checkpoint for inference-only use.
template <class S>
struct LoadedModel {
    ModelConfig cfg;
    ModelParams<S> params{};
    NormalizationStats stats;
    std::uint64_t step = 0;

    static LoadedModel load(const std::filesystem::path& path) {
        std::pair<nlohmann::json, std::vector<NamedTensor>> raw =
            Trainer<S>::read_checkpoint_raw(path);
        const nlohmann::json& header = raw.first;
        LoadedModel m;
        m.cfg = ModelConfig::from_json(header.at("model_config"));
        m.params = ModelParams<S>::init(m.cfg, 0);
        m.params.load_named_tensors(raw.second);
        m.stats = Trainer<S>::stats_from_tensors(raw.second);
        m.step = header.at("step").template get<std::uint64_t>();
        return m;
    }
};

// Full training entry point: computes stats, runs every iteration, writes
// the line-delimited log, the stats container and the final checkpoint.
template <class S>
Trainer<S> train_model(const CorpusAccessor& corpus, const ModelConfig& mcfg,
                       const TrainConfig& tcfg, const std::filesystem::path& out_dir,
                       std::ostream* progress = nullptr) {
    std::filesystem::create_directories(out_dir);
    Trainer<S> trainer(corpus, mcfg, tcfg);
    std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw DataError("cannot write train log under " + out_dir.string());
    write_normalization_stats(out_dir / "normalization_stats.bin", trainer.stats());
    while (trainer.step_count() < tcfg.total_iterations) {
        LogEntry e = trainer.step();
        log << e.to_json().dump() << "\n";
        if (tcfg.checkpoint_every > 0 && trainer.step_count() % tcfg.checkpoint_every == 0 &&
            trainer.step_count() < tcfg.total_iterations) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_step%06llu.bin",
                          static_cast<unsigned long long>(trainer.step_count()));
            trainer.save_checkpoint(out_dir / name);
        }
        if (progress && trainer.step_count() % 100 == 0)
            (*progress) << "step " << trainer.step_count() << "/" << tcfg.total_iterations
                        << "  L_total=" << e.total << "  L_dis=" << e.dis << "\n";
    }
    trainer.save_checkpoint(out_dir / "checkpoint_final.bin");
    return trainer;
}

}  // namespace motionstyle
