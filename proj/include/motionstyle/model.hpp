// Model configuration and the full trainable parameter set.
//
// Parameter groups: "content" (content-side speech encoder + attention),
// "style" (style-side speech encoder, attention, pose/face LSTMs),
// "generator" (fusion + the two decoders), "discriminator". The trainer
// updates {content, style, generator} jointly and "discriminator" on the
// alternating step.
#pragma once

#include "motionstyle/common.hpp"
#include "motionstyle/nn.hpp"
#include "motionstyle/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace motionstyle {

struct ModelConfig {
    Eigen::Index d_model = 64;
    Eigen::Index text_dim = 768;
    Eigen::Index mel_bins = 128;
    Eigen::Index tag_count = 38;
    Eigen::Index frames = 64;
    Eigen::Index pose_dim = 22;
    Eigen::Index face_dim = 30;
    Eigen::Index n_heads_enc = 4;
    Eigen::Index n_heads_dec = 2;
    int n_dec_layers = 1;
    int n_lstm_layers = 3;
    Eigen::Index conv_channels = 6;
    Eigen::Index conv_kernel = 5;
    Eigen::Index conv_stride = 2;
    Eigen::Index disc_hidden = 256;
    bool positional_encoding = true;

    Eigen::Index d_att() const { return d_model + text_dim; }
    Eigen::Index style_dim() const { return d_att() + 2 * d_model + tag_count; }
    Eigen::Index conv_out_len() const { return (mel_bins - conv_kernel) / conv_stride + 1; }

    void validate() const {
        if (d_model <= 0 || text_dim <= 0 || mel_bins <= 0 || frames <= 0)
            throw DataError("ModelConfig: dimensions must be positive");
        if (mel_bins < conv_kernel)
            throw DataError("ModelConfig: mel_bins smaller than the conv kernel");
    }

    nlohmann::ordered_json to_json() const {
        return {{"d_model", d_model},       {"text_dim", text_dim},
                {"mel_bins", mel_bins},     {"tag_count", tag_count},
                {"frames", frames},         {"pose_dim", pose_dim},
                {"face_dim", face_dim},     {"n_heads_enc", n_heads_enc},
                {"n_heads_dec", n_heads_dec}, {"n_dec_layers", n_dec_layers},
                {"n_lstm_layers", n_lstm_layers}, {"conv_channels", conv_channels},
                {"conv_kernel", conv_kernel}, {"conv_stride", conv_stride},
                {"disc_hidden", disc_hidden}, {"positional_encoding", positional_encoding}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("d_model", c.d_model);
        get("text_dim", c.text_dim);
        get("mel_bins", c.mel_bins);
        get("tag_count", c.tag_count);
        get("frames", c.frames);
        get("pose_dim", c.pose_dim);
        get("face_dim", c.face_dim);
        get("n_heads_enc", c.n_heads_enc);
        get("n_heads_dec", c.n_heads_dec);
        get("n_dec_layers", c.n_dec_layers);
        get("n_lstm_layers", c.n_lstm_layers);
        get("conv_channels", c.conv_channels);
        get("conv_kernel", c.conv_kernel);
        get("conv_stride", c.conv_stride);
        get("disc_hidden", c.disc_hidden);
        get("positional_encoding", c.positional_encoding);
        c.validate();
        return c;
    }
};

// Trainable stand-in for a pretrained spectrogram encoder: a strided 1D
// convolution over the mel axis followed by a projection, applied per frame
// so the encoder stays local in time.
template <class S>
struct SpeechEncParams {
    MatX<S> conv_k;  // channels x kernel
    MatX<S> conv_b;  // 1 x channels
    MatX<S> proj_w;  // (channels * conv_out_len) x d_model
    MatX<S> proj_b;  // 1 x d_model

    static SpeechEncParams init(const ModelConfig& cfg, Rng rng) {
        SpeechEncParams p;
        p.conv_k = nn::xavier_uniform<S>(cfg.conv_channels, cfg.conv_kernel,
                                         Rng::derive(rng.next_u64(), {0}));
        p.conv_b = MatX<S>::Zero(1, cfg.conv_channels);
        p.proj_w = nn::xavier_uniform<S>(cfg.conv_channels * cfg.conv_out_len(), cfg.d_model,
                                         Rng::derive(rng.next_u64(), {1}));
        p.proj_b = MatX<S>::Zero(1, cfg.d_model);
        return p;
    }

    std::vector<std::pair<std::string, MatX<S>*>> tensors(const std::string& prefix) {
        return {{prefix + ".conv_k", &conv_k},
                {prefix + ".conv_b", &conv_b},
                {prefix + ".proj_w", &proj_w},
                {prefix + ".proj_b", &proj_b}};
    }
};

// One pre-norm decoder block plus the head's output projection.
template <class S>
struct DecoderParams {
    struct Block {
        MatX<S> ln1_g, ln1_b;
        nn::AttentionParams<S> attn;
        MatX<S> ln2_g, ln2_b;
        MatX<S> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };
    std::vector<Block> blocks;
    MatX<S> out_w, out_b;

    static DecoderParams init(const ModelConfig& cfg, Eigen::Index out_dim, Rng rng) {
        DecoderParams p;
        const Eigen::Index d = cfg.d_model;
        for (int l = 0; l < cfg.n_dec_layers; ++l) {
            Block b;
            b.ln1_g = MatX<S>::Ones(1, d);
            b.ln1_b = MatX<S>::Zero(1, d);
            b.attn = nn::AttentionParams<S>::init(d, cfg.n_heads_dec,
                                                  Rng::derive(rng.next_u64(), {10}));
            b.ln2_g = MatX<S>::Ones(1, d);
            b.ln2_b = MatX<S>::Zero(1, d);
            b.ffn_w1 = nn::xavier_uniform<S>(d, 4 * d, Rng::derive(rng.next_u64(), {11}));
            b.ffn_b1 = MatX<S>::Zero(1, 4 * d);
            b.ffn_w2 = nn::xavier_uniform<S>(4 * d, d, Rng::derive(rng.next_u64(), {12}));
            b.ffn_b2 = MatX<S>::Zero(1, d);
            p.blocks.push_back(std::move(b));
        }
        // near-zero output projection: initial predictions sit at the data mean
        p.out_w = nn::xavier_uniform<S>(d, out_dim, Rng::derive(rng.next_u64(), {13}), 0.01);
        p.out_b = MatX<S>::Zero(1, out_dim);
        return p;
    }

    std::vector<std::pair<std::string, MatX<S>*>> tensors(const std::string& prefix) {
        std::vector<std::pair<std::string, MatX<S>*>> out;
        for (std::size_t l = 0; l < blocks.size(); ++l) {
            const std::string bp = prefix + ".block" + std::to_string(l);
            Block& b = blocks[l];
            out.emplace_back(bp + ".ln1_g", &b.ln1_g);
            out.emplace_back(bp + ".ln1_b", &b.ln1_b);
            for (auto& t : b.attn.tensors(bp + ".attn")) out.push_back(t);
            out.emplace_back(bp + ".ln2_g", &b.ln2_g);
            out.emplace_back(bp + ".ln2_b", &b.ln2_b);
            out.emplace_back(bp + ".ffn_w1", &b.ffn_w1);
            out.emplace_back(bp + ".ffn_b1", &b.ffn_b1);
            out.emplace_back(bp + ".ffn_w2", &b.ffn_w2);
            out.emplace_back(bp + ".ffn_b2", &b.ffn_b2);
        }
        out.emplace_back(prefix + ".out_w", &out_w);
        out.emplace_back(prefix + ".out_b", &out_b);
        return out;
    }
};

template <class S>
struct ModelParams {
    ModelConfig cfg;
    SpeechEncParams<S> speech_content, speech_style;
    nn::AttentionParams<S> content_attn, style_attn;
    nn::LstmParams<S> lstm_pose, lstm_face;
    MatX<S> fuse_w, fuse_b;
    DecoderParams<S> dec_pose, dec_face;
    MatX<S> disc_w1, disc_b1, disc_w2, disc_b2, disc_w3, disc_b3;

    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        ModelParams p;
        p.cfg = cfg;
        p.speech_content = SpeechEncParams<S>::init(cfg, Rng::derive(seed, {1}));
        p.speech_style = SpeechEncParams<S>::init(cfg, Rng::derive(seed, {2}));
        p.content_attn =
            nn::AttentionParams<S>::init(cfg.d_att(), cfg.n_heads_enc, Rng::derive(seed, {3}));
        p.style_attn =
            nn::AttentionParams<S>::init(cfg.d_att(), cfg.n_heads_enc, Rng::derive(seed, {4}));
        p.lstm_pose = nn::LstmParams<S>::init(cfg.pose_dim, cfg.d_model, cfg.n_lstm_layers,
                                              Rng::derive(seed, {5}));
        p.lstm_face = nn::LstmParams<S>::init(cfg.face_dim, cfg.d_model, cfg.n_lstm_layers,
                                              Rng::derive(seed, {6}));
        p.fuse_w = nn::xavier_uniform<S>(cfg.d_att() + cfg.style_dim(), cfg.d_model,
                                         Rng::derive(seed, {7}));
        p.fuse_b = MatX<S>::Zero(1, cfg.d_model);
        p.dec_pose = DecoderParams<S>::init(cfg, cfg.pose_dim, Rng::derive(seed, {8}));
        p.dec_face = DecoderParams<S>::init(cfg, cfg.face_dim, Rng::derive(seed, {9}));
        p.disc_w1 = nn::xavier_uniform<S>(cfg.d_att(), cfg.disc_hidden, Rng::derive(seed, {10}));
        p.disc_b1 = MatX<S>::Zero(1, cfg.disc_hidden);
        p.disc_w2 =
            nn::xavier_uniform<S>(cfg.disc_hidden, cfg.disc_hidden, Rng::derive(seed, {11}));
        p.disc_b2 = MatX<S>::Zero(1, cfg.disc_hidden);
        p.disc_w3 =
            nn::xavier_uniform<S>(cfg.disc_hidden, cfg.style_dim(), Rng::derive(seed, {12}));
        p.disc_b3 = MatX<S>::Zero(1, cfg.style_dim());
        return p;
    }

    // (name, group, tensor) triplets; iteration order is the checkpoint order.
    struct Entry {
        std::string name;
        std::string group;
        MatX<S>* tensor;
    };

    std::vector<Entry> registry() {
        std::vector<Entry> out;
        auto add = [&](const std::string& group,
                       std::vector<std::pair<std::string, MatX<S>*>> list) {
            for (auto& [name, t] : list) out.push_back({name, group, t});
        };
        add("content", speech_content.tensors("enc.content.speech"));
        add("content", content_attn.tensors("enc.content.attn"));
        add("style", speech_style.tensors("enc.style.speech"));
        add("style", style_attn.tensors("enc.style.attn"));
        add("style", lstm_pose.tensors("enc.style.lstm_pose"));
        add("style", lstm_face.tensors("enc.style.lstm_face"));
        add("generator", {{"gen.fuse_w", &fuse_w}, {"gen.fuse_b", &fuse_b}});
        add("generator", dec_pose.tensors("gen.dec_pose"));
        add("generator", dec_face.tensors("gen.dec_face"));
        add("discriminator", {{"disc.w1", &disc_w1},
                              {"disc.b1", &disc_b1},
                              {"disc.w2", &disc_w2},
                              {"disc.b2", &disc_b2},
                              {"disc.w3", &disc_w3},
                              {"disc.b3", &disc_b3}});
        return out;
    }

    std::vector<NamedTensor> to_named_tensors() {
        std::vector<NamedTensor> out;
        for (auto& e : registry())
            out.push_back({e.name, e.tensor->template cast<double>(), true});
        return out;
    }

    void load_named_tensors(const std::vector<NamedTensor>& tensors) {
        std::map<std::string, const NamedTensor*> by_name;
        for (const auto& t : tensors) by_name[t.name] = &t;
        for (auto& e : registry()) {
            auto it = by_name.find(e.name);
            if (it == by_name.end()) throw DataError("checkpoint missing tensor " + e.name);
            const Mat64& v = it->second->value;
            if (v.rows() != e.tensor->rows() || v.cols() != e.tensor->cols())
                throw DataError("checkpoint tensor " + e.name + " has shape " +
                                std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                                ", expected " + std::to_string(e.tensor->rows()) + "x" +
                                std::to_string(e.tensor->cols()));
            *e.tensor = v.cast<S>();
        }
    }
};

// Which parameter groups receive gradients when loaded onto a tape.
struct TrainableGroups {
    bool content = false, style = false, generator = false, discriminator = false;
    static TrainableGroups none() { return {}; }
    static TrainableGroups generator_side() { return {true, true, true, false}; }
    static TrainableGroups all() { return {true, true, true, true}; }
};

template <class S>
struct SpeechVars {
    typename Tape<S>::Var conv_k = -1, conv_b = -1, proj_w = -1, proj_b = -1;
};

template <class S>
struct DecoderVars {
    struct Block {
        typename Tape<S>::Var ln1_g, ln1_b, ln2_g, ln2_b;
        nn::AttentionVars<S> attn;
        typename Tape<S>::Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };
    std::vector<Block> blocks;
    typename Tape<S>::Var out_w = -1, out_b = -1;
};

template <class S>
struct DiscVars {
    typename Tape<S>::Var w1 = -1, b1 = -1, w2 = -1, b2 = -1, w3 = -1, b3 = -1;
};

template <class S>
DiscVars<S> load_disc_vars(Tape<S>& tape, const ModelParams<S>& p, bool trainable) {
    DiscVars<S> v;
    v.w1 = tape.input(p.disc_w1, trainable);
    v.b1 = tape.input(p.disc_b1, trainable);
    v.w2 = tape.input(p.disc_w2, trainable);
    v.b2 = tape.input(p.disc_b2, trainable);
    v.w3 = tape.input(p.disc_w3, trainable);
    v.b3 = tape.input(p.disc_b3, trainable);
    return v;
}

// Tape handles for every model tensor, plus shared constants.
template <class S>
struct ModelVars {
    const ModelConfig* cfg = nullptr;
    SpeechVars<S> speech_content, speech_style;
    nn::AttentionVars<S> content_attn, style_attn;
    nn::LstmVars<S> lstm_pose, lstm_face;
    typename Tape<S>::Var fuse_w = -1, fuse_b = -1;
    DecoderVars<S> dec_pose, dec_face;
    DiscVars<S> disc;
    MatX<S> pe_att;  // positional encoding table at d_att width (empty if disabled)
};

// Loads every tensor in registry() order onto a fresh tape, so node ids
// 0..P-1 line up with the registry; the trainer reads gradients that way.
template <class S>
ModelVars<S> load_model_vars(Tape<S>& tape, const ModelParams<S>& p, TrainableGroups tg) {
    ModelVars<S> v;
    v.cfg = &p.cfg;
    auto speech = [&](const SpeechEncParams<S>& sp, bool t) {
        SpeechVars<S> sv;
        sv.conv_k = tape.input(sp.conv_k, t);
        sv.conv_b = tape.input(sp.conv_b, t);
        sv.proj_w = tape.input(sp.proj_w, t);
        sv.proj_b = tape.input(sp.proj_b, t);
        return sv;
    };
    v.speech_content = speech(p.speech_content, tg.content);
    v.content_attn = nn::load_attention(tape, p.content_attn, tg.content);
    v.speech_style = speech(p.speech_style, tg.style);
    v.style_attn = nn::load_attention(tape, p.style_attn, tg.style);
    v.lstm_pose = nn::load_lstm(tape, p.lstm_pose, tg.style);
    v.lstm_face = nn::load_lstm(tape, p.lstm_face, tg.style);
    v.fuse_w = tape.input(p.fuse_w, tg.generator);
    v.fuse_b = tape.input(p.fuse_b, tg.generator);
    auto decoder = [&](const DecoderParams<S>& d) {
        DecoderVars<S> dv;
        for (const auto& b : d.blocks) {
            typename DecoderVars<S>::Block bv;
            bv.ln1_g = tape.input(b.ln1_g, tg.generator);
            bv.ln1_b = tape.input(b.ln1_b, tg.generator);
            bv.attn = nn::load_attention(tape, b.attn, tg.generator);
            bv.ln2_g = tape.input(b.ln2_g, tg.generator);
            bv.ln2_b = tape.input(b.ln2_b, tg.generator);
            bv.ffn_w1 = tape.input(b.ffn_w1, tg.generator);
            bv.ffn_b1 = tape.input(b.ffn_b1, tg.generator);
            bv.ffn_w2 = tape.input(b.ffn_w2, tg.generator);
            bv.ffn_b2 = tape.input(b.ffn_b2, tg.generator);
            dv.blocks.push_back(bv);
        }
        dv.out_w = tape.input(d.out_w, tg.generator);
        dv.out_b = tape.input(d.out_b, tg.generator);
        return dv;
    };
    v.dec_pose = decoder(p.dec_pose);
    v.dec_face = decoder(p.dec_face);
    v.disc = load_disc_vars(tape, p, tg.discriminator);
    if (p.cfg.positional_encoding)
        v.pe_att = nn::positional_encoding<S>(p.cfg.frames, p.cfg.d_att());
    return v;
}

}  // namespace motionstyle
