// motionstyle command-line interface.
//
// Subcommands: synth-data, validate, train, transfer, evaluate,
// export-embeddings, render. Exit codes: 0 success, 1 usage error,
// 2 data/validation error, 3 runtime divergence or unexpected failure.

#include "motionstyle/metrics.hpp"
#include "motionstyle/presets.hpp"
#include "motionstyle/render.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace ms = motionstyle;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int precision = 0;  // 0: unset
    std::string preset = "desk";
};

nlohmann::json load_config_file(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream is(path);
    if (!is) throw ms::DataError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ms::DataError("config parse error in " + path + ": " + e.what());
    }
    return j;
}

ms::ModelConfig resolve_model_config(const CommonOpts& opts, const nlohmann::json& file) {
    ms::ModelConfig c = opts.preset == "reference" ? ms::reference_model_config()
                                               : ms::desk_model_config();
    if (file.contains("model")) {
        nlohmann::json merged = c.to_json();
        merged.update(file.at("model"));
        c = ms::ModelConfig::from_json(merged);
    }
    return c;
}

ms::TrainConfig resolve_train_config(const CommonOpts& opts, const nlohmann::json& file) {
    ms::TrainConfig c = opts.preset == "reference" ? ms::reference_train_config()
                                               : ms::desk_train_config();
    if (file.contains("train")) {
        nlohmann::json merged = c.to_json();
        merged.update(file.at("train"));
        c = ms::TrainConfig::from_json(merged);
    }
    if (opts.seed_set) c.seed = opts.seed;
    if (opts.precision != 0) c.precision_bits = opts.precision;
    return c;
}

ms::SynthConfig resolve_synth_config(const CommonOpts& opts, const nlohmann::json& file) {
    ms::SynthConfig c = ms::desk_synth_config();
    if (opts.preset == "reference") {
        c.mel_bins = 128;
        c.text_dim = 768;
    }
    if (file.contains("synth")) {
        const auto& j = file.at("synth");
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("n_speakers", c.n_speakers);
        get("segments_per_speaker", c.segments_per_speaker);
        get("seed", c.seed);
        get("frames_per_segment", c.frames_per_segment);
        get("mel_bins", c.mel_bins);
        get("text_dim", c.text_dim);
        get("tag_count", c.tag_count);
        get("parallel_content", c.parallel_content);
    }
    if (opts.seed_set) c.seed = opts.seed;
    // a changed speaker count or tag vocabulary invalidates preset factors
    if (!c.factors_override.empty() &&
        (static_cast<int>(c.factors_override.size()) != c.n_speakers ||
         c.factors_override.front().tag_profile.size() != c.tag_count))
        c.factors_override.clear();
    return c;
}

ms::EvalConfig resolve_eval_config(const CommonOpts& opts, const nlohmann::json& file) {
    ms::EvalConfig c;
    if (file.contains("eval")) {
        const auto& j = file.at("eval");
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("classifier_epochs", c.classifier.epochs);
        get("classifier_hidden", c.classifier.hidden);
        get("classifier_batch_size", c.classifier.batch_size);
        get("classifier_lr", c.classifier.lr);
        get("style_pool_segments", c.style_pool_segments);
        get("minkowski_p", c.minkowski_p);
        get("fps", c.fps);
    }
    if (opts.seed_set) c.classifier.seed = opts.seed;
    return c;
}

int checkpoint_precision(const std::string& path) {
    auto raw = ms::Trainer<double>::read_checkpoint_raw(path);
    return raw.first.at("precision").get<int>();
}

// align dataset-determined dims with the corpus manifest
void adopt_manifest_dims(ms::ModelConfig& c, const ms::CorpusManifest& m) {
    c.mel_bins = m.mel_bins;
    c.text_dim = m.text_dim;
    c.pose_dim = m.pose_dim;
    c.face_dim = m.face_dim;
    c.tag_count = m.tag_count();
    c.frames = m.frames_per_segment;
}

// ---- subcommand bodies ----

int run_synth_data(const CommonOpts& opts, const std::string& out_dir,
                   std::optional<int> speakers, std::optional<int> segments) {
    nlohmann::json file = load_config_file(opts.config_path);
    ms::SynthConfig cfg = resolve_synth_config(opts, file);
    if (speakers) cfg.n_speakers = *speakers;
    if (segments) cfg.segments_per_speaker = *segments;
    if (!cfg.factors_override.empty() &&
        static_cast<int>(cfg.factors_override.size()) != cfg.n_speakers)
        cfg.factors_override.clear();
    auto [manifest, sidecar] = ms::generate_synthetic_corpus(cfg, out_dir);
    std::cout << "wrote " << manifest.speakers.size() << " speakers x "
              << cfg.segments_per_speaker << " segments under " << out_dir << "\n";
    return 0;
}

int run_validate(const std::string& corpus_dir) {
    auto [manifest, accessor] = ms::validate_and_load_corpus(corpus_dir);
    std::cout << "corpus ok: " << manifest.speakers.size() << " speakers, "
              << accessor.segment_count() << " segments, frames=" << manifest.frames_per_segment
              << " mel=" << manifest.mel_bins << " text=" << manifest.text_dim
              << " pose=" << manifest.pose_dim << " face=" << manifest.face_dim
              << " tags=" << manifest.tag_count() << "\n";
    if (!manifest.normalization_stats_path.empty()) {
        ms::read_normalization_stats(std::filesystem::path(corpus_dir) /
                                     manifest.normalization_stats_path);
        std::cout << "normalization stats readable\n";
    }
    return 0;
}

template <class S>
int run_train_typed(const CommonOpts& opts, const std::string& corpus_dir,
                    const std::string& out_dir, const std::string& resume_path,
                    const std::vector<std::string>& train_speakers) {
    nlohmann::json file = load_config_file(opts.config_path);
    auto [manifest, accessor] = ms::validate_and_load_corpus(corpus_dir);
    if (!resume_path.empty()) {
        ms::Trainer<S> trainer = ms::Trainer<S>::resume(resume_path, accessor);
        std::filesystem::create_directories(out_dir);
        std::ofstream log(std::filesystem::path(out_dir) / "train_log.jsonl", std::ios::app);
        trainer.run(trainer.train_config().total_iterations, &log, out_dir);
        trainer.save_checkpoint(std::filesystem::path(out_dir) / "checkpoint_final.bin");
        std::cout << "resumed to step " << trainer.step_count() << "\n";
        return 0;
    }
    ms::ModelConfig mcfg = resolve_model_config(opts, file);
    adopt_manifest_dims(mcfg, manifest);
    ms::TrainConfig tcfg = resolve_train_config(opts, file);
    if (!train_speakers.empty()) tcfg.train_speakers = train_speakers;
    ms::Trainer<S> trainer = ms::train_model<S>(accessor, mcfg, tcfg, out_dir, &std::cout);
    std::cout << "trained " << trainer.step_count() << " steps; checkpoint under " << out_dir
              << "\n";
    return 0;
}

int run_train(const CommonOpts& opts, const std::string& corpus_dir, const std::string& out_dir,
              const std::string& resume_path, const std::vector<std::string>& train_speakers) {
    int bits = opts.precision;
    if (bits == 0 && !resume_path.empty()) bits = checkpoint_precision(resume_path);
    if (bits == 0) {
        nlohmann::json file = load_config_file(opts.config_path);
        bits = resolve_train_config(opts, file).precision_bits;
    }
    return bits == 64 ? run_train_typed<double>(opts, corpus_dir, out_dir, resume_path,
                                                train_speakers)
                      : run_train_typed<float>(opts, corpus_dir, out_dir, resume_path,
                                               train_speakers);
}

template <class S>
int run_transfer_typed(const std::string& checkpoint, const std::string& source_path,
                       const std::vector<std::string>& target_paths, const std::string& out_path,
                       const std::string& report_path) {
    ms::LoadedModel<S> model = ms::LoadedModel<S>::load(checkpoint);
    ms::FeatureBundle source = ms::read_segment_record(source_path);
    std::vector<ms::FeatureBundle> targets;
    for (const auto& p : target_paths) targets.push_back(ms::read_segment_record(p));
    ms::MatX<S> style = ms::mean_style_vector(model.params, model.stats, targets);
    ms::FeatureBundle out = ms::transfer_bundle(model.params, model.stats, source, style);
    ms::write_segment_record(out_path, out);
    nlohmann::ordered_json report = {
        {"checkpoint_step", model.step},
        {"target_segments", targets.size()},
        {"pose_shape", {out.pose.rows(), out.pose.cols()}},
        {"face_shape", {out.face.rows(), out.face.cols()}},
        {"output", out_path}};
    if (!report_path.empty()) {
        std::ofstream os(report_path, std::ios::trunc);
        os << report.dump(2) << "\n";
    }
    std::cout << report.dump() << "\n";
    return 0;
}

int run_transfer(const std::string& checkpoint, const std::string& source_path,
                 const std::vector<std::string>& target_paths, const std::string& out_path,
                 const std::string& report_path) {
    return checkpoint_precision(checkpoint) == 64
               ? run_transfer_typed<double>(checkpoint, source_path, target_paths, out_path,
                                            report_path)
               : run_transfer_typed<float>(checkpoint, source_path, target_paths, out_path,
                                           report_path);
}

template <class S>
int run_evaluate_typed(const CommonOpts& opts, const std::string& checkpoint,
                       const std::string& corpus_dir, const std::string& pair,
                       const std::string& out_path) {
    auto colon = pair.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--pair", "expected <source_speaker>:<target_speaker>");
    const std::string source = pair.substr(0, colon), target = pair.substr(colon + 1);
    nlohmann::json file = load_config_file(opts.config_path);
    ms::EvalConfig ecfg = resolve_eval_config(opts, file);
    ms::LoadedModel<S> model = ms::LoadedModel<S>::load(checkpoint);
    auto [manifest, accessor] = ms::validate_and_load_corpus(corpus_dir);
    ms::PairEvaluation ev = ms::evaluate_pair(model, accessor, source, target, ecfg);
    const std::string body = ev.report.to_json().dump(2) + "\n";
    if (out_path.empty() || out_path == "-") {
        std::cout << body;
    } else {
        std::ofstream os(out_path, std::ios::trunc);
        if (!os) throw ms::DataError("cannot write report: " + out_path);
        os << body;
        std::cout << "report written to " << out_path << "\n";
    }
    return 0;
}

int run_evaluate(const CommonOpts& opts, const std::string& checkpoint,
                 const std::string& corpus_dir, const std::string& pair,
                 const std::string& out_path) {
    return checkpoint_precision(checkpoint) == 64
               ? run_evaluate_typed<double>(opts, checkpoint, corpus_dir, pair, out_path)
               : run_evaluate_typed<float>(opts, checkpoint, corpus_dir, pair, out_path);
}

template <class S>
int run_export_typed(const std::string& checkpoint, const std::string& corpus_dir,
                     const std::string& split, const std::string& out_path,
                     const std::string& project) {
    ms::LoadedModel<S> model = ms::LoadedModel<S>::load(checkpoint);
    auto [manifest, accessor] = ms::validate_and_load_corpus(corpus_dir);
    std::vector<ms::Segment> segments;
    for (const auto& [speaker, id] : accessor.split_ids(split))
        segments.push_back(accessor.load_segment(speaker, id));
    std::vector<ms::EmbeddingRow> rows = ms::export_embeddings(model, segments);
    ms::write_embeddings_tsv(out_path, rows);
    std::cout << "wrote " << rows.size() << " embedding rows to " << out_path << "\n";
    if (!project.empty()) {
        ms::Mat64 style(rows.size(), rows.front().style.size());
        ms::Mat64 content(rows.size(), rows.front().content.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            style.row(static_cast<Eigen::Index>(i)) = rows[i].style.transpose();
            content.row(static_cast<Eigen::Index>(i)) = rows[i].content.transpose();
        }
        ms::Mat64 s2 = project == "tsne" ? ms::project_tsne_2d(style) : ms::project_pca_2d(style);
        ms::Mat64 c2 =
            project == "tsne" ? ms::project_tsne_2d(content) : ms::project_pca_2d(content);
        auto write2d = [&](const std::string& path, const ms::Mat64& m) {
            std::ofstream os(path, std::ios::trunc);
            if (!os) throw ms::DataError("cannot write projection: " + path);
            os << "speaker_id\tsegment_id\tx\ty\n";
            char buf[64];
            for (std::size_t i = 0; i < rows.size(); ++i) {
                os << rows[i].speaker_id << "\t" << rows[i].segment_id;
                std::snprintf(buf, sizeof buf, "\t%.17g", m(static_cast<Eigen::Index>(i), 0));
                os << buf;
                std::snprintf(buf, sizeof buf, "\t%.17g\n", m(static_cast<Eigen::Index>(i), 1));
                os << buf;
            }
        };
        std::filesystem::path base(out_path);
        write2d((base.parent_path() / (base.stem().string() + ".style2d.tsv")).string(), s2);
        write2d((base.parent_path() / (base.stem().string() + ".content2d.tsv")).string(), c2);
        std::cout << "wrote 2d projections (" << project << ")\n";
    }
    return 0;
}

int run_export(const std::string& checkpoint, const std::string& corpus_dir,
               const std::string& split, const std::string& out_path,
               const std::string& project) {
    return checkpoint_precision(checkpoint) == 64
               ? run_export_typed<double>(checkpoint, corpus_dir, split, out_path, project)
               : run_export_typed<float>(checkpoint, corpus_dir, split, out_path, project);
}

int run_render(const std::string& input, const std::string& out_dir, int limit) {
    ms::FeatureBundle b = ms::read_segment_record(input);
    int n = ms::render_segment_frames(out_dir, b, limit);
    std::cout << "rendered " << n << " frames to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal gesture style transfer pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    app.add_option("--config", opts.config_path, "JSON config file")->capture_default_str();
    app.add_option("--seed", opts.seed, "global random seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
    app.add_option("--precision", opts.precision, "float precision (32 or 64)")
        ->check(CLI::IsMember({0, 32, 64}));
    app.add_option("--preset", opts.preset, "configuration preset")
        ->check(CLI::IsMember({"desk", "reference"}))
        ->capture_default_str();

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "generate a synthetic corpus");
    std::string synth_out;
    std::optional<int> synth_speakers, synth_segments;
    synth->add_option("--out", synth_out, "corpus output directory")->required();
    synth->add_option("--speakers", synth_speakers, "number of speakers");
    synth->add_option("--segments-per-speaker", synth_segments, "segments per speaker");

    // validate
    auto* validate = app.add_subcommand("validate", "validate a corpus directory");
    std::string validate_dir;
    validate->add_option("--corpus", validate_dir, "corpus root")->required();

    // train
    auto* train = app.add_subcommand("train", "train a model on a corpus");
    std::string train_corpus, train_out, train_resume;
    std::vector<std::string> train_speakers;
    train->add_option("--corpus", train_corpus, "corpus root")->required();
    train->add_option("--out", train_out, "output directory (checkpoints, log)")->required();
    train->add_option("--resume", train_resume, "checkpoint to resume from");
    train->add_option("--train-speakers", train_speakers,
                      "subset of speakers to train on (default: all)");

    // transfer
    auto* transfer = app.add_subcommand("transfer", "apply a target style to a source segment");
    std::string tr_checkpoint, tr_source, tr_out, tr_report;
    std::vector<std::string> tr_targets;
    transfer->add_option("--checkpoint", tr_checkpoint, "trained checkpoint")->required();
    transfer->add_option("--source", tr_source, "source segment record")->required();
    transfer->add_option("--target", tr_targets, "target segment record(s)")->required();
    transfer->add_option("--out", tr_out, "output segment record")->required();
    transfer->add_option("--report", tr_report, "optional JSON report path");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "objective evaluation for a speaker pair");
    std::string ev_checkpoint, ev_corpus, ev_pair, ev_out;
    evaluate->add_option("--checkpoint", ev_checkpoint, "trained checkpoint")->required();
    evaluate->add_option("--corpus", ev_corpus, "corpus root")->required();
    evaluate->add_option("--pair", ev_pair, "<source_speaker>:<target_speaker>")->required();
    evaluate->add_option("--out", ev_out, "MetricReport JSON path ('-' for stdout)");

    // export-embeddings
    auto* exp = app.add_subcommand("export-embeddings", "export style/content embeddings");
    std::string ex_checkpoint, ex_corpus, ex_split = "test", ex_out, ex_project;
    exp->add_option("--checkpoint", ex_checkpoint, "trained checkpoint")->required();
    exp->add_option("--corpus", ex_corpus, "corpus root")->required();
    exp->add_option("--split", ex_split, "which split to embed")
        ->check(CLI::IsMember({"train", "val", "test"}))
        ->capture_default_str();
    exp->add_option("--out", ex_out, "embedding TSV path")->required();
    exp->add_option("--project", ex_project, "also write 2D projections")
        ->check(CLI::IsMember({"pca", "tsne"}));

    // render
    auto* render = app.add_subcommand("render", "emit stick-figure SVG frames");
    std::string rd_input, rd_out;
    int rd_limit = -1;
    render->add_option("--input", rd_input, "segment record to render")->required();
    render->add_option("--out-dir", rd_out, "frame output directory")->required();
    render->add_option("--limit", rd_limit, "max frames to render");

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return run_synth_data(opts, synth_out, synth_speakers, synth_segments);
        if (validate->parsed()) return run_validate(validate_dir);
        if (train->parsed())
            return run_train(opts, train_corpus, train_out, train_resume, train_speakers);
        if (transfer->parsed())
            return run_transfer(tr_checkpoint, tr_source, tr_targets, tr_out, tr_report);
        if (evaluate->parsed())
            return run_evaluate(opts, ev_checkpoint, ev_corpus, ev_pair, ev_out);
        if (exp->parsed()) return run_export(ex_checkpoint, ex_corpus, ex_split, ex_out, ex_project);
        if (render->parsed()) return run_render(rd_input, rd_out, rd_limit);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const ms::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ms::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
}
