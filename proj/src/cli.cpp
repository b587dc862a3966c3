#include "hvc/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hvc/parallel.hpp"
#include "hvc/train.hpp"

namespace hvc {

namespace fs = std::filesystem;

namespace {

void say(bool quiet, const std::string& msg) {
    if (!quiet) std::printf("%s\n", msg.c_str());
}

std::string split_of(int index) {
    // train/val/test = 5:1:1
    const int r = index % 7;
    if (r < 5) return "train";
    return r == 5 ? "val" : "test";
}

std::vector<ImageBuffer> load_corpus(const std::string& corpus, uint64_t seed, bool quiet) {
    std::vector<ImageBuffer> images;
    if (corpus.rfind("synthetic:", 0) == 0) {
        const int count = std::stoi(corpus.substr(10));
        if (count < 2) throw ParseError("synthetic corpus needs at least 2 textures");
        images.resize(count);
        parallel_for(0, count, [&](int i) {
            images[i] = make_texture(Rng::derive(seed, 9000 + i).next_u64(), 256);
        });
        say(quiet, "generated " + std::to_string(count) + " procedural textures");
        return images;
    }
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(corpus)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".pgm") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.size() < 2) throw IoError("corpus " + corpus + " needs at least 2 images");
    images.reserve(files.size());
    for (const auto& f : files) images.push_back(read_image(f));
    say(quiet, "loaded " + std::to_string(images.size()) + " corpus images");
    return images;
}

} // namespace

std::vector<std::string> list_frames(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".pgm") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

Quad parse_quad_arg(const std::string& s) {
    std::string cleaned = s;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream is(cleaned);
    Quad q;
    for (int k = 0; k < 4; ++k)
        if (!(is >> q.corners[k].x >> q.corners[k].y))
            throw ParseError("quad needs 8 numbers: " + s);
    return q;
}

int cmd_generate(const GenerateArgs& args) {
    const Config& cfg = args.cfg;
    const auto corpus = load_corpus(args.corpus, cfg.seed, args.quiet);
    const GeneratorConfig gc = make_generator_config(cfg);
    fs::create_directories(args.out_dir);
    const DatasetPaths ds{args.out_dir};
    if (fs::exists(ds.manifest())) fs::remove(ds.manifest());

    const int n = cfg.dataset_pairs;
    std::vector<TrainingSample> batch;
    const int chunk = 64;
    for (int start = 0; start < n; start += chunk) {
        const int end = std::min(n, start + chunk);
        batch.assign(end - start, {});
        parallel_for(0, end - start, [&](int i) {
            const int idx = start + i;
            const uint64_t sample_seed = Rng::derive(cfg.seed, idx).next_u64();
            const ImageBuffer& src = corpus[idx % corpus.size()];
            const ImageBuffer& occ = corpus[(idx + 1) % corpus.size()];
            batch[i] = generate_pair(src, occ, gc, sample_seed);
            batch[i].source_id = std::to_string(idx % corpus.size());
        }, cfg.workers);
        for (int i = 0; i < end - start; ++i)
            write_sample(ds, start + i, batch[i], split_of(start + i));
        say(args.quiet, "generated " + std::to_string(end) + "/" + std::to_string(n));
    }
    cfg.save(args.out_dir + "/generate_config.txt");
    return 0;
}

int cmd_train(const TrainArgs& args) {
    const Config& cfg = args.cfg;
    const DatasetPaths ds{args.dataset_dir};
    const auto records = read_manifest(ds.manifest());
    if (records.empty()) throw DegenerateDataset("dataset manifest is empty");

    say(args.quiet, "loading dataset (" + std::to_string(records.size()) + " records)");
    std::vector<TrainingSample> samples(records.size());
    parallel_for(0, static_cast<int>(records.size()), [&](int i) {
        samples[i] = load_sample(ds, records[i], cfg.template_size);
    }, cfg.workers);

    std::vector<const TrainingSample*> train_set, val_set;
    for (size_t i = 0; i < records.size(); ++i) {
        if (records[i].split == "train") train_set.push_back(&samples[i]);
        if (records[i].split == "val") val_set.push_back(&samples[i]);
    }
    say(args.quiet, "train " + std::to_string(train_set.size()) + " / val " +
                        std::to_string(val_set.size()));

    ModelBundle bundle = make_bundle(cfg);
    LossWeights lw{cfg.lambda_d, cfg.lambda_m, cfg.lambda_v};
    auto progress = [&](const std::string& m) { say(args.quiet, m); };

    // phase 1: motion estimation (features + cost-volume head), then refinement
    train_motion(*bundle.features, *bundle.head, train_set, cfg, lw, progress);

    say(args.quiet, "building refinement training set");
    GeneratorConfig rgc = make_generator_config(cfg);
    rgc.perturbation = cfg.refine_perturbation;
    rgc.occluder_count_max = std::min(cfg.occluder_count_max, 2);
    const size_t n_refine =
        std::max<size_t>(16, train_set.size() * cfg.refine_pairs_fraction_percent / 100);
    std::vector<TrainingSample> refine_samples(n_refine);
    parallel_for(0, static_cast<int>(n_refine), [&](int i) {
        const auto& base = *train_set[i % train_set.size()];
        const uint64_t seed = Rng::derive(cfg.seed ^ 0xf1f1f1ULL, i).next_u64();
        const auto& occ = train_set[(i + 1) % train_set.size()]->ref_frame;
        refine_samples[i] = generate_pair(base.ref_frame, occ, rgc, seed);
    }, cfg.workers);
    std::vector<const TrainingSample*> refine_set;
    for (const auto& s : refine_samples) refine_set.push_back(&s);
    train_refine(*bundle.refine, refine_set, cfg, lw, progress);
    bundle.has_motion = true;

    // phase 2: confidence, trained after the motion modules on the val split
    Config tcfg = cfg;
    tcfg.head = "learned";
    TrackerModel model = make_tracker_model(tcfg, &bundle);
    const TrackerConfig tc = make_tracker_config(tcfg);
    if (!val_set.empty()) {
        try {
            bundle.confidence = train_confidence_from_samples(val_set, model, tc, cfg, progress);
            bundle.has_confidence = true;
        } catch (const DegenerateDataset& e) {
            say(args.quiet, std::string("confidence phase skipped: ") + e.what());
        }
    }

    save_model(args.out_weights, bundle);
    say(args.quiet, "wrote " + args.out_weights);
    return 0;
}

int cmd_track(const TrackArgs& args) {
    const Config& cfg = args.cfg;
    const auto frames = list_frames(args.frames_dir);
    if (frames.empty()) throw IoError("no frames in " + args.frames_dir);

    ModelBundle bundle;
    bool have_bundle = false;
    if (!args.weights.empty()) {
        bundle = load_model(args.weights, cfg);
        have_bundle = true;
    }
    const TrackerModel model = make_tracker_model(cfg, have_bundle ? &bundle : nullptr);
    const TrackerConfig tc = make_tracker_config(cfg);

    const std::string vis_dir = args.vis_dir.empty() ? args.results_path + "_vis" : args.vis_dir;
    fs::create_directories(vis_dir);

    TrackState state = init_track(read_image(frames[0]), args.init_quad, model, tc);
    std::vector<TrackRecord> records;
    records.push_back({0, Homography::identity(), 1.0, false});
    char name[64];
    write_png(vis_dir + "/vis_000000.png",
              visibility_to_image(VisibilityMask(cfg.template_size, cfg.template_size, 1.0f)));
    for (size_t t = 1; t < frames.size(); ++t) {
        const FrameResult res = track_frame(state, read_image(frames[t]), model, tc);
        records.push_back({static_cast<long>(t), res.h_ref_to_cur, res.confidence, res.lost});
        std::snprintf(name, sizeof(name), "/vis_%06zu.png", t);
        write_png(vis_dir + name, visibility_to_image(res.vis));
        if (!args.quiet && (t % 25 == 0 || t + 1 == frames.size()))
            say(args.quiet, "frame " + std::to_string(t) + " conf " +
                                std::to_string(res.confidence) + (res.lost ? " LOST" : ""));
    }
    write_results(args.results_path, records);
    say(args.quiet, "wrote " + args.results_path);
    return 0;
}

int cmd_eval(const EvalArgs& args) {
    const auto results = read_results(args.results_path);
    const auto ann = read_annotations(args.annotations_path);
    const EvalSeries series = evaluate_results(results, ann);

    fs::create_directories(args.out_dir);
    std::vector<double> thresholds;
    for (int t = 1; t <= 50; ++t) thresholds.push_back(t);

    auto write_curve = [&](const std::string& path, const std::vector<CurvePoint>& curve) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << "threshold,fraction\n";
        char buf[64];
        for (const auto& p : curve) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.threshold, p.fraction);
            out << buf;
        }
    };
    write_curve(args.out_dir + "/precision.csv", precision_curve(series, thresholds));
    write_curve(args.out_dir + "/success.csv", success_curve(series, thresholds));

    double ae_sum = 0, hd_sum = 0;
    std::vector<double> ae_list, hd_list;
    for (size_t i = 0; i < series.ae.size(); ++i) {
        if (!series.ae[i]) continue;
        ae_sum += *series.ae[i];
        hd_sum += *series.hd[i];
        ae_list.push_back(*series.ae[i]);
        hd_list.push_back(*series.hd[i]);
    }
    std::sort(ae_list.begin(), ae_list.end());
    std::sort(hd_list.begin(), hd_list.end());
    const size_t n = ae_list.size();
    std::ofstream out(args.out_dir + "/summary.csv");
    if (!out) throw IoError("cannot write summary.csv");
    char buf[256];
    out << "metric,value\n";
    std::snprintf(buf, sizeof(buf), "frames,%zu\nae_mean,%.17g\nae_median,%.17g\n", n,
                  n ? ae_sum / n : 0.0, n ? ae_list[n / 2] : 0.0);
    out << buf;
    std::snprintf(buf, sizeof(buf), "hd_mean,%.17g\nhd_median,%.17g\nsuccess_rate_at5,%.17g\n",
                  n ? hd_sum / n : 0.0, n ? hd_list[n / 2] : 0.0, success_rate_at5(series));
    out << buf;
    say(args.quiet, "wrote metrics to " + args.out_dir);
    return 0;
}

int cmd_composite(const CompositeArgs& args) {
    const Config& cfg = args.cfg;
    const auto frames = list_frames(args.frames_dir);
    const auto results = read_results(args.results_path);
    ImageBuffer overlay = read_image(args.overlay_path);
    if (overlay.width() != cfg.template_size || overlay.height() != cfg.template_size)
        overlay = resize_bilinear(overlay, cfg.template_size, cfg.template_size);
    const Homography h_in =
        normalization_homography(args.ref_quad, cfg.template_size, cfg.template_size);
    const std::string vis_dir = args.vis_dir.empty() ? args.results_path + "_vis" : args.vis_dir;
    fs::create_directories(args.out_dir);

    char name[64];
    for (const auto& rec : results) {
        if (rec.frame_index < 0 || rec.frame_index >= static_cast<long>(frames.size())) continue;
        ImageBuffer frame = read_image(frames[rec.frame_index]);
        std::snprintf(name, sizeof(name), "/vis_%06ld.png", rec.frame_index);
        VisibilityMask vis(cfg.template_size, cfg.template_size, 1.0f);
        if (fs::exists(vis_dir + name)) vis = visibility_from_image(read_image(vis_dir + name));
        // results store reference->current; composite wants the paper direction
        const ImageBuffer out = composite(frame, overlay, h_in, invert(rec.h), vis);
        std::snprintf(name, sizeof(name), "/frame_%06ld.png", rec.frame_index);
        write_png(args.out_dir + name, out);
    }
    say(args.quiet, "wrote composited frames to " + args.out_dir);
    return 0;
}

} // namespace hvc
