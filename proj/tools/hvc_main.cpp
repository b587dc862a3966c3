#include <cstdio>

#include <CLI11.hpp>

#include "hvc/cli.hpp"
#include "hvc/error.hpp"

namespace {

// Shared --config / --seed / --set handling.
struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    long seed = -1;
    std::string head;
    bool quiet = false;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "configuration file (key = value lines)");
        app->add_option("--set", overrides, "override a config key, e.g. --set d_max=4")
            ->take_all();
        app->add_option("--seed", seed, "RNG seed override");
        app->add_option("--head", head, "head selection: analytic | learned");
        app->add_flag("--quiet", quiet, "suppress progress output");
    }

    hvc::Config resolve() const {
        hvc::Config cfg;
        if (!config_path.empty()) cfg = hvc::Config::load(config_path);
        for (const auto& kv : overrides) cfg.apply_override(kv);
        if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
        if (!head.empty()) cfg.apply_override("head=" + head);
        return cfg;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"planar object tracker: homography, visibility, confidence"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "generate a synthetic training/evaluation dataset");
    CommonOpts gen_common;
    std::string gen_corpus, gen_out;
    gen->add_option("--corpus", gen_corpus,
                    "image directory or synthetic:<count> for procedural textures")
        ->required();
    gen->add_option("--out", gen_out, "output dataset directory")->required();
    gen_common.attach(gen);

    // train
    auto* train = app.add_subcommand("train", "train motion + refinement, then confidence");
    CommonOpts train_common;
    std::string train_dataset, train_out;
    train->add_option("--dataset", train_dataset, "dataset directory from 'generate'")->required();
    train->add_option("--out", train_out, "output weight file")->required();
    train_common.attach(train);

    // track
    auto* track = app.add_subcommand("track", "track a quad across numbered frames");
    CommonOpts track_common;
    std::string track_frames, track_quad, track_weights, track_results, track_vis;
    track->add_option("--frames", track_frames, "directory of numbered .png/.pgm frames")
        ->required();
    track->add_option("--quad", track_quad, "initial quad: x1 y1 x2 y2 x3 y3 x4 y4")->required();
    track->add_option("--weights", track_weights, "weight file (required for --head learned)");
    track->add_option("--results", track_results, "output results file")->required();
    track->add_option("--vis-dir", track_vis, "output directory for visibility PNGs");
    track_common.attach(track);

    // eval
    auto* eval = app.add_subcommand("eval", "compute AE/HD metrics and curves");
    CommonOpts eval_common;
    std::string eval_results, eval_ann, eval_out;
    eval->add_option("--results", eval_results, "results file from 'track'")->required();
    eval->add_option("--annotations", eval_ann, "ground-truth annotation file")->required();
    eval->add_option("--out", eval_out, "output directory for CSVs")->required();
    eval_common.attach(eval);

    // composite
    auto* comp = app.add_subcommand("composite", "paste an overlay into tracked frames");
    CommonOpts comp_common;
    std::string comp_frames, comp_results, comp_overlay, comp_out, comp_quad, comp_vis;
    comp->add_option("--frames", comp_frames, "directory of frames")->required();
    comp->add_option("--results", comp_results, "results file from 'track'")->required();
    comp->add_option("--overlay", comp_overlay, "overlay image (resized to the template)")
        ->required();
    comp->add_option("--out", comp_out, "output directory")->required();
    comp->add_option("--quad", comp_quad, "reference quad used at track time")->required();
    comp->add_option("--vis-dir", comp_vis, "visibility PNG directory (defaults next to results)");
    comp_common.attach(comp);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            hvc::GenerateArgs a{gen_corpus, gen_out, gen_common.resolve(), gen_common.quiet};
            return hvc::cmd_generate(a);
        }
        if (train->parsed()) {
            hvc::TrainArgs a{train_dataset, train_out, train_common.resolve(), train_common.quiet};
            return hvc::cmd_train(a);
        }
        if (track->parsed()) {
            hvc::TrackArgs a;
            a.frames_dir = track_frames;
            a.init_quad = hvc::parse_quad_arg(track_quad);
            a.weights = track_weights;
            a.results_path = track_results;
            a.vis_dir = track_vis;
            a.cfg = track_common.resolve();
            a.quiet = track_common.quiet;
            return hvc::cmd_track(a);
        }
        if (eval->parsed()) {
            hvc::EvalArgs a{eval_results, eval_ann, eval_out, eval_common.resolve(),
                            eval_common.quiet};
            return hvc::cmd_eval(a);
        }
        if (comp->parsed()) {
            hvc::CompositeArgs a;
            a.frames_dir = comp_frames;
            a.results_path = comp_results;
            a.overlay_path = comp_overlay;
            a.out_dir = comp_out;
            a.vis_dir = comp_vis;
            a.ref_quad = hvc::parse_quad_arg(comp_quad);
            a.cfg = comp_common.resolve();
            a.quiet = comp_common.quiet;
            return hvc::cmd_composite(a);
        }
    } catch (const hvc::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
