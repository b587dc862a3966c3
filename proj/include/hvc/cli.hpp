#pragma once

#include <string>

#include "hvc/config.hpp"
#include "hvc/geometry.hpp"

namespace hvc {

// Library-level entry points behind the CLI subcommands; all return a process
// exit code and print human-readable progress to stdout.

struct GenerateArgs {
    std::string corpus;  // image directory, or "synthetic:<count>" for procedural textures
    std::string out_dir;
    Config cfg;
    bool quiet = false;
};
int cmd_generate(const GenerateArgs& args);

struct TrainArgs {
    std::string dataset_dir;
    std::string out_weights;
    Config cfg;
    bool quiet = false;
};
int cmd_train(const TrainArgs& args);

struct TrackArgs {
    std::string frames_dir;
    Quad init_quad;
    std::string weights;      // optional
    std::string results_path; // output
    std::string vis_dir;      // output; default <results>_vis
    Config cfg;
    bool quiet = false;
};
int cmd_track(const TrackArgs& args);

struct EvalArgs {
    std::string results_path;
    std::string annotations_path;
    std::string out_dir;
    Config cfg;
    bool quiet = false;
};
int cmd_eval(const EvalArgs& args);

struct CompositeArgs {
    std::string frames_dir;
    std::string results_path;
    std::string overlay_path;
    std::string out_dir;
    std::string vis_dir; // default <results>_vis; empty mask treated all-visible
    Quad ref_quad;
    Config cfg;
    bool quiet = false;
};
int cmd_composite(const CompositeArgs& args);

// Numbered frame files (.png/.pgm) in a directory, sorted by name.
std::vector<std::string> list_frames(const std::string& dir);

Quad parse_quad_arg(const std::string& eight_numbers);

} // namespace hvc
