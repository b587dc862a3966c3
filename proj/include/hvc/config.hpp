#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hvc/error.hpp"

namespace hvc {

// Whole-pipeline configuration, serialized as "key = value" lines.
// Unknown keys are rejected.
struct Config {
    // geometry / pipeline
    int template_size = 120;
    std::vector<int> pyramid_levels = {30, 60, 120};
    int d_max = 4;
    double softmax_temperature = 0.1;
    double entropy_threshold_scale = 0.5;
    int inner_iterations = 1;
    int refine_iterations = 3;
    bool use_refinement = true;
    double refine_trust_region = 3.0;
    double residual_gate = 1.5;
    double peak_ratio_gate = 1.2;
    double confidence_threshold = 0.5;
    std::string head = "analytic"; // analytic | learned

    // losses
    double lambda_d = 1.0;
    double lambda_m = 1.0;
    double lambda_v = 1.0;

    // optimizer
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    int batch = 32;
    double lr_decay_factor = 0.1;
    int lr_decay_epochs = 5;
    int epochs = 5;

    // network topology
    int feat_base_channels = 8;
    int feat_out_channels = 8;
    int head_trunk_channels = 24;
    int refine_c0 = 8;
    int refine_c1 = 16;
    int conf_hidden = 16;
    int conf_epochs = 200;
    double conf_lr = 1e-2;

    // data generation
    int frame_size = 240;
    double perturbation = 32.0;
    bool augment = true;
    double photo_brightness = 0.2;
    double photo_contrast = 0.3;
    double photo_saturation = 0.3;
    double photo_blur_max = 1.5;
    int occluder_count_min = 0;
    int occluder_count_max = 3;
    double occluder_area_min = 0.02;
    double occluder_area_max = 0.20;
    double occluder_target_fraction = -1.0;
    int dataset_pairs = 20000;

    // refine-phase data
    double refine_perturbation = 2.0;
    int refine_pairs_fraction_percent = 50; // refine set size as % of main set

    // misc
    uint64_t seed = 0;
    int workers = 0;

    static Config load(const std::string& path);
    void apply_override(const std::string& key_equals_value); // "key=value"
    std::string serialize() const;
    void save(const std::string& path) const;
};

} // namespace hvc
