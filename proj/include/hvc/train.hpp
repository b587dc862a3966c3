#pragma once

#include <functional>
#include <memory>

#include "hvc/config.hpp"
#include "hvc/synthbench.hpp"

namespace hvc {

// The learned pieces of the tracker plus the trained confidence head.
struct ModelBundle {
    std::shared_ptr<FeatureNet> features;
    std::shared_ptr<HeadNet> head;
    std::shared_ptr<RefineNet> refine;
    ConfidenceHead confidence;
    bool has_motion = false;
    bool has_confidence = false;
};

ModelBundle make_bundle(const Config& cfg);

void save_model(const std::string& path, const ModelBundle& bundle);
ModelBundle load_model(const std::string& path, const Config& cfg);

// Wires a TrackerModel from config + bundle (analytic pipelines need no bundle).
TrackerModel make_tracker_model(const Config& cfg, const ModelBundle* bundle);
TrackerConfig make_tracker_config(const Config& cfg);
GeneratorConfig make_generator_config(const Config& cfg);

// ---------------------------------------------------------------------------
// Joint training of the feature network and the cost-volume head with the
// homography, visibility, and alignment losses summed over pyramid levels.
// The pyramid is run sequentially per sample with the incoming homography
// treated as a constant at each level.

struct EpochStats {
    double loss_d = 0.0, loss_m = 0.0, loss_v = 0.0;
    int samples = 0;
};

using ProgressFn = std::function<void(const std::string&)>;

void train_motion(FeatureNet& features, HeadNet& head,
                  const std::vector<const TrainingSample*>& train_set, const Config& cfg,
                  const LossWeights& weights, const ProgressFn& progress = nullptr);

// Refinement head training on small-residual pairs: homography + visibility
// losses at full resolution, alignment loss omitted.
void train_refine(RefineNet& refine, const std::vector<const TrainingSample*>& train_set,
                  const Config& cfg, const LossWeights& weights,
                  const ProgressFn& progress = nullptr);

// Runs the model over labeled samples and trains the confidence head from the
// resulting (statistics, L_d <= 5) pairs.
ConfidenceHead train_confidence_from_samples(const std::vector<const TrainingSample*>& samples,
                                             const TrackerModel& model, const TrackerConfig& tc,
                                             const Config& cfg, const ProgressFn& progress = nullptr);

// Per-sample loss evaluation used in tests and validation monitoring.
struct SampleLosses {
    double l_d = 0.0, l_m = 0.0, l_v = 0.0;
};
SampleLosses motion_losses(const FeatureNet& features, const HeadNet& head,
                           const TrainingSample& s, const Config& cfg);

} // namespace hvc
