#pragma once

#include <deque>
#include <memory>
#include <optional>

#include "hvc/estimation.hpp"

namespace hvc {

// Logistic head over the cost-volume statistics vector: affine -> tanh ->
// affine -> sigmoid. Zero weights give exactly 0.5.
struct ConfidenceHead {
    int n_in = 15;
    int n_hidden = 16;
    std::vector<double> w1, b1, w2; // [hidden][in], [hidden], [hidden]
    double b2 = 0.0;
    std::vector<double> in_mean, in_std; // input standardization
    double dropout = 0.5;                // applied to the hidden layer while training

    explicit ConfidenceHead(int n_in_ = 15, int n_hidden_ = 16)
        : n_in(n_in_), n_hidden(n_hidden_),
          w1(static_cast<size_t>(n_hidden_) * n_in_, 0.0), b1(n_hidden_, 0.0),
          w2(n_hidden_, 0.0), in_mean(n_in_, 0.0), in_std(n_in_, 1.0) {}

    std::vector<TensorRef> param_refs();
};

// Probability in [0,1] that the estimate is reliable.
double confidence_score(const std::vector<double>& stats, const ConfidenceHead& head);

struct ConfidenceSample {
    std::vector<double> stats;
    int label; // 1 = reliable (L_d <= 5), 0 = unreliable
};

struct ConfidenceTrainConfig {
    int epochs = 200;
    double lr = 1e-2;
    int batch = 32;
    uint64_t seed = 0;
};

// Trains the head with dropout on the hidden layer; inputs are standardized
// from the dataset. Throws DegenerateDataset when only one class is present.
ConfidenceHead train_confidence(const std::vector<ConfidenceSample>& data,
                                int n_in, const ConfidenceTrainConfig& cfg);

// ---------------------------------------------------------------------------

enum class HeadKind { Analytic, Learned };

// Everything learned or configured that track_frame needs; immutable while
// tracking, shareable across concurrent TrackStates.
struct TrackerModel {
    HeadKind head_kind = HeadKind::Analytic;
    std::shared_ptr<const FeatureNet> feature_net; // null -> FilterBank features
    std::shared_ptr<const HeadNet> head;           // required for Learned
    std::shared_ptr<const RefineNet> refine_net;   // null -> Gauss-Newton refine
    ConfidenceHead confidence;

    Extractor extractor() const {
        return feature_net ? Extractor::conv_net(*feature_net) : Extractor::filter_bank();
    }
};

struct TrackerConfig {
    int template_size = 120;
    std::vector<int> pyramid_levels = {30, 60, 120};
    int d_max = 4;
    double softmax_temperature = 0.1;
    double entropy_threshold_scale = 0.5;
    double confidence_threshold = 0.5;
    int inner_iterations = 1; // increment estimates per level
    int refine_iterations = 3;
    bool use_refinement = true;
    double refine_trust_region = 3.0;
    AnalyticHeadConfig analytic;
    int ring_capacity = 60;
};

struct TrackState {
    Quad ref_quad;
    Homography h_in;  // reference normalization homography (full-size space)
    std::vector<Template> ref_templates;
    std::vector<FeatureMap> ref_features;
    Homography h_jn;  // last confident sampling homography for the current view
    long frame_counter = 0;

    struct BufferEntry {
        long frame_index;
        Homography h_jn;
        double confidence;
    };
    std::deque<BufferEntry> ring; // confident history, capacity ring_capacity
};

struct FrameResult {
    Homography h_ref_to_cur; // maps reference-frame pixels into this frame
    Quad quad;               // reference quad mapped into this frame
    VisibilityMask vis;      // full-resolution level
    double confidence = 0.0;
    int reboot_count = 0;
    bool lost = false;
    std::vector<double> stats; // cost-volume statistics of the reported attempt
};

TrackState init_track(const ImageBuffer& reference_frame, const Quad& quad,
                      const TrackerModel& model, const TrackerConfig& cfg);

FrameResult track_frame(TrackState& state, const ImageBuffer& frame,
                        const TrackerModel& model, const TrackerConfig& cfg);

// Reboot candidates at exponentially spaced ages {2,4,8,16,32,60}, nearest
// available ring entry each, deduplicated, youngest first.
std::vector<TrackState::BufferEntry> reboot_candidates(const TrackState& state);

// One full estimation pass from a given initialization; the building block of
// track_frame and of the pair-mode benchmark driver.
struct EstimationPass {
    Homography h_jn;
    VisibilityMask vis;
    std::vector<double> stats;
    double confidence = 0.0;
    bool degenerate = false; // a level failed (insufficient support)
};

EstimationPass run_estimation(const TrackState& state, const ImageBuffer& frame,
                              const Homography& h_init, const TrackerModel& model,
                              const TrackerConfig& cfg);

} // namespace hvc
