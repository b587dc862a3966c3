#pragma once

#include <optional>
#include <string>

#include "hvc/augment.hpp"
#include "hvc/estimation.hpp"
#include "hvc/tracking.hpp"

namespace hvc {

// ---------------------------------------------------------------------------
// Synthetic pair generation.

struct GeneratorConfig {
    int frame_size = 240;
    int template_size = 120;
    double perturbation = 32.0; // corner displacement range, px
    bool augment = true;
    PhotoRanges photo;
    int occluder_count_min = 0;
    int occluder_count_max = 3;
    double occluder_area_min = 0.02; // fraction of template area per polygon
    double occluder_area_max = 0.20;
    // >= 0: keep adding polygons until their summed area reaches this fraction
    // of the template area (calibration mode); < 0: draw a uniform count.
    double occluder_target_fraction = -1.0;
    int max_retries = 32;
};

struct TrainingSample {
    ImageBuffer ref_frame; // clean gray frame
    ImageBuffer trk_frame; // occluded + augmented gray frame
    Template ref_template;
    Template trk_template; // sampled at the zero-motion initialization
    FourPointDisplacement gt_disp;
    std::array<VisibilityMask, 3> gt_vis; // levels W/4, W/2, W at the init sampling
    Quad window;    // ground-truth object quad in the tracked frame
    Quad perturbed; // initialization quad (where tracking starts)
    Homography h_init;    // perturbed -> template (the tracker's starting H_j^n)
    Homography h_gt;      // window -> template (the aligned sampling homography)
    std::vector<Polygon> occluders;
    PhotoParams photo;
    uint64_t seed = 0;
    std::string source_id;
};

// Deterministic in (source, occluder_texture, cfg, seed).
TrainingSample generate_pair(const ImageBuffer& source, const ImageBuffer& occluder_texture,
                             const GeneratorConfig& cfg, uint64_t seed);

// Multi-scale procedural texture for tests and the synthetic corpus.
ImageBuffer make_texture(uint64_t seed, int size);

// ---------------------------------------------------------------------------
// Synthetic sequences (frames rendered from a moving quad).

struct SyntheticSequence {
    std::vector<ImageBuffer> frames;
    std::vector<Quad> gt_quads;
    Quad init_quad; // quad in frame 0
};

// Renders n_frames of the source plane moving along per-frame quads;
// occlude_from/to (inclusive, -1 disables) paste a full cover over the quad.
SyntheticSequence make_sequence(const ImageBuffer& source, const std::vector<Quad>& quads,
                                int occlude_from = -1, int occlude_to = -1);

// ---------------------------------------------------------------------------
// Metrics.

// RMS (default) or mean distance between corresponding corners.
double metric_ae(const Quad& pred, const Quad& gt, bool rms = true);

// Mean (default) or RMS distance between the two homographies' mappings of
// the reference quad corners.
double metric_hd(const Homography& h_pred, const Homography& h_gt, const Quad& reference_quad,
                 bool mean = true);

struct CurvePoint {
    double threshold;
    double fraction;
};

// Empirical CDF of the per-frame errors at the given thresholds; frames
// without ground truth are excluded from the denominator.
std::vector<CurvePoint> curve_from_errors(const std::vector<std::optional<double>>& errors,
                                          const std::vector<double>& thresholds);

// ---------------------------------------------------------------------------
// Sequence annotation + tracker result files.

struct SequenceAnnotation {
    std::vector<std::optional<Quad>> frames; // index == frame index

    std::optional<Quad> first_valid() const {
        for (const auto& q : frames)
            if (q) return q;
        return std::nullopt;
    }
};

SequenceAnnotation read_annotations(const std::string& path);
void write_annotations(const std::string& path, const SequenceAnnotation& ann);

struct TrackRecord {
    long frame_index = 0;
    Homography h; // reference frame -> this frame
    double confidence = 1.0;
    bool lost = false;
};

std::vector<TrackRecord> read_results(const std::string& path);
void write_results(const std::string& path, const std::vector<TrackRecord>& records);

// Per-frame AE/HD of results against annotations; the reference quad is the
// first annotated quad. Throws LengthMismatch when a result's frame index has
// no annotation slot.
struct EvalSeries {
    std::vector<std::optional<double>> ae;
    std::vector<std::optional<double>> hd;
    Quad reference_quad;
};

EvalSeries evaluate_results(const std::vector<TrackRecord>& results,
                            const SequenceAnnotation& ann, bool ae_rms = true,
                            bool hd_mean = true);

std::vector<CurvePoint> precision_curve(const EvalSeries& s, const std::vector<double>& thresholds);
std::vector<CurvePoint> success_curve(const EvalSeries& s, const std::vector<double>& thresholds);
double success_rate_at5(const EvalSeries& s);

// ---------------------------------------------------------------------------
// Dataset archives: PNG images + JSON-lines manifest with full provenance.

struct DatasetPaths {
    std::string root;
    std::string manifest() const { return root + "/manifest.jsonl"; }
};

void write_sample(const DatasetPaths& ds, int index, const TrainingSample& s,
                  const std::string& split);

struct SampleRecord {
    int index = 0;
    std::string split;
    uint64_t seed = 0;
    std::string source_id;
    FourPointDisplacement gt_disp;
    Quad window, perturbed;
    std::vector<Polygon> occluders;
    PhotoParams photo;
    std::string ref_frame_png, trk_frame_png;
};

std::vector<SampleRecord> read_manifest(const std::string& manifest_path);

// Rebuilds the in-memory sample from an archived record (images reloaded from
// disk, masks re-rasterized from the stored geometry).
TrainingSample load_sample(const DatasetPaths& ds, const SampleRecord& rec, int template_size);

// ---------------------------------------------------------------------------
// Pair-mode tracking: runs the estimation pipeline on one generated pair.

struct PairEvaluation {
    double ae = 0.0;        // corner error against the ground-truth window, px
    double l_d = 0.0;       // 4-point L1 loss against gt_disp
    double confidence = 0.0;
    std::vector<double> stats;
    FourPointDisplacement pred_disp;
    VisibilityMask vis;
    bool degenerate = false;
};

PairEvaluation evaluate_pair(const TrainingSample& sample, const TrackerModel& model,
                             const TrackerConfig& cfg);

} // namespace hvc
