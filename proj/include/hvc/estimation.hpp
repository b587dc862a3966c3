#pragma once

#include "hvc/correlation.hpp"
#include "hvc/features.hpp"
#include "hvc/geometry.hpp"
#include "hvc/warp.hpp"

namespace hvc {

// One homography increment H_ij^s in 4-point form plus the visibility mask
// that came with it. irls_weights is the analytic head's final per-pixel
// weight image (empty for learned heads).
struct IncrementEstimate {
    FourPointDisplacement disp;
    VisibilityMask vis;
    double inlier_rms = 0.0;
    std::vector<float> irls_weights;
};

struct LossWeights {
    double lambda_d = 1.0;
    double lambda_m = 1.0;
    double lambda_v = 1.0;
};

struct AnalyticHeadConfig {
    double residual_gate = 1.5;   // px, visibility residual threshold
    double peak_ratio_gate = 1.2; // visibility distinctiveness threshold
    int irls_iterations = 5;
    double tukey_scale = 4.685;   // c = tukey_scale * MAD, floored below
    double tukey_c_min = 1.0;     // px
    double weight_floor = 0.1;    // support threshold
    int min_support = 12;         // pixels above weight_floor
};

// Robust weighted homography fit of the per-pixel correspondences
// (x, x + disp(x)); weights start at peak_score * vis_prior and are
// re-shaped by Tukey's biweight over irls_iterations rounds.
// Throws InsufficientSupport / DegenerateQuad.
IncrementEstimate estimate_increment_analytic(const DisplacementField& field,
                                              const ValidityMask& vis_prior,
                                              const AnalyticHeadConfig& cfg = {});

// Learned head: regresses the 4 corner displacements and per-pixel
// visibility logits from the cost volume.
IncrementEstimate estimate_increment_learned(const CostVolume& cv, const HeadNet& head);

// Refinement step without a cost volume; intended for residuals of a couple
// of pixels. Mode Analytic runs one Gauss-Newton step on template
// intensities, Learned evaluates the trained RefineNet. Increments above the
// trust region are scaled back onto it.
enum class RefineMode { Analytic, Learned };

struct RefineConfig {
    RefineMode mode = RefineMode::Analytic;
    const RefineNet* net = nullptr; // required for Learned
    double trust_region = 3.0;      // max |d_k| component in template px
};

IncrementEstimate refine(const Template& template_r, const Template& template_t,
                         const RefineConfig& cfg);

// ---------------------------------------------------------------------------
// Losses.

// L_d = (1/4) sum_k |d_k* - d_k|_1.
double loss_homography(const FourPointDisplacement& d_pred, const FourPointDisplacement& d_gt);

// Mean binary cross-entropy; predictions clamped to [eps, 1-eps].
constexpr double kBceEps = 1e-7;
double loss_visibility(const VisibilityMask& m_pred, const VisibilityMask& m_gt);

// Warps feature channels bilinearly; h maps output coords to source coords.
// Returns the warped tensor and per-pixel validity.
struct WarpedFeatures {
    Tensor data;
    ValidityMask valid;
};
WarpedFeatures warp_features(const Tensor& src, const Homography& h, int out_h, int out_w);

// L_v = (1/N) sum_x m*(x) |f_t'(x) - f_t(x)|_1 with f_t' = Warp(f_r, h_tr);
// pixels whose warp leaves the source contribute zero.
double loss_alignment(const FeatureMap& f_r, const FeatureMap& f_t, const Homography& h_tr,
                      const VisibilityMask& m_gt);

double loss_total(double l_d, double l_m, double l_v, const LossWeights& w);

// ---------------------------------------------------------------------------
// Ground-truth visibility.

// Per-pixel AND of geometry-induced visibility (back-projected template pixel
// inside the frame bounds and inside the object quad) and disocclusion-induced
// visibility (outside every occluder polygon), rasterized at the given level.
VisibilityMask gt_visibility(const Quad& quad_gt_in_frame, int frame_w, int frame_h,
                             const std::vector<Polygon>& occluders, const Homography& sampling_h,
                             int level_size, int full_size);

// ---------------------------------------------------------------------------
// Training-path pieces (gradients of the losses above).

// d(L_d)/d(d_pred); L_d as in loss_homography.
FourPointDisplacement loss_homography_grad(const FourPointDisplacement& d_pred,
                                           const FourPointDisplacement& d_gt);

// BCE with logits: returns the loss and fills glogits (same layout as logits).
double bce_with_logits(const Tensor& logits, const VisibilityMask& gt, Tensor* glogits);

// Alignment loss with gradients into both feature maps (h_tr treated as
// constant).
double loss_alignment_grad(const Tensor& f_r, const Tensor& f_t, const Homography& h_tr,
                           const VisibilityMask& m_gt, Tensor& g_fr, Tensor& g_ft);

} // namespace hvc
