#pragma once

#include <limits>
#include <vector>

#include "hvc/features.hpp"

namespace hvc {

// Per-pixel correlations over the (2*d_max+1)^2 displacement window,
// channel index (dy+d)*(2d+1)+(dx+d). Out-of-bounds displacements carry the
// -inf sentinel and are excluded from softmax and statistics.
struct CostVolume {
    int width = 0, height = 0, d_max = 0;
    std::vector<double> values; // [y][x][channel]

    static constexpr double kInvalid = -std::numeric_limits<double>::infinity();

    int channel_count() const { return (2 * d_max + 1) * (2 * d_max + 1); }
    int channel_of(int dx, int dy) const { return (dy + d_max) * (2 * d_max + 1) + (dx + d_max); }
    const double* px(int x, int y) const {
        return values.data() + (static_cast<size_t>(y) * width + x) * channel_count();
    }
    double* px(int x, int y) {
        return values.data() + (static_cast<size_t>(y) * width + x) * channel_count();
    }
};

CostVolume build_cost_volume(const FeatureMap& f_r, const FeatureMap& f_t, int d_max);

// Per-pixel displacement decoded from the cost volume plus the confidence
// cues used by the analytic estimator.
struct DisplacementField {
    int width = 0, height = 0;
    std::vector<float> dx, dy;          // softmax expectation of the offset
    std::vector<float> peak_score;      // max valid correlation
    std::vector<float> peak_ratio;      // distinctiveness of the best peak
    std::vector<uint8_t> has_valid;     // any finite channel at this pixel

    size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
};

// displacement = sum softmax(c/temperature) * offset over valid channels.
// peak_ratio compares the best peak against the best non-adjacent runner-up;
// correlations are shifted by +1 so the ratio stays positive for
// anti-correlated runners-up (1 == featureless, larger == more distinct).
DisplacementField soft_argmax_decode(const CostVolume& cv, double temperature);

// Five numbers per level: mean peak score, max peak score, mean softmax
// entropy, mean peak ratio, fraction of pixels with entropy above the
// threshold. Levels are concatenated in the given order.
struct StatisticsConfig {
    double temperature = 0.1;
    double entropy_threshold_scale = 0.5; // threshold = scale * ln(channel count)
};

constexpr int kStatsPerLevel = 5;

std::vector<double> cost_volume_statistics(const std::vector<CostVolume>& levels,
                                           const StatisticsConfig& cfg = {});

// Backward of build_cost_volume with respect to both feature maps;
// g_cv carries d(loss)/d(correlation) with zeros at invalid channels.
void cost_volume_backward(const FeatureMap& f_r, const FeatureMap& f_t, const CostVolume& cv,
                          const std::vector<double>& g_cv, Tensor& g_fr, Tensor& g_ft);

// Finite copy of the cost volume for network input: -inf sentinels become 0.
Tensor cost_volume_to_tensor(const CostVolume& cv);

} // namespace hvc
