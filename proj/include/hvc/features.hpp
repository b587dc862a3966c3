#pragma once

#include "hvc/nn.hpp"
#include "hvc/warp.hpp"

namespace hvc {

// Per-pixel feature vectors over a template. When normalized is true every
// nonzero pixel vector has unit L2 norm.
struct FeatureMap {
    Tensor data;
    bool normalized = false;

    int height() const { return data.h; }
    int width() const { return data.w; }
    int channels() const { return data.c; }
};

enum class ExtractorKind {
    Intensity,  // F=1, raw template intensities
    FilterBank, // intensity + x/y gradients + two diagonal derivative filters
    ConvNet,    // learned encoder-decoder
};

struct Extractor {
    ExtractorKind kind = ExtractorKind::FilterBank;
    const FeatureNet* net = nullptr; // required for ConvNet

    static Extractor intensity() { return {ExtractorKind::Intensity, nullptr}; }
    static Extractor filter_bank() { return {ExtractorKind::FilterBank, nullptr}; }
    static Extractor conv_net(const FeatureNet& n) { return {ExtractorKind::ConvNet, &n}; }
};

constexpr int kFilterBankChannels = 5;

// Feature map with the template's spatial size; invalid template pixels
// produce zero feature vectors.
FeatureMap extract(const Template& tmpl, const Extractor& extractor);

// Training-path variant keeping everything needed to backpropagate through
// masking and normalization into the net.
struct ExtractCache {
    FeatureNet::Cache net;
    Tensor raw;     // net output before mask/normalize
    Tensor masked;  // after validity mask
    const Template* tmpl = nullptr;
};

FeatureMap extract_convnet_cached(const Template& tmpl, const FeatureNet& net, ExtractCache& cache);

// Backpropagates d(loss)/d(features) through normalize + mask into the net
// parameters; returns nothing (input image gradients are not needed).
void extract_convnet_backward(const ExtractCache& cache, const FeatureNet& net,
                              const Tensor& gfeatures, FeatureNet& gnet);

// Template image as a 1-channel tensor (invalid pixels are zero-filled).
Tensor template_to_tensor(const Template& tmpl);

} // namespace hvc
