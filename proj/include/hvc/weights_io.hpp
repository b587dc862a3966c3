#pragma once

#include <string>
#include <vector>

#include "hvc/nn.hpp"

namespace hvc {

// Binary tensor container:
//   magic "HVCW", format version u32, tensor count u32, then per tensor
//   {name length u16, name bytes, rank u8, dims u32 x rank, f32 payload},
// everything little-endian.
constexpr uint32_t kWeightFormatVersion = 1;

void write_weights(const std::string& path, const std::vector<TensorRef>& refs);

struct LoadedTensor {
    std::string name;
    std::vector<int> dims;
    std::vector<double> values; // widened from the f32 payload
};

std::vector<LoadedTensor> read_weights(const std::string& path);

// Fills refs from the file; every ref must be matched by name with identical
// dims, otherwise WeightTopologyMismatch.
void load_weights_into(const std::string& path, const std::vector<TensorRef>& refs);

} // namespace hvc
