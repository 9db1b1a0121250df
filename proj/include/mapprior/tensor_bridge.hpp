#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "mapprior/layout.hpp"

namespace mapprior {

// One-time process setup for reproducible runs: pins thread counts and the
// global torch seed. Data-level randomness does not go through torch.
void fix_determinism(uint64_t torch_seed);

torch::Tensor to_tensor(const LayoutGrid& g);    // float32 [C,H,W]
torch::Tensor to_tensor(const SoftLayout& g);    // float32 [C,H,W]
torch::Tensor to_tensor(const PseudoSensor& x);  // float32 [C,H,W]

torch::Tensor stack_batch(const std::vector<torch::Tensor>& items);  // [B,C,H,W]

// Tensor [C,H,W] -> SoftLayout; values are clamped to [0,1].
SoftLayout to_soft_layout(const torch::Tensor& t, const std::vector<std::string>& channels,
                          double resolution);

}  // namespace mapprior
