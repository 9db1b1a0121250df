#pragma once

#include <torch/torch.h>

#include <map>
#include <string>

namespace mapprior {

// Bit-exact checkpoint container. Stores every named parameter and buffer as
// raw little-endian bytes plus a string metadata map (preset, config hash,
// step counters, ...). Round-trips exactly: save -> load -> save produces an
// identical file.
void save_checkpoint(const std::string& path, const torch::nn::Module& module,
                     const std::map<std::string, std::string>& meta);

// Copies stored tensors into the module by name; every stored tensor must
// exist with a matching shape and dtype, and vice versa. Returns the metadata.
std::map<std::string, std::string> load_checkpoint(const std::string& path,
                                                   torch::nn::Module& module);

// Reads only the metadata map.
std::map<std::string, std::string> read_checkpoint_meta(const std::string& path);

// Standalone codebook export: little-endian {u32 K, u32 D} then K*D float32.
void export_codebook(const std::string& path, const torch::Tensor& codebook);

}  // namespace mapprior
