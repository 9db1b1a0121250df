#include "mapprior/tensor_bridge.hpp"

#include "mapprior/errors.hpp"

namespace mapprior {

void fix_determinism(uint64_t torch_seed) {
    torch::set_num_threads(1);
    try {
        at::set_num_interop_threads(1);
    } catch (const c10::Error&) {
        // already initialized; thread count is whatever the first call fixed
    }
    torch::manual_seed(torch_seed);
}

torch::Tensor to_tensor(const LayoutGrid& g) {
    torch::Tensor t = torch::empty({g.num_channels(), g.height, g.width}, torch::kFloat32);
    float* out = t.data_ptr<float>();
    for (std::size_t i = 0; i < g.data.size(); ++i) out[i] = static_cast<float>(g.data[i]);
    return t;
}

torch::Tensor to_tensor(const SoftLayout& g) {
    torch::Tensor t = torch::from_blob(const_cast<float*>(g.data.data()),
                                       {g.num_channels(), g.height, g.width}, torch::kFloat32);
    return t.clone();
}

torch::Tensor to_tensor(const PseudoSensor& x) {
    torch::Tensor t = torch::from_blob(const_cast<float*>(x.data.data()),
                                       {x.feature_channels, x.height, x.width}, torch::kFloat32);
    return t.clone();
}

torch::Tensor stack_batch(const std::vector<torch::Tensor>& items) {
    if (items.empty()) throw DataError("empty batch");
    return torch::stack(items, 0);
}

SoftLayout to_soft_layout(const torch::Tensor& t, const std::vector<std::string>& channels,
                          double resolution) {
    if (t.dim() != 3) throw ShapeError("expected a [C,H,W] tensor");
    if (t.size(0) != static_cast<int64_t>(channels.size())) {
        throw ShapeError("channel count mismatch in tensor conversion");
    }
    torch::Tensor cpu = t.detach().to(torch::kFloat32).clamp(0.0, 1.0).contiguous();
    SoftLayout s = SoftLayout::zeros(channels, static_cast<int>(t.size(1)),
                                     static_cast<int>(t.size(2)), resolution);
    const float* in = cpu.data_ptr<float>();
    std::copy(in, in + s.data.size(), s.data.begin());
    return s;
}

}  // namespace mapprior
