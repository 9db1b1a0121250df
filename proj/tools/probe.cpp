// Temporary experiment driver; not part of the build once tuning is done.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "mapprior/config.hpp"
#include "mapprior/dataset.hpp"
#include "mapprior/metrics.hpp"
#include "mapprior/tensor_bridge.hpp"
#include "mapprior/vq_ops.hpp"
#include "mapprior/vq_train.hpp"

#include "json.hpp"

using namespace mapprior;

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: probe '<json overrides>'\n");
        return 2;
    }
    auto cfg = load_config_text(argv[1]);
    std::printf("preset=%s steps=%d lr=%g warmup=%g disc_ch=%d\n", cfg.preset.c_str(),
                cfg.prior_steps, cfg.lr_prior, cfg.gan_warmup_frac, cfg.disc_channels);
    fix_determinism(cfg.seed);

    auto train = make_dataset(cfg, Split::train, cfg.dataset_train);
    std::vector<LayoutGrid> gts;
    for (auto& ex : train) gts.push_back(ex.gt);
    auto t0 = std::chrono::steady_clock::now();
    auto prior = train_prior(gts, cfg);
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    auto val = make_dataset(cfg, Split::val, cfg.dataset_val);
    double miou = 0.0, miou_train = 0.0;
    for (const auto& ex : val) {
        miou += mean_iou(decode(prior, encode(prior, ex.gt)).binarize(0.5), ex.gt);
    }
    for (int i = 0; i < 40; ++i) {
        miou_train +=
            mean_iou(decode(prior, encode(prior, train[i].gt)).binarize(0.5), train[i].gt);
    }
    // codebook usage on val
    std::vector<int> used(cfg.codebook_size, 0);
    for (const auto& ex : val) {
        for (int32_t t : encode(prior, ex.gt).indices) used[t] = 1;
    }
    int n_used = 0;
    for (int u : used) n_used += u;
    std::printf("train_secs=%.0f recon_miou_val=%.4f recon_miou_train40=%.4f codes_used=%d/%d\n",
                secs, miou / val.size(), miou_train / 40.0, n_used, cfg.codebook_size);
    return 0;
}
