#pragma once

#include <string>
#include <vector>

#include "mapprior/layout.hpp"

namespace mapprior {

struct IouOptions {
    // When both masks are empty the score is undefined; default scores a
    // correctly-empty prediction as perfect.
    bool empty_empty_is_one = true;
};

double iou(const LayoutGrid& pred, const LayoutGrid& gt, const std::string& cls,
           const IouOptions& opts = {});
double mean_iou(const LayoutGrid& pred, const LayoutGrid& gt, const IouOptions& opts = {});

struct ThresholdResult {
    double threshold = 0.0;
    double iou = 0.0;
};

std::vector<double> default_threshold_grid();  // 0.05 .. 0.95 step 0.05

// Exhaustive sweep; binarization is `value >= t`; ties pick the smallest t.
ThresholdResult best_threshold_iou(const SoftLayout& pred, const LayoutGrid& gt,
                                   const std::string& cls,
                                   const std::vector<double>& thresholds = default_threshold_grid(),
                                   const IouOptions& opts = {});

struct MmdConfig {
    int pool = 25;  // per-channel average-pool target (pool x pool)
};

// Embedding used by the realism metric: each channel average-pooled to
// pool x pool, flattened, and scaled so the max entry is 1 (all-zero stays 0).
std::vector<double> mmd_embed(const LayoutGrid& g, const MmdConfig& cfg = {});

// Biased V-statistic with diagonal terms kept:
//   sum k(a,a')/n^2 + sum k(b,b')/m^2 - 2 sum k(a,b)/(nm)
// Gaussian kernel k(x,y) = exp(-|x-y|^2 / (2 g^2)) with g = median pairwise
// distance over the pooled embeddings of A and B (even count: mean of the two
// middle values; all-identical sets fall back to g = 1).
double mmd(const std::vector<LayoutGrid>& set_a, const std::vector<LayoutGrid>& set_b,
           const MmdConfig& cfg = {});

enum class EceVariant { l1_guo, l2_kumar };

struct EceBin {
    long count = 0;
    double accuracy = 0.0;   // fraction of positives among samples in the bin
    double confidence = 0.0; // mean predicted probability in the bin
};

struct EceResult {
    double value = 0.0;
    std::vector<EceBin> bins;
};

struct EceOptions {
    int num_bins = 10;
    bool per_class = false;  // default pools every (cell, class) sample
};

// Samples are (confidence c, label gt) for every cell and class, binned
// uniformly on [0,1]. l1 = sum (n_b/n)|acc-conf|; l2 = sqrt(sum (n_b/n)(acc-conf)^2).
EceResult ece(const std::vector<SoftLayout>& confidence, const std::vector<LayoutGrid>& gt,
              EceVariant variant, const EceOptions& opts = {});

struct EvalReport {
    std::vector<std::string> classes;
    std::vector<double> per_class_iou;
    std::vector<double> chosen_thresholds;
    double mean_iou = 0.0;
    double mmd = 0.0;
    double ece_l1 = 0.0;
    double ece_l2 = 0.0;
    std::vector<EceBin> bins;

    std::string to_json() const;
    std::string csv_header() const;  // per-class IoU columns, mean, MMD, ECEs
    std::string csv_row() const;
};

}  // namespace mapprior
