#include "mapprior/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "mapprior/errors.hpp"

namespace mapprior {

namespace {

void check_same_shape(const LayoutGrid& pred, const LayoutGrid& gt) {
    if (pred.channels != gt.channels || pred.height != gt.height || pred.width != gt.width) {
        throw ShapeError("prediction and ground truth shapes differ");
    }
}

double iou_on_channel(const LayoutGrid& pred, const LayoutGrid& gt, int ch,
                      const IouOptions& opts) {
    long inter = 0, uni = 0;
    const std::size_t plane = static_cast<std::size_t>(pred.height) * pred.width;
    const uint8_t* p = pred.data.data() + ch * plane;
    const uint8_t* g = gt.data.data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) {
        inter += (p[i] & g[i]);
        uni += (p[i] | g[i]);
    }
    if (uni == 0) return opts.empty_empty_is_one ? 1.0 : 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double iou(const LayoutGrid& pred, const LayoutGrid& gt, const std::string& cls,
           const IouOptions& opts) {
    check_same_shape(pred, gt);
    return iou_on_channel(pred, gt, pred.channel_index(cls), opts);
}

double mean_iou(const LayoutGrid& pred, const LayoutGrid& gt, const IouOptions& opts) {
    check_same_shape(pred, gt);
    double sum = 0.0;
    for (int ch = 0; ch < pred.num_channels(); ++ch) sum += iou_on_channel(pred, gt, ch, opts);
    return sum / pred.num_channels();
}

std::vector<double> default_threshold_grid() {
    std::vector<double> t;
    for (int i = 1; i <= 19; ++i) t.push_back(i * 0.05);
    return t;
}

ThresholdResult best_threshold_iou(const SoftLayout& pred, const LayoutGrid& gt,
                                   const std::string& cls, const std::vector<double>& thresholds,
                                   const IouOptions& opts) {
    if (thresholds.empty()) throw ConfigError("threshold sweep needs at least one candidate");
    if (pred.channels != gt.channels || pred.height != gt.height || pred.width != gt.width) {
        throw ShapeError("prediction and ground truth shapes differ");
    }
    const int ch = pred.channel_index(cls);
    const std::size_t plane = static_cast<std::size_t>(pred.height) * pred.width;
    const float* p = pred.data.data() + ch * plane;
    const uint8_t* g = gt.data.data() + ch * plane;

    ThresholdResult best{thresholds.front(), -1.0};
    for (const double t : thresholds) {
        long inter = 0, uni = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            const bool on = p[i] >= t;
            inter += (on && g[i]);
            uni += (on || g[i]);
        }
        const double score =
            uni == 0 ? (opts.empty_empty_is_one ? 1.0 : 0.0) : static_cast<double>(inter) / uni;
        if (score > best.iou) best = {t, score};  // strict: ties keep the earlier (smaller) t
    }
    return best;
}

std::vector<double> mmd_embed(const LayoutGrid& g, const MmdConfig& cfg) {
    if (cfg.pool < 1) throw ConfigError("pool size must be positive");
    const int P = cfg.pool;
    std::vector<double> out(static_cast<std::size_t>(g.num_channels()) * P * P, 0.0);
    for (int ch = 0; ch < g.num_channels(); ++ch) {
        for (int i = 0; i < P; ++i) {
            const int r0 = static_cast<int>(std::floor(static_cast<double>(i) * g.height / P));
            const int r1 = static_cast<int>(std::ceil(static_cast<double>(i + 1) * g.height / P));
            for (int j = 0; j < P; ++j) {
                const int c0 = static_cast<int>(std::floor(static_cast<double>(j) * g.width / P));
                const int c1 = static_cast<int>(std::ceil(static_cast<double>(j + 1) * g.width / P));
                double sum = 0.0;
                for (int r = r0; r < r1; ++r)
                    for (int c = c0; c < c1; ++c) sum += g.at(ch, r, c);
                out[(static_cast<std::size_t>(ch) * P + i) * P + j] =
                    sum / (static_cast<double>(r1 - r0) * (c1 - c0));
            }
        }
    }
    double mx = 0.0;
    for (const double v : out) mx = std::max(mx, std::abs(v));
    if (mx > 0.0) {
        for (double& v : out) v /= mx;
    }
    return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

double mmd(const std::vector<LayoutGrid>& set_a, const std::vector<LayoutGrid>& set_b,
           const MmdConfig& cfg) {
    if (set_a.empty() || set_b.empty()) throw DataError("realism metric needs non-empty sets");

    std::vector<std::vector<double>> ea, eb;
    ea.reserve(set_a.size());
    eb.reserve(set_b.size());
    for (const auto& g : set_a) ea.push_back(mmd_embed(g, cfg));
    for (const auto& g : set_b) eb.push_back(mmd_embed(g, cfg));
    for (const auto& e : eb) {
        if (e.size() != ea.front().size()) throw ShapeError("embeddings have mixed sizes");
    }

    // Canonical argument order makes the result bit-exactly symmetric: the
    // cross sum below iterates the first set in the outer loop.
    const std::vector<std::vector<double>>* A = &ea;
    const std::vector<std::vector<double>>* B = &eb;
    if (std::lexicographical_compare(eb.begin(), eb.end(), ea.begin(), ea.end())) std::swap(A, B);

    // median-heuristic bandwidth over all pairs in the pooled set
    std::vector<double> dists;
    const auto pooled_size = A->size() + B->size();
    dists.reserve(pooled_size * (pooled_size - 1) / 2);
    auto at = [&](std::size_t i) -> const std::vector<double>& {
        return i < A->size() ? (*A)[i] : (*B)[i - A->size()];
    };
    for (std::size_t i = 0; i < pooled_size; ++i)
        for (std::size_t j = i + 1; j < pooled_size; ++j)
            dists.push_back(std::sqrt(sq_dist(at(i), at(j))));
    double gamma = 1.0;
    if (!dists.empty()) {
        std::sort(dists.begin(), dists.end());
        const std::size_t n = dists.size();
        gamma = n % 2 ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
        if (gamma <= 0.0) gamma = 1.0;
    }
    const double denom = 2.0 * gamma * gamma;
    auto kernel = [&](const std::vector<double>& x, const std::vector<double>& y) {
        return std::exp(-sq_dist(x, y) / denom);
    };

    const double n = static_cast<double>(A->size());
    const double m = static_cast<double>(B->size());
    double kaa = 0.0, kbb = 0.0, kab = 0.0;
    for (const auto& x : *A)
        for (const auto& y : *A) kaa += kernel(x, y);
    for (const auto& x : *B)
        for (const auto& y : *B) kbb += kernel(x, y);
    for (const auto& x : *A)
        for (const auto& y : *B) kab += kernel(x, y);
    return kaa / (n * n) + kbb / (m * m) - 2.0 * kab / (n * m);
}

EceResult ece(const std::vector<SoftLayout>& confidence, const std::vector<LayoutGrid>& gt,
              EceVariant variant, const EceOptions& opts) {
    if (opts.num_bins < 1) throw ConfigError("calibration needs at least one bin");
    if (confidence.size() != gt.size() || confidence.empty()) {
        throw DataError("calibration needs paired non-empty prediction/label sets");
    }
    const int B = opts.num_bins;

    struct Acc {
        long n = 0;
        double conf_sum = 0.0;
        long pos = 0;
    };

    auto run = [&](int only_class) {
        std::vector<Acc> acc(B);
        long total = 0;
        for (std::size_t s = 0; s < confidence.size(); ++s) {
            const SoftLayout& cgrid = confidence[s];
            const LayoutGrid& ggrid = gt[s];
            if (cgrid.channels != ggrid.channels || cgrid.height != ggrid.height ||
                cgrid.width != ggrid.width) {
                throw ShapeError("prediction and ground truth shapes differ");
            }
            for (int ch = 0; ch < cgrid.num_channels(); ++ch) {
                if (only_class >= 0 && ch != only_class) continue;
                const std::size_t plane = static_cast<std::size_t>(cgrid.height) * cgrid.width;
                const float* c = cgrid.data.data() + ch * plane;
                const uint8_t* g = ggrid.data.data() + ch * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double conf = c[i];
                    int b = static_cast<int>(conf * B);
                    b = std::clamp(b, 0, B - 1);
                    acc[b].n += 1;
                    acc[b].conf_sum += conf;
                    acc[b].pos += (g[i] == 1);
                    ++total;
                }
            }
        }
        EceResult out;
        out.bins.resize(B);
        double l1 = 0.0, l2 = 0.0;
        for (int b = 0; b < B; ++b) {
            out.bins[b].count = acc[b].n;
            if (acc[b].n > 0) {
                out.bins[b].accuracy = static_cast<double>(acc[b].pos) / acc[b].n;
                out.bins[b].confidence = acc[b].conf_sum / acc[b].n;
                const double w = static_cast<double>(acc[b].n) / total;
                const double d = out.bins[b].accuracy - out.bins[b].confidence;
                l1 += w * std::abs(d);
                l2 += w * d * d;
            }
        }
        out.value = variant == EceVariant::l1_guo ? l1 : std::sqrt(l2);
        return out;
    };

    if (!opts.per_class) return run(-1);

    // per-class: average the per-class scores; bin table comes from the pooled run
    const int C = confidence.front().num_channels();
    double sum = 0.0;
    for (int ch = 0; ch < C; ++ch) sum += run(ch).value;
    EceResult pooled = run(-1);
    pooled.value = sum / C;
    return pooled;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        j["iou"][classes[i]] = per_class_iou[i];
        if (i < chosen_thresholds.size()) j["threshold"][classes[i]] = chosen_thresholds[i];
    }
    j["mean_iou"] = mean_iou;
    j["mmd"] = mmd;
    j["ece_l1"] = ece_l1;
    j["ece_l2"] = ece_l2;
    for (const auto& b : bins) {
        j["bins"].push_back({{"n", b.count}, {"acc", b.accuracy}, {"conf", b.confidence}});
    }
    return j.dump(2);
}

std::string EvalReport::csv_header() const {
    std::ostringstream os;
    for (const auto& c : classes) os << c << ",";
    os << "mean_iou,mmd,ece_l1,ece_l2";
    return os.str();
}

std::string EvalReport::csv_row() const {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    for (const double v : per_class_iou) os << v << ",";
    os << mean_iou << "," << mmd << "," << ece_l1 << "," << ece_l2;
    return os.str();
}

}  // namespace mapprior
