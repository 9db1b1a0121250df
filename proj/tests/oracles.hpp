// Independent re-implementations of scoring rules, written from the formulas
// rather than from src/, so the production code can be checked against them.
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "mapprior/layout.hpp"

namespace oracle {

// IoU via literal set arithmetic.
inline double iou_sets(const mapprior::LayoutGrid& pred, const mapprior::LayoutGrid& gt,
                       const std::string& cls, bool empty_is_one) {
    const int ch = pred.channel_index(cls);
    std::set<long> ps, gs;
    for (int r = 0; r < pred.height; ++r) {
        for (int c = 0; c < pred.width; ++c) {
            const long key = static_cast<long>(r) * pred.width + c;
            if (pred.at(ch, r, c)) ps.insert(key);
            if (gt.at(ch, r, c)) gs.insert(key);
        }
    }
    std::vector<long> inter, uni;
    std::set_intersection(ps.begin(), ps.end(), gs.begin(), gs.end(), std::back_inserter(inter));
    std::set_union(ps.begin(), ps.end(), gs.begin(), gs.end(), std::back_inserter(uni));
    if (uni.empty()) return empty_is_one ? 1.0 : 0.0;
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

inline std::pair<double, double> best_threshold_sweep(const mapprior::SoftLayout& pred,
                                                      const mapprior::LayoutGrid& gt,
                                                      const std::string& cls,
                                                      const std::vector<double>& grid,
                                                      bool empty_is_one) {
    double best_t = grid.front();
    double best = -1.0;
    for (const double t : grid) {
        mapprior::LayoutGrid b = pred.binarize(t);
        const double s = iou_sets(b, gt, cls, empty_is_one);
        if (s > best) {
            best = s;
            best_t = t;
        }
    }
    return {best_t, best};
}

// Embedding + V-statistic recomputed from the printed definitions.
inline std::vector<double> embed(const mapprior::LayoutGrid& g, int P) {
    std::vector<double> v;
    for (int ch = 0; ch < g.num_channels(); ++ch) {
        for (int i = 0; i < P; ++i) {
            for (int j = 0; j < P; ++j) {
                const int r0 = (int)std::floor((double)i * g.height / P);
                const int r1 = (int)std::ceil((double)(i + 1) * g.height / P);
                const int c0 = (int)std::floor((double)j * g.width / P);
                const int c1 = (int)std::ceil((double)(j + 1) * g.width / P);
                double s = 0;
                int n = 0;
                for (int r = r0; r < r1; ++r) {
                    for (int c = c0; c < c1; ++c) {
                        s += g.at(ch, r, c);
                        ++n;
                    }
                }
                v.push_back(s / n);
            }
        }
    }
    double mx = 0;
    for (double x : v) mx = std::max(mx, std::abs(x));
    if (mx > 0)
        for (double& x : v) x /= mx;
    return v;
}

inline double mmd_bruteforce(const std::vector<mapprior::LayoutGrid>& A,
                             const std::vector<mapprior::LayoutGrid>& B, int P) {
    std::vector<std::vector<double>> ea, eb;
    for (const auto& g : A) ea.push_back(embed(g, P));
    for (const auto& g : B) eb.push_back(embed(g, P));

    std::vector<std::vector<double>> pool = ea;
    pool.insert(pool.end(), eb.begin(), eb.end());
    std::vector<double> d;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t j = i + 1; j < pool.size(); ++j) {
            double s = 0;
            for (std::size_t k = 0; k < pool[i].size(); ++k) {
                const double t = pool[i][k] - pool[j][k];
                s += t * t;
            }
            d.push_back(std::sqrt(s));
        }
    }
    double gamma = 1.0;
    if (!d.empty()) {
        std::sort(d.begin(), d.end());
        gamma = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
        if (gamma <= 0) gamma = 1.0;
    }
    auto k = [&](const std::vector<double>& x, const std::vector<double>& y) {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double t = x[i] - y[i];
            s += t * t;
        }
        return std::exp(-s / (2 * gamma * gamma));
    };
    const double n = ea.size(), m = eb.size();
    double t1 = 0, t2 = 0, t3 = 0;
    for (const auto& a : ea)
        for (const auto& a2 : ea) t1 += k(a, a2);
    for (const auto& b : eb)
        for (const auto& b2 : eb) t2 += k(b, b2);
    for (const auto& a : ea)
        for (const auto& b : eb) t3 += k(a, b);
    return t1 / (n * n) + t2 / (m * m) - 2 * t3 / (n * m);
}

}  // namespace oracle
