#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pcdm/core/tensor.hpp"
#include "pcdm/renderer/camera.hpp"

namespace pcdm {

/// Uniform-grid hash over point positions. Queries expand outward shell by
/// shell; results are ordered by (distance, index) and match a brute-force
/// scan exactly because both use the same squared-distance arithmetic.
class SpatialIndex {
public:
    SpatialIndex(Tensor positions, double cell_size)
        : points_(std::move(positions)), cell_(cell_size) {
        if (points_.empty() || points_.cols() != 3)
            throw ContractError("spatial index needs n x 3 positions, got " +
                                shape_str(points_.shape()));
        if (!(cell_ > 0.0)) throw ContractError("cell size must be positive");
        cells_.reserve(static_cast<std::size_t>(points_.rows()));
        lo_ = cell_of(point(0));
        hi_ = lo_;
        for (int i = 0; i < points_.rows(); ++i) {
            const auto c = cell_of(point(i));
            for (int a = 0; a < 3; ++a) {
                lo_[a] = std::min(lo_[a], c[a]);
                hi_[a] = std::max(hi_[a], c[a]);
            }
            cells_[key(c)].push_back(i);
        }
    }

    int size() const { return points_.rows(); }

    /// Indices of the k nearest points, ordered by (distance, index).
    std::vector<int> knn(const Vec3& p, int k) const {
        if (k < 1 || k > size())
            throw ContractError("knn: k=" + std::to_string(k) + " with " +
                                std::to_string(size()) + " points");
        // Max-heap of the best k (squared distance, index) pairs seen so far.
        std::priority_queue<std::pair<double, int>> best;
        const auto home = cell_of(p);
        const long max_shell = farthest_shell(home);
        for (long s = 0;; ++s) {
            scan_shell(p, home, s, [&](double d2, int idx) {
                const std::pair<double, int> cand{d2, idx};
                if (static_cast<int>(best.size()) < k)
                    best.push(cand);
                else if (cand < best.top()) {
                    best.pop();
                    best.push(cand);
                }
            });
            // Points beyond shell s are strictly farther than s * cell.
            const double reach = static_cast<double>(s) * cell_;
            if (static_cast<int>(best.size()) == k && best.top().first <= reach * reach)
                break;
            if (s >= max_shell) break;
        }
        std::vector<std::pair<double, int>> ordered;
        ordered.reserve(best.size());
        while (!best.empty()) {
            ordered.push_back(best.top());
            best.pop();
        }
        std::sort(ordered.begin(), ordered.end());
        std::vector<int> out;
        out.reserve(ordered.size());
        for (const auto& [d2, idx] : ordered) out.push_back(idx);
        return out;
    }

    /// Whether any point lies within distance r of p.
    bool within(const Vec3& p, double r) const {
        if (!(r >= 0.0)) throw ContractError("radius must be non-negative");
        const auto home = cell_of(p);
        // A point within r can sit at most ceil(r / cell) shells away.
        const long max_shell =
            std::min(farthest_shell(home),
                     static_cast<long>(std::ceil(r / cell_)));
        const double r2 = r * r;
        for (long s = 0; s <= max_shell; ++s) {
            bool found = false;
            scan_shell(p, home, s, [&](double d2, int) { found |= d2 <= r2; });
            if (found) return true;
        }
        return false;
    }

    Vec3 point(int i) const {
        return {points_.at(i, 0), points_.at(i, 1), points_.at(i, 2)};
    }

private:
    using CellCoord = std::array<long, 3>;

    CellCoord cell_of(const Vec3& p) const {
        return {static_cast<long>(std::floor(p[0] / cell_)),
                static_cast<long>(std::floor(p[1] / cell_)),
                static_cast<long>(std::floor(p[2] / cell_))};
    }

    static std::uint64_t key(const CellCoord& c) {
        // 21 bits per axis, offset to keep coordinates non-negative.
        constexpr std::uint64_t off = 1u << 20;
        return ((static_cast<std::uint64_t>(c[0]) + off) << 42) |
               ((static_cast<std::uint64_t>(c[1]) + off) << 21) |
               (static_cast<std::uint64_t>(c[2]) + off);
    }

    long farthest_shell(const CellCoord& home) const {
        long m = 0;
        for (int a = 0; a < 3; ++a)
            m = std::max({m, std::labs(home[a] - lo_[a]), std::labs(hi_[a] - home[a])});
        return m;
    }

    template <typename Fn>
    void visit_cell(const Vec3& p, const CellCoord& c, Fn&& fn) const {
        const auto it = cells_.find(key(c));
        if (it == cells_.end()) return;
        for (int idx : it->second) {
            const double dx = p[0] - points_.at(idx, 0);
            const double dy = p[1] - points_.at(idx, 1);
            const double dz = p[2] - points_.at(idx, 2);
            fn(dx * dx + dy * dy + dz * dz, idx);
        }
    }

    template <typename Fn>
    void scan_shell(const Vec3& p, const CellCoord& home, long s, Fn&& fn) const {
        if (s == 0) {
            visit_cell(p, home, fn);
            return;
        }
        for (long dx = -s; dx <= s; ++dx)
            for (long dy = -s; dy <= s; ++dy)
                for (long dz = -s; dz <= s; ++dz) {
                    if (std::max({std::labs(dx), std::labs(dy), std::labs(dz)}) != s)
                        continue;
                    visit_cell(p, {home[0] + dx, home[1] + dy, home[2] + dz}, fn);
                }
    }

    Tensor points_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
    CellCoord lo_{0, 0, 0};
    CellCoord hi_{0, 0, 0};
};

}  // namespace pcdm
