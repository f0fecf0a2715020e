#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pcdm/point_cloud.hpp"

namespace pcdm {
namespace detail {

inline std::vector<double> pairwise_distances(const PointCloud& a, const PointCloud& b) {
    const int n = a.size();
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double d = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double diff = a.positions.at(i, c) - b.positions.at(j, c);
                d += diff * diff;
            }
            cost[static_cast<std::size_t>(i) * n + j] = std::sqrt(d);
        }
    return cost;
}

/// Exact minimum-cost perfect matching (Hungarian algorithm with potentials,
/// O(n^3)). Returns the total cost.
inline double hungarian_total(const std::vector<double>& cost, int n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur =
                    cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] -
                    u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j)
        total += cost[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1) * n +
                      (j - 1)];
    return total;
}

/// Bertsekas auction with epsilon scaling; within n * eps_final of optimal.
inline double auction_total(const std::vector<double>& cost, int n) {
    double max_abs = 0.0;
    for (double c : cost) max_abs = std::max(max_abs, std::abs(c));
    if (max_abs == 0.0) return 0.0;

    std::vector<double> price(static_cast<std::size_t>(n), 0.0);
    std::vector<int> owner(static_cast<std::size_t>(n), -1);
    std::vector<int> assigned(static_cast<std::size_t>(n), -1);
    const double eps_min = max_abs * 1e-4 / n;
    double eps = std::max(max_abs / 4.0, eps_min);

    for (;;) {
        std::fill(owner.begin(), owner.end(), -1);
        std::fill(assigned.begin(), assigned.end(), -1);
        std::vector<int> pending(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) pending[static_cast<std::size_t>(i)] = i;

        while (!pending.empty()) {
            const int i = pending.back();
            pending.pop_back();
            // Best and runner-up net value of -cost - price.
            int best_j = -1;
            double best = -std::numeric_limits<double>::infinity();
            double second = best;
            for (int j = 0; j < n; ++j) {
                const double value =
                    -cost[static_cast<std::size_t>(i) * n + j] -
                    price[static_cast<std::size_t>(j)];
                if (value > best) {
                    second = best;
                    best = value;
                    best_j = j;
                } else if (value > second) {
                    second = value;
                }
            }
            const double increment =
                (n == 1 ? 0.0 : best - second) + eps;
            price[static_cast<std::size_t>(best_j)] += increment;
            const int previous = owner[static_cast<std::size_t>(best_j)];
            if (previous >= 0) {
                assigned[static_cast<std::size_t>(previous)] = -1;
                pending.push_back(previous);
            }
            owner[static_cast<std::size_t>(best_j)] = i;
            assigned[static_cast<std::size_t>(i)] = best_j;
        }

        if (eps <= eps_min) break;
        eps = std::max(eps / 4.0, eps_min);
    }

    double total = 0.0;
    for (int i = 0; i < n; ++i)
        total += cost[static_cast<std::size_t>(i) * n + assigned[static_cast<std::size_t>(i)]];
    return total;
}

inline void check_emd_pair(const PointCloud& a, const PointCloud& b) {
    if (a.size() != b.size())
        throw ContractError("emd needs equal point counts, got " +
                            std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
}

}  // namespace detail

/// Mean Euclidean matching distance via the exact Hungarian solver.
inline double emd_hungarian(const PointCloud& a, const PointCloud& b) {
    detail::check_emd_pair(a, b);
    const auto cost = detail::pairwise_distances(a, b);
    return detail::hungarian_total(cost, a.size()) / a.size();
}

/// Mean Euclidean matching distance via the auction approximation.
inline double emd_auction(const PointCloud& a, const PointCloud& b) {
    detail::check_emd_pair(a, b);
    const auto cost = detail::pairwise_distances(a, b);
    return detail::auction_total(cost, a.size()) / a.size();
}

/// Earth mover's distance: exact matching up to 256 points, auction above.
/// The x100 presentation scale is applied only when results are printed.
inline double metric_emd(const PointCloud& a, const PointCloud& b) {
    detail::check_emd_pair(a, b);
    return a.size() <= 256 ? emd_hungarian(a, b) : emd_auction(a, b);
}

}  // namespace pcdm
