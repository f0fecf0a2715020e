#pragma once

#include <array>
#include <cmath>
#include <string>

#include "pcdm/point_cloud.hpp"

namespace pcdm {

/// Inverse transform for a normalized cloud: p_original = p * scale + mean.
struct NormalizationRecord {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    double scale = 1.0;
};

struct NormalizedCloud {
    PointCloud cloud;
    NormalizationRecord record;
};

/// Subtract the centroid and divide by the scalar standard deviation taken
/// over all 3n coordinates, so shapes keep their aspect ratio. Colors pass
/// through untouched.
inline NormalizedCloud normalize(const PointCloud& input) {
    const int n = input.size();
    if (n < 2) throw ContractError("normalize needs at least 2 points, got " +
                                   std::to_string(n));

    NormalizationRecord rec;
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a)
            rec.mean[static_cast<std::size_t>(a)] += input.positions.at(i, a);
    for (auto& m : rec.mean) m /= n;

    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a) {
            const double d = input.positions.at(i, a) - rec.mean[static_cast<std::size_t>(a)];
            sum_sq += d * d;
        }
    rec.scale = std::sqrt(sum_sq / (3.0 * n));
    if (!(rec.scale > 1e-12))
        throw DomainError("normalize: degenerate cloud (all points identical)");

    Tensor positions({n, 3});
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a)
            positions.at(i, a) =
                (input.positions.at(i, a) - rec.mean[static_cast<std::size_t>(a)]) / rec.scale;

    PointCloud out(std::move(positions));
    if (input.has_colors()) out.set_colors(input.colors.clone());
    return {std::move(out), rec};
}

inline PointCloud denormalize(const PointCloud& input, const NormalizationRecord& rec) {
    Tensor positions({input.size(), 3});
    for (int i = 0; i < input.size(); ++i)
        for (int a = 0; a < 3; ++a)
            positions.at(i, a) =
                input.positions.at(i, a) * rec.scale + rec.mean[static_cast<std::size_t>(a)];
    PointCloud out(std::move(positions));
    if (input.has_colors()) out.set_colors(input.colors.clone());
    return out;
}

}  // namespace pcdm
