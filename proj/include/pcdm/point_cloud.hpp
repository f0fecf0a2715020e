#pragma once

#include <algorithm>
#include <utility>

#include "pcdm/core/tensor.hpp"

namespace pcdm {

/// N x 3 point positions with optional N x 3 colors in [0,1]. Colors are
/// clamped into range on assignment.
struct PointCloud {
    Tensor positions;  // n x 3
    Tensor colors;     // n x 3, empty when absent

    PointCloud() = default;

    explicit PointCloud(Tensor pos) : positions(std::move(pos)) { check_positions(); }

    PointCloud(Tensor pos, Tensor col) : positions(std::move(pos)) {
        check_positions();
        set_colors(std::move(col));
    }

    int size() const { return positions.empty() ? 0 : positions.rows(); }
    bool has_colors() const { return !colors.empty(); }

    void set_colors(Tensor col) {
        if (col.rows() != size() || col.cols() != 3)
            throw ContractError("colors " + shape_str(col.shape()) + " do not match " +
                                std::to_string(size()) + " points");
        for (std::size_t i = 0; i < col.numel(); ++i)
            col[i] = std::clamp(col[i], 0.0, 1.0);
        colors = std::move(col);
    }

    PointCloud clone() const {
        PointCloud c;
        c.positions = positions.clone();
        if (has_colors()) c.colors = colors.clone();
        return c;
    }

    /// Geometry-only copy (shared position storage).
    PointCloud without_colors() const {
        PointCloud c;
        c.positions = positions;
        return c;
    }

private:
    void check_positions() const {
        if (positions.empty() || positions.cols() != 3 || positions.rows() < 1)
            throw ContractError("positions must be n x 3, got " +
                                shape_str(positions.shape()));
        if (!positions.all_finite())
            throw DomainError("non-finite point positions");
    }
};

}  // namespace pcdm
