#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "msrt/common.hpp"

namespace msrt {

/// Axis-aligned voxel grid. Voxel (i,j,k) occupies the box
/// origin + [i,i+1)x[j,j+1)x[k,k+1) * spacing; its center is at
/// origin + (i+0.5, j+0.5, k+0.5) * spacing.
struct VoxelGrid {
    std::array<int, 3> dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};

    VoxelGrid() = default;
    VoxelGrid(std::array<int, 3> d, Vec3 s, Vec3 o);

    std::int64_t count() const {
        return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    }
    bool contains(int i, int j, int k) const {
        return i >= 0 && i < dims[0] && j >= 0 && j < dims[1] && k >= 0 && k < dims[2];
    }
    std::int64_t flat(int i, int j, int k) const {
        return (static_cast<std::int64_t>(k) * dims[1] + j) * dims[0] + i;
    }
    std::array<int, 3> unflat(std::int64_t id) const;
    Vec3 center(int i, int j, int k) const {
        return {origin[0] + (i + 0.5) * spacing[0],
                origin[1] + (j + 0.5) * spacing[1],
                origin[2] + (k + 0.5) * spacing[2]};
    }
    Vec3 center(std::int64_t id) const;
    /// Lower corner and upper corner of the grid box in mm.
    Vec3 box_lo() const { return origin; }
    Vec3 box_hi() const {
        return {origin[0] + dims[0] * spacing[0],
                origin[1] + dims[1] * spacing[1],
                origin[2] + dims[2] * spacing[2]};
    }
};

/// Sorted list of unique flat voxel ids.
using VoxelSet = std::vector<std::int64_t>;

/// Euclidean dilation: every voxel whose center lies within margin_mm of
/// some member's center, clipped at the grid boundary. margin 0 returns the
/// input set.
VoxelSet dilate(const VoxelSet& set, double margin_mm, const VoxelGrid& grid);

/// dilate(ctv, 50mm) minus the ctv itself.
VoxelSet healthy_zone(const VoxelSet& ctv, const VoxelGrid& grid);

VoxelSet set_difference(const VoxelSet& a, const VoxelSet& b);
VoxelSet set_union(const VoxelSet& a, const VoxelSet& b);
bool sets_disjoint(const VoxelSet& a, const VoxelSet& b);

}  // namespace msrt
