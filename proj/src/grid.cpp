#include "msrt/grid.hpp"

#include <algorithm>
#include <cmath>

namespace msrt {

VoxelGrid::VoxelGrid(std::array<int, 3> d, Vec3 s, Vec3 o) : dims(d), spacing(s), origin(o) {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) throw InvalidArgument("VoxelGrid: dims must be >= 1");
        if (!(spacing[a] > 0.0)) throw InvalidArgument("VoxelGrid: spacing must be > 0");
    }
}

std::array<int, 3> VoxelGrid::unflat(std::int64_t id) const {
    const int i = static_cast<int>(id % dims[0]);
    const std::int64_t rest = id / dims[0];
    const int j = static_cast<int>(rest % dims[1]);
    const int k = static_cast<int>(rest / dims[1]);
    return {i, j, k};
}

Vec3 VoxelGrid::center(std::int64_t id) const {
    const auto ijk = unflat(id);
    return center(ijk[0], ijk[1], ijk[2]);
}

VoxelSet dilate(const VoxelSet& set, double margin_mm, const VoxelGrid& grid) {
    if (margin_mm < 0.0) throw InvalidArgument("dilate: margin must be >= 0");
    if (margin_mm == 0.0 || set.empty()) return set;

    // Scan the bounding box of reachable voxels around each member; a mask
    // over the grid deduplicates.
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(grid.count()), 0);
    const int rx = static_cast<int>(std::floor(margin_mm / grid.spacing[0]));
    const int ry = static_cast<int>(std::floor(margin_mm / grid.spacing[1]));
    const int rz = static_cast<int>(std::floor(margin_mm / grid.spacing[2]));
    const double m2 = margin_mm * margin_mm;
    for (std::int64_t id : set) {
        const auto c = grid.unflat(id);
        for (int dk = -rz; dk <= rz; ++dk) {
            const int k = c[2] + dk;
            if (k < 0 || k >= grid.dims[2]) continue;
            const double z = dk * grid.spacing[2];
            for (int dj = -ry; dj <= ry; ++dj) {
                const int j = c[1] + dj;
                if (j < 0 || j >= grid.dims[1]) continue;
                const double y = dj * grid.spacing[1];
                if (z * z + y * y > m2) continue;
                for (int di = -rx; di <= rx; ++di) {
                    const int i = c[0] + di;
                    if (i < 0 || i >= grid.dims[0]) continue;
                    const double x = di * grid.spacing[0];
                    if (x * x + y * y + z * z <= m2) mask[grid.flat(i, j, k)] = 1;
                }
            }
        }
    }
    VoxelSet out;
    for (std::int64_t id = 0; id < grid.count(); ++id)
        if (mask[static_cast<std::size_t>(id)]) out.push_back(id);
    return out;
}

VoxelSet healthy_zone(const VoxelSet& ctv, const VoxelGrid& grid) {
    if (ctv.empty()) throw InvalidArgument("healthy_zone: ctv must be nonempty");
    return set_difference(dilate(ctv, 50.0, grid), ctv);
}

VoxelSet set_difference(const VoxelSet& a, const VoxelSet& b) {
    VoxelSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

VoxelSet set_union(const VoxelSet& a, const VoxelSet& b) {
    VoxelSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool sets_disjoint(const VoxelSet& a, const VoxelSet& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) ++ia;
        else if (*ib < *ia) ++ib;
        else return false;
    }
    return true;
}

}  // namespace msrt
