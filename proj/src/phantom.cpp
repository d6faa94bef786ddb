#include "msrt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace msrt {

const Tissue& TissueSet::tumor() const {
    for (const auto& t : tissues)
        if (t.is_tumor) return t;
    throw StateError("TissueSet: no tumor");
}

std::vector<const Tissue*> TissueSet::oars() const {
    std::vector<const Tissue*> out;
    for (const auto& t : tissues)
        if (!t.is_tumor) out.push_back(&t);
    return out;
}

void TissueSet::validate(const VoxelGrid& grid) const {
    for (size_t a = 0; a < tissues.size(); ++a) {
        const auto& t = tissues[a];
        if (t.voxels.empty()) throw InvalidArgument("tissue '" + t.name + "' is empty");
        for (std::int64_t id : t.voxels)
            if (id < 0 || id >= grid.count())
                throw InvalidArgument("tissue '" + t.name + "' has out-of-grid voxels");
        if (t.is_tumor && t.t_minus > t.t_plus)
            throw InvalidArgument("tissue '" + t.name + "': T- must not exceed T+");
        for (size_t b = a + 1; b < tissues.size(); ++b)
            if (!sets_disjoint(t.voxels, tissues[b].voxels))
                throw InvalidArgument("tissues '" + t.name + "' and '" + tissues[b].name +
                                      "' overlap");
    }
}

void BeamletLayout::validate() const {
    if (beamlets.empty()) throw InvalidArgument("beamlet layout is empty");
    for (const auto& b : beamlets)
        if (std::abs(norm(b.dir) - 1.0) > 1e-9)
            throw InvalidArgument("beamlet direction is not unit norm");
}

namespace {

// Sphere voxelization that hits the requested voxel count exactly: take the
// `count` nearest voxel centers; the generating radius is the midpoint
// between the last-in and first-out distances. The center is nudged off the
// lattice symmetry points so distance ties do not occur.
VoxelSet sphere_voxels(const VoxelGrid& grid, const Vec3& center, std::int64_t count) {
    if (count < 1) throw InvalidArgument("sphere_voxels: count must be >= 1");
    if (count > grid.count()) throw InfeasibleSpec("sphere larger than the grid");
    std::vector<std::pair<double, std::int64_t>> dist;
    dist.reserve(static_cast<size_t>(grid.count()));
    for (std::int64_t id = 0; id < grid.count(); ++id)
        dist.push_back({norm(grid.center(id) - center), id});
    std::nth_element(dist.begin(), dist.begin() + (count - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + count);
    VoxelSet out;
    out.reserve(static_cast<size_t>(count));
    for (std::int64_t k = 0; k < count; ++k) out.push_back(dist[static_cast<size_t>(k)].second);
    std::sort(out.begin(), out.end());
    return out;
}

Vec3 rotate_xy(double angle, double radius) {
    return {radius * std::cos(angle), radius * std::sin(angle), 0.0};
}

}  // namespace

PatientCase generate_case(const CaseSpec& spec) {
    PatientCase pc;
    pc.spec = spec;
    const double sp = spec.grid_spacing_mm;
    pc.grid = VoxelGrid(spec.grid_dims, {sp, sp, sp},
                        {-0.5 * spec.grid_dims[0] * sp, -0.5 * spec.grid_dims[1] * sp,
                         -0.5 * spec.grid_dims[2] * sp});
    const double voxvol = sp * sp * sp;
    const double volume_mm3 = spec.volume_cm3 * 1000.0;
    if (volume_mm3 < voxvol)
        throw InfeasibleSpec("requested tumor volume is smaller than one voxel");
    const auto target_count = static_cast<std::int64_t>(std::llround(volume_mm3 / voxvol));

    // off-symmetry nudge; keeps nearest-voxel distances tie-free
    const Vec3 nudge = {0.131 * sp, 0.293 * sp, 0.417 * sp};
    const Vec3 tumor_center = nudge;

    Tissue tumor;
    tumor.name = "Tumor_0";
    tumor.is_tumor = true;
    tumor.voxels = sphere_voxels(pc.grid, tumor_center, target_count);
    tumor.t_minus = spec.tumor_t_minus;
    tumor.t_plus = spec.tumor_t_plus;
    tumor.alpha_plus = spec.alpha_plus;
    tumor.alpha_minus = spec.alpha_minus;
    tumor.beta_plus = spec.beta_plus;
    tumor.beta_minus = spec.beta_minus;
    pc.tissues.tissues.push_back(tumor);

    const double tumor_radius = std::cbrt(3.0 * volume_mm3 / (4.0 * M_PI));
    const double ptv_radius = tumor_radius + spec.ptv_margin_mm;
    if (spec.n_oars < 0) throw InvalidArgument("n_oars must be >= 0");
    const double oar_vox_target = 4.0 / 3.0 * M_PI * std::pow(spec.oar_radius_mm, 3) / voxvol;
    for (int o = 0; o < spec.n_oars; ++o) {
        // one voxel of clearance to the PTV sphere so planning volumes and
        // OARs never overlap for margins up to the PTV margin
        const double dist = ptv_radius + spec.oar_radius_mm + sp;
        const double angle = M_PI_2 + o * 2.0 * M_PI / std::max(2, spec.n_oars);
        const Vec3 c = tumor_center + rotate_xy(angle, dist);
        Tissue oar;
        oar.name = "OAR_" + std::to_string(o);
        oar.is_tumor = false;
        oar.voxels = sphere_voxels(pc.grid, c,
                                   std::max<std::int64_t>(1, std::llround(oar_vox_target)));
        oar.t_minus = 0.0;
        oar.t_plus = spec.oar_t_plus;
        oar.alpha_plus = spec.alpha_plus * spec.oar_weight;
        oar.alpha_minus = 0.0;
        oar.beta_plus = spec.beta_plus * spec.oar_weight;
        oar.beta_minus = 0.0;
        pc.tissues.tissues.push_back(oar);
    }

    if (spec.include_ring) {
        VoxelSet inner = dilate(pc.tissues.tumor().voxels, spec.ptv_margin_mm, pc.grid);
        VoxelSet outer =
            dilate(pc.tissues.tumor().voxels, spec.ptv_margin_mm + spec.ring_width_mm, pc.grid);
        VoxelSet ring = set_difference(outer, inner);
        for (const auto* o : pc.tissues.oars()) ring = set_difference(ring, o->voxels);
        if (!ring.empty()) {
            Tissue rt;
            rt.name = "Ring";
            rt.is_tumor = false;
            rt.voxels = ring;
            rt.t_minus = 0.0;
            rt.t_plus = spec.ring_t_plus;
            rt.alpha_plus = spec.alpha_plus * spec.ring_weight;
            rt.alpha_minus = 0.0;
            rt.beta_plus = spec.beta_plus * spec.ring_weight;
            rt.beta_minus = 0.0;
            pc.tissues.tissues.push_back(rt);
        }
    }
    pc.tissues.validate(pc.grid);

    // coplanar equiangular beams; each beam is a rectangular grid of parallel
    // beamlets aimed along the beam axis
    if (spec.n_beams < 1) throw InvalidArgument("n_beams must be >= 1");
    const double src_dist = 1000.0;
    pc.beams.fluence_res_mm = spec.beamlet_spacing_mm;
    for (int b = 0; b < spec.n_beams; ++b) {
        const double ang = 2.0 * M_PI * b / spec.n_beams;
        const Vec3 axis_src = rotate_xy(ang, src_dist);
        const Vec3 dir = {-std::cos(ang), -std::sin(ang), 0.0};
        const Vec3 p1 = {-std::sin(ang), std::cos(ang), 0.0};
        const Vec3 p2 = {0.0, 0.0, 1.0};
        for (int u = 0; u < spec.beamlet_rows; ++u) {
            for (int v = 0; v < spec.beamlet_cols; ++v) {
                const double du = (u - 0.5 * (spec.beamlet_rows - 1)) * spec.beamlet_spacing_mm;
                const double dv = (v - 0.5 * (spec.beamlet_cols - 1)) * spec.beamlet_spacing_mm;
                pc.beams.beamlets.push_back({axis_src + du * p1 + dv * p2, dir});
            }
        }
    }
    pc.beams.validate();
    return pc;
}

namespace {

// parameter t where the ray enters the grid box (slab method); if the ray
// misses, falls back to the closest approach to the box center
double ray_box_entry(const VoxelGrid& grid, const Vec3& src, const Vec3& dir) {
    const Vec3 lo = grid.box_lo();
    const Vec3 hi = grid.box_hi();
    const double inf = std::numeric_limits<double>::infinity();
    double tmin = -inf, tmax = inf;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-14) {
            if (src[a] < lo[a] || src[a] > hi[a]) return dot(0.5 * (lo + hi) - src, dir);
            continue;
        }
        double t0 = (lo[a] - src[a]) / dir[a];
        double t1 = (hi[a] - src[a]) / dir[a];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
    }
    if (tmin > tmax) return dot(0.5 * (lo + hi) - src, dir);
    return tmin;
}

}  // namespace

double beamlet_dose_at(const VoxelGrid& grid, const PencilKernel& k, const Beamlet& b,
                       const Vec3& point) {
    const double t = dot(point - b.source, b.dir);
    const double entry = ray_box_entry(grid, b.source, b.dir);
    const double depth = std::max(0.0, t - entry);
    const Vec3 axial = b.source + t * b.dir;
    const double r2 = dot(point - axial, point - axial);
    return k.k0 * std::exp(-depth / k.att_mm) * std::exp(-r2 / (2.0 * k.sigma_mm * k.sigma_mm));
}

DoseMatrix dose_matrix(const VoxelGrid& grid, const PencilKernel& k, const BeamletLayout& beams,
                       const VoxelSet& voxels, const Vec3& shift) {
    if (beams.beamlets.empty()) throw InvalidArgument("dose_matrix: no beamlets");
    if (voxels.empty()) throw InvalidArgument("dose_matrix: no voxels");
    DoseMatrix m(static_cast<Eigen::Index>(voxels.size()),
                 static_cast<Eigen::Index>(beams.beamlets.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const Vec3 p = grid.center(voxels[static_cast<size_t>(i)]) + shift;
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = beamlet_dose_at(grid, k, beams.beamlets[static_cast<size_t>(j)], p);
    }
    return m;
}

void write_dose_matrix(const std::string& path, const DoseMatrix& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("cannot open " + path + " for writing");
    f.write("DOSE", 4);
    const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
    f.write(reinterpret_cast<const char*>(&rows), 4);
    f.write(reinterpret_cast<const char*>(&cols), 4);
    f.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

DoseMatrix read_dose_matrix(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "DOSE", 4) != 0)
        throw InvalidArgument(path + " is not a dose matrix file");
    std::uint32_t rows = 0, cols = 0;
    f.read(reinterpret_cast<char*>(&rows), 4);
    f.read(reinterpret_cast<char*>(&cols), 4);
    DoseMatrix m(rows, cols);
    f.read(reinterpret_cast<char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!f) throw InvalidArgument(path + " is truncated");
    return m;
}

}  // namespace msrt
