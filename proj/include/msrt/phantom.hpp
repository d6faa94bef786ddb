#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "msrt/common.hpp"
#include "msrt/grid.hpp"

namespace msrt {

using DoseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One tissue structure with its prescription and objective weights.
/// Thresholds are totals over the whole course in Gy; per-fraction limits are
/// derived as T/F under the equal-fractionation assumption.
struct Tissue {
    std::string name;
    bool is_tumor = false;
    VoxelSet voxels;
    double t_minus = 0.0;  // minimum total dose (tumors)
    double t_plus = 0.0;   // maximum total dose
    double alpha_plus = 10.0, alpha_minus = 10.0;  // end-of-horizon weights
    double beta_plus = 1.0, beta_minus = 1.0;      // per-fraction weights
};

struct TissueSet {
    std::vector<Tissue> tissues;

    const Tissue& tumor() const;
    std::vector<const Tissue*> oars() const;
    /// disjointness, grid membership, threshold ordering
    void validate(const VoxelGrid& grid) const;
};

struct Beamlet {
    Vec3 source;
    Vec3 dir;  // unit
};

struct BeamletLayout {
    std::vector<Beamlet> beamlets;
    double fluence_res_mm = 4.0;
    void validate() const;
};

/// Exponential depth attenuation along the beam axis times a Gaussian
/// lateral falloff. Depth is measured from the point where the beamlet axis
/// enters the grid box.
struct PencilKernel {
    double k0 = 1.0;
    double att_mm = 120.0;
    double sigma_mm = 3.5;
};

struct CaseSpec {
    std::string case_id = "case";
    double volume_cm3 = 2.60;
    int n_oars = 2;
    double oar_radius_mm = 7.0;
    double oar_t_plus = 40.0;
    double oar_weight = 1.0;  // scales OAR beta+/alpha+
    double ctv_plus_margin_mm = 2.0;
    double ptv_margin_mm = 4.0;
    double shift_std_mm = 3.0;
    std::array<int, 3> grid_dims{32, 32, 32};
    double grid_spacing_mm = 2.0;
    int n_beams = 5;
    int beamlet_rows = 6;
    int beamlet_cols = 6;
    double beamlet_spacing_mm = 4.0;
    PencilKernel kernel;
    double tumor_t_minus = 60.0;
    double tumor_t_plus = 80.0;
    double alpha_plus = 10.0, alpha_minus = 10.0;
    double beta_plus = 1.0, beta_minus = 1.0;
    bool include_ring = false;
    double ring_width_mm = 5.0;
    double ring_t_plus = 50.0;
    double ring_weight = 0.3;
};

struct PatientCase {
    CaseSpec spec;
    VoxelGrid grid;
    TissueSet tissues;
    BeamletLayout beams;

    const VoxelSet& ctv() const { return tissues.tumor().voxels; }
};

/// Builds the synthetic case: spherical tumor of the requested volume at the
/// grid center, OAR spheres placed just outside the PTV expansion, an
/// optional ring shell, and the coplanar equiangular beamlet layout.
/// Deterministic: contains no randomness.
PatientCase generate_case(const CaseSpec& spec);

/// Dose per unit intensity of one beamlet at a point (field coordinates).
double beamlet_dose_at(const VoxelGrid& grid, const PencilKernel& k, const Beamlet& b,
                       const Vec3& point);

/// Dose-influence matrix for the listed voxels (rows follow the list order).
/// `shift` displaces the tissue: entries sample the static field at
/// voxel-center + shift.
DoseMatrix dose_matrix(const VoxelGrid& grid, const PencilKernel& k, const BeamletLayout& beams,
                       const VoxelSet& voxels, const Vec3& shift = {0.0, 0.0, 0.0});

void write_dose_matrix(const std::string& path, const DoseMatrix& m);
DoseMatrix read_dose_matrix(const std::string& path);

}  // namespace msrt
