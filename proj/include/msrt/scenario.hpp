#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "msrt/common.hpp"
#include "msrt/phantom.hpp"

namespace msrt {

/// Finite support of rigid displacement vectors with probabilities and the
/// per-realization dose matrices over a fixed voxel table. Realization 0 is
/// always the nominal (zero) displacement.
struct ScenarioSet {
    std::vector<Vec3> displacements;
    std::vector<double> probabilities;
    std::vector<DoseMatrix> dose;  // one matrix per realization; may be empty until attached
    std::uint64_t seed = 0;
    double sigma_mm = 0.0;

    int size() const { return static_cast<int>(displacements.size()); }
    void validate() const;
};

/// One sampled path of realization indices (0-based), one per fraction.
using SamplePath = std::vector<int>;

/// P displacements from an isotropic zero-mean Gaussian with the given
/// per-axis standard deviation; uniform probabilities 1/P. The first
/// realization is forced to the nominal zero displacement.
ScenarioSet sample_miga(double sigma_mm, int p, std::uint64_t seed);

/// Per-realization dose matrices for the listed voxels: realization p samples
/// the static dose field at voxel-center + displacement p. A zero
/// displacement reproduces the nominal matrix bit-exactly.
std::vector<DoseMatrix> shifted_dose_matrices(const VoxelGrid& grid, const PencilKernel& kernel,
                                              const BeamletLayout& beams, const VoxelSet& voxels,
                                              const std::vector<Vec3>& displacements);

/// F stage-wise-independent categorical draws with the scenario weights.
SamplePath draw_path(const ScenarioSet& scen, int fractions, std::mt19937_64& rng);

/// Out-of-sample draw: a fresh Gaussian displacement per fraction, mapped to
/// the nearest atom of the support.
SamplePath draw_path_out_of_sample(const ScenarioSet& scen, int fractions, std::mt19937_64& rng);

/// Sidecar serialization (displacements, probabilities, seed, sigma); dose
/// matrices travel separately in the binary dose format.
std::string scenario_to_json(const ScenarioSet& scen);
ScenarioSet scenario_from_json(const std::string& text);

}  // namespace msrt
