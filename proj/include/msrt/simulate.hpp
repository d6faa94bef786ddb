#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msrt/model.hpp"
#include "msrt/scenario.hpp"
#include "msrt/sddp.hpp"

namespace msrt {

/// One rollout of a policy: sampled realizations, per-fraction decisions and
/// delivered doses on the evaluation voxels, cumulative end doses, realized
/// stage costs and end-of-horizon penalties.
struct SimulationTrace {
    SamplePath path;
    std::vector<std::vector<double>> fluence;      // per fraction
    std::vector<std::vector<double>> tissue_dose;  // per fraction, evaluation tissue voxels
    std::vector<double> tissue_final;              // cumulative dose on evaluation tissue voxels
    std::vector<double> zone_final;                // cumulative dose on healthy-zone voxels
    std::vector<double> stage_cost;                // realized per-fraction objective
    double end_penalty_plus = 0.0;                 // weighted terminal overdose penalty
    double end_penalty_minus = 0.0;
};

/// Offsets of one evaluation structure inside the concatenated evaluation
/// voxel table.
struct EvalStructure {
    std::string name;
    bool is_tumor = false;
    int offset = 0;
    int count = 0;
    double t_minus = 0.0, t_plus = 0.0;
};

/// Everything a rollout needs besides the policy: the planning problem the
/// stage LPs are built from, the evaluation-side dose matrices, and the
/// uncertainty support.
struct SimulationContext {
    PlanningProblem planning;
    std::vector<EvalStructure> structures;
    std::vector<DoseMatrix> eval_dose;  // per realization, eval tissue voxels x beamlets
    std::vector<DoseMatrix> zone_dose;  // per realization, zone voxels x beamlets (optional)
    std::vector<double> probs;
    std::vector<Vec3> displacements;
    double sigma_mm = 0.0;
    int fractions = 1;
    int n_eval_voxels = 0;
    int n_zone_voxels = 0;
};

/// Builds the rollout context: evaluation structures are the true tissues of
/// the case (the tumor is the CTV, not the planning expansion), plus the
/// healthy zone when requested.
SimulationContext make_context(const PatientCase& pc, const ScenarioSet& scen,
                               PlanningProblem planning, bool with_zone);

/// Rolls the trained policy out along sampled paths. Decisions are made from
/// the current cumulative state before the fraction's realization is drawn.
/// Run r draws from the seed stream mix(seed, r). Results are reproducible
/// for a fixed thread count; stage LPs with multiple optima may tie-break
/// differently under a different warm-start order, so plans across thread
/// counts agree in value but not necessarily bitwise.
std::vector<SimulationTrace> simulate(const StagePolicy& policy, const SimulationContext& ctx,
                                      int n_runs, std::uint64_t seed, bool out_of_sample = false,
                                      int threads = 1);

/// Replays a fixed deterministic plan against sampled geometries.
std::vector<SimulationTrace> replay_deterministic(const DeterministicPlan& plan,
                                                  const SimulationContext& ctx, int n_runs,
                                                  std::uint64_t seed, bool out_of_sample = false,
                                                  int threads = 1);

/// Row-per-(run, fraction) text table plus dose vectors in the binary dose
/// format (one row per run-fraction pair, final doses appended at the end).
void write_traces(const std::string& dir_prefix, const std::vector<SimulationTrace>& traces);

}  // namespace msrt
