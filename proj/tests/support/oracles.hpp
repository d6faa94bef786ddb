#pragma once

#include <optional>
#include <random>
#include <vector>

#include "msrt/lp.hpp"
#include "msrt/model.hpp"

namespace msrt::test {

/// Exhaustive basic-solution enumeration for LPs whose variables carry the
/// default [0, inf) bounds. Returns the optimal value, or nullopt when no
/// feasible vertex exists. Only usable for small m+n.
std::optional<double> vertex_enumeration_optimum(const lp::LinearProgram& problem);

/// Deterministic-equivalent LP over the full scenario tree from stage f0 with
/// the given incoming cumulative dose: risk-neutral expectation objective,
/// non-anticipative decisions (one control per history node).
double extensive_expected_value(const PlanningProblem& prob, int f0 = 0,
                                const std::vector<double>& initial_state = {});

/// Decision-hazard minimax value: min over non-anticipative policies of the
/// maximum path cost, as a single epigraph LP over all P^(F-f0) paths.
double extensive_worst_case_value(const PlanningProblem& prob, int f0 = 0,
                                  const std::vector<double>& initial_state = {});

/// Random small planning problem for oracle comparisons: random nonnegative
/// dose entries, mixed tumor/healthy voxels, random weights and thresholds.
PlanningProblem random_tiny_problem(std::mt19937_64& rng, int fractions, int realizations,
                                    int voxels, int beamlets);

}  // namespace msrt::test
