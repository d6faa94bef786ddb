#pragma once

#include <cstdint>
#include <vector>

#include "msrt/lp.hpp"
#include "msrt/phantom.hpp"
#include "msrt/riskmeasure.hpp"
#include "msrt/scenario.hpp"

namespace msrt {

/// Per-voxel planning data after target expansion and voxel sampling.
/// Objective weights are already normalized by the retained voxel count of
/// the owning structure.
struct PlanningVoxel {
    int tissue = 0;
    std::int64_t voxel_id = 0;
    bool is_tumor = false;
    double r_plus = 0.0, r_minus = 0.0;  // per-fraction thresholds (Gy)
    double t_plus = 0.0, t_minus = 0.0;  // whole-course thresholds (Gy)
    double w_stage_plus = 0.0, w_stage_minus = 0.0;
    double w_end_plus = 0.0, w_end_minus = 0.0;
};

/// Everything the stage problems need: sampled voxels, per-realization dose
/// matrices restricted to them, and the support probabilities.
struct PlanningProblem {
    std::vector<PlanningVoxel> voxels;
    std::vector<DoseMatrix> dose;  // per realization: |voxels| x n_beamlets
    std::vector<double> probs;
    int n_beamlets = 0;
    int fractions = 1;
    std::vector<std::string> tissue_names;

    int n_voxels() const { return static_cast<int>(voxels.size()); }
    int n_realizations() const { return static_cast<int>(probs.size()); }
    void validate() const;
};

/// Uniform without-replacement voxel subsample, one subset per tissue.
/// Retained entries are positions into the tissue's voxel list, in original
/// order.
struct VoxelSample {
    std::vector<std::vector<int>> retained;
    double rate = 1.0;
    std::uint64_t seed = 0;
};

VoxelSample sample_voxels(const TissueSet& tissues, double rate, std::uint64_t seed);

/// Planning structures for a model run: the tumor expanded by the margin
/// (CTV+ for the stochastic model, PTV for the deterministic one) plus the
/// other structures with any voxels swallowed by the target removed.
TissueSet planning_structures(const PatientCase& pc, double target_margin_mm);

/// Assembles the planning problem: weights normalized by retained counts,
/// dose matrices sampled at each displacement. `sample` may be null for the
/// full voxel set.
PlanningProblem build_planning_problem(const PatientCase& pc, const TissueSet& structures,
                                       const VoxelSample* sample,
                                       const std::vector<Vec3>& displacements,
                                       const std::vector<double>& probs, int fractions);

/// A cutting plane for the cost-to-go function entering fraction `fraction`:
/// Q(I) >= intercept + gradient . I over the sampled-voxel state.
struct Cut {
    int fraction = 0;  // the stage whose node uses this cut (0-based)
    double intercept = 0.0;
    std::vector<double> gradient;
    int iteration = -1;
};

/// One decision-hazard stage LP: decides the non-anticipative fluence before
/// the realization is observed, with per-realization penalty blocks, explicit
/// state-update rows, one cost-to-go epigraph per realization, and the risk
/// measure encoded in the objective (Rockafellar-Uryasev form for AV@R, a
/// max epigraph for the worst case).
class StageLp {
public:
    /// fraction is 0-based; debug_explicit builds the un-substituted form
    /// with per-realization controls tied by explicit non-anticipativity rows.
    StageLp(const PlanningProblem& prob, int fraction, const RiskMeasure& rm,
            bool debug_explicit = false);

    struct Result {
        lp::LpStatus status = lp::LpStatus::IterLimit;
        double value = 0.0;
        std::vector<double> fluence;
        std::vector<double> bracket;                  // per-realization node cost
        std::vector<double> stage_pen;                // bracket without the epigraph term
        std::vector<double> state_grad;               // subgradient wrt incoming state
        std::vector<std::vector<double>> next_state;  // per realization
    };

    void set_state(const std::vector<double>& state);
    void add_cut(const Cut& cut);
    Result solve();

    int n_state() const { return n_voxels_; }
    int n_cuts() const { return n_cuts_; }
    int fraction() const { return fraction_; }
    const lp::LinearProgram& problem() const { return lp_; }

private:
    void build(const PlanningProblem& prob, const RiskMeasure& rm);
    void add_risk_encoding(const RiskMeasure& rm, double weight);

    const PlanningProblem* prob_ = nullptr;
    int fraction_ = 0;
    bool last_ = false;
    bool has_eta_ = false;
    bool debug_explicit_ = false;
    int n_voxels_ = 0, n_beamlets_ = 0, n_real_ = 0;
    lp::LinearProgram lp_;
    lp::SimplexSession session_;
    bool session_loaded_ = false;

    std::vector<int> col_theta_plus_, col_theta_minus_, col_iprime_;  // per (p, voxel)
    std::vector<int> col_gamma_plus_, col_gamma_minus_;
    std::vector<int> col_eta_;      // per p
    std::vector<int> state_rows_;   // per (p, voxel)
    std::vector<int> tumor_index_;  // voxel -> position among tumor voxels or -1
    // linear expression of the per-realization node cost, built once
    std::vector<std::vector<std::pair<int, double>>> bracket_expr_;
    std::vector<double> state_;
    int n_cuts_ = 0;
};

/// Deterministic-model planning problem: target expanded by `margin_mm`,
/// nominal geometry only, no voxel sampling.
PlanningProblem deterministic_problem(const PatientCase& pc, double margin_mm, int fractions);

/// The F chained deterministic stages as one extensive LP (P must be 1).
lp::LinearProgram extensive_deterministic_lp(const PlanningProblem& prob);

struct DeterministicPlan {
    std::vector<double> fluence;  // identical for every fraction
    double objective = 0.0;
    int fractions = 1;
};

/// Solves the deterministic model through its fraction-symmetric reduction:
/// with identical stages and a convex symmetric objective some optimum uses
/// the same fluence every fraction, so one single-stage LP suffices.
DeterministicPlan solve_deterministic(const PlanningProblem& prob);

}  // namespace msrt
