#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "msrt/model.hpp"
#include "msrt/riskmeasure.hpp"

namespace msrt {

struct TrainOptions {
    long max_iters = 200;
    int forward_paths = 1;      // sampled paths per iteration
    int stop_window = 20;       // iterations for the bound-stall rule
    double stop_epsilon = 1e-4; // relative improvement threshold over the window
    int stat_paths = 30;        // fresh simulations per statistical check
    int stat_check_every = 5;   // iterations between statistical checks
    std::uint64_t seed = 0;
};

/// Cut pools per fraction plus training metadata. cuts[f] under-approximate
/// the cost-to-go entering fraction f+1 and constrain node f's epigraphs.
struct StagePolicy {
    RiskMeasure risk;
    int fractions = 1;
    int n_state = 0;
    std::vector<std::vector<Cut>> cuts;
    std::vector<double> lb_history;
    std::vector<std::int64_t> state_voxels;
    std::uint64_t seed = 0;
    long iterations = 0;
    bool trained = false;
    std::string stop_reason;
};

struct TrainReport {
    long iterations = 0;
    std::vector<double> lb_history;
    std::vector<double> forward_costs;  // realized path costs seen in training
    double forward_cost_mean = 0.0;
    double forward_cost_std = 0.0;
    double lower_bound = 0.0;
    double wall_seconds = 0.0;
    std::string stop_reason;
};

struct StopDecision {
    bool stop = false;
    std::string reason;
};

/// Stopping rule: risk-neutral training stops when the lower bound clears the
/// 95% lower confidence bound of fresh forward costs; risk-averse training
/// stops when the bound stalls over the window. Both stop at max_iters.
StopDecision should_stop(const std::vector<double>& lb_history,
                         const std::vector<double>& fresh_forward_costs, const RiskMeasure& rm,
                         const TrainOptions& opts);

/// SDDP training loop: forward passes sample a path and record visited
/// states; backward passes solve each downstream node at every realization's
/// candidate state and append one risk-aggregated cut per node visit.
std::pair<StagePolicy, TrainReport> train(const PlanningProblem& prob, const RiskMeasure& rm,
                                          const TrainOptions& opts);

/// First-stage lower bound of a trained policy.
double lower_bound(const StagePolicy& policy);

std::string policy_to_json(const StagePolicy& policy);
StagePolicy policy_from_json(const std::string& text);
void write_policy(const std::string& path, const StagePolicy& policy);
StagePolicy read_policy(const std::string& path);

std::string train_report_to_json(const TrainReport& report);
void write_train_report(const std::string& path, const TrainReport& report);

}  // namespace msrt
