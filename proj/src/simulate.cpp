#include "msrt/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

namespace msrt {

namespace {

int categorical(const std::vector<double>& probs, std::mt19937_64& rng) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

int nearest_atom(const std::vector<Vec3>& displacements, const Vec3& d) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (size_t p = 0; p < displacements.size(); ++p) {
        const double dist = norm(d - displacements[p]);
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(p);
        }
    }
    return best;
}

int draw_realization(const SimulationContext& ctx, bool out_of_sample, std::mt19937_64& rng,
                     std::normal_distribution<double>& gauss) {
    if (!out_of_sample) return categorical(ctx.probs, rng);
    const Vec3 d = {gauss(rng), gauss(rng), gauss(rng)};
    return nearest_atom(ctx.displacements, d);
}

std::vector<double> matvec(const DoseMatrix& m, const std::vector<double>& x) {
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::VectorXd y = m * xv;
    return {y.data(), y.data() + y.size()};
}

double deterministic_stage_pen(const PlanningProblem& prob, const std::vector<double>& fluence,
                               int p, const std::vector<double>& state, bool last,
                               double* end_plus, double* end_minus) {
    const DoseMatrix& D = prob.dose[static_cast<size_t>(p)];
    double pen = 0.0;
    for (int i = 0; i < prob.n_voxels(); ++i) {
        const auto& vox = prob.voxels[static_cast<size_t>(i)];
        double z = 0.0;
        for (int j = 0; j < prob.n_beamlets; ++j) z += D(i, j) * fluence[static_cast<size_t>(j)];
        pen += vox.w_stage_plus * std::max(0.0, z - vox.r_plus);
        if (vox.is_tumor) pen += vox.w_stage_minus * std::max(0.0, vox.r_minus - z);
        if (last) {
            const double total = state[static_cast<size_t>(i)] + z;
            const double gp = vox.w_end_plus * std::max(0.0, total - vox.t_plus);
            pen += gp;
            if (end_plus) *end_plus += gp;
            if (vox.is_tumor) {
                const double gm = vox.w_end_minus * std::max(0.0, vox.t_minus - total);
                pen += gm;
                if (end_minus) *end_minus += gm;
            }
        }
    }
    return pen;
}

struct Roller {
    const SimulationContext* ctx;
    const StagePolicy* policy;          // null for deterministic replay
    const DeterministicPlan* det_plan;  // null for policy rollout
    bool out_of_sample = false;

    SimulationTrace roll(std::uint64_t run_seed, std::vector<StageLp>* stages) const {
        const int F = ctx->fractions;
        std::mt19937_64 rng(run_seed);
        std::normal_distribution<double> gauss(0.0, ctx->sigma_mm);
        SimulationTrace tr;
        tr.tissue_final.assign(static_cast<size_t>(ctx->n_eval_voxels), 0.0);
        tr.zone_final.assign(static_cast<size_t>(ctx->n_zone_voxels), 0.0);
        std::vector<double> state(static_cast<size_t>(ctx->planning.n_voxels()), 0.0);
        for (int f = 0; f < F; ++f) {
            std::vector<double> x;
            double stage_cost = 0.0;
            int p;
            if (policy) {
                auto& stage = (*stages)[static_cast<size_t>(f)];
                stage.set_state(state);
                auto res = stage.solve();
                x = res.fluence;
                p = draw_realization(*ctx, out_of_sample, rng, gauss);
                stage_cost = res.stage_pen[static_cast<size_t>(p)];
                if (f == F - 1) {
                    for (int i = 0; i < ctx->planning.n_voxels(); ++i) {
                        const auto& vox = ctx->planning.voxels[static_cast<size_t>(i)];
                        const double total = res.next_state[static_cast<size_t>(p)][static_cast<size_t>(i)];
                        tr.end_penalty_plus += vox.w_end_plus * std::max(0.0, total - vox.t_plus);
                        if (vox.is_tumor)
                            tr.end_penalty_minus +=
                                vox.w_end_minus * std::max(0.0, vox.t_minus - total);
                    }
                }
                state = res.next_state[static_cast<size_t>(p)];
            } else {
                x = det_plan->fluence;
                p = draw_realization(*ctx, out_of_sample, rng, gauss);
                stage_cost = deterministic_stage_pen(ctx->planning, x, p, state, f == F - 1,
                                                     f == F - 1 ? &tr.end_penalty_plus : nullptr,
                                                     f == F - 1 ? &tr.end_penalty_minus : nullptr);
                const DoseMatrix& D = ctx->planning.dose[static_cast<size_t>(p)];
                for (int i = 0; i < ctx->planning.n_voxels(); ++i) {
                    double z = 0.0;
                    for (int j = 0; j < ctx->planning.n_beamlets; ++j)
                        z += D(i, j) * x[static_cast<size_t>(j)];
                    state[static_cast<size_t>(i)] += z;
                }
            }
            tr.path.push_back(p);
            const auto z_tissue = matvec(ctx->eval_dose[static_cast<size_t>(p)], x);
            for (size_t i = 0; i < z_tissue.size(); ++i) tr.tissue_final[i] += z_tissue[i];
            if (ctx->n_zone_voxels > 0) {
                const auto z_zone = matvec(ctx->zone_dose[static_cast<size_t>(p)], x);
                for (size_t i = 0; i < z_zone.size(); ++i) tr.zone_final[i] += z_zone[i];
            }
            tr.tissue_dose.push_back(z_tissue);
            tr.fluence.push_back(std::move(x));
            tr.stage_cost.push_back(stage_cost);
        }
        return tr;
    }
};

std::vector<StageLp> build_policy_stages(const StagePolicy& policy,
                                         const PlanningProblem& prob) {
    if (!policy.trained) throw StateError("simulate: policy has not been trained");
    if (policy.n_state != prob.n_voxels())
        throw InvalidArgument("simulate: policy state dimension does not match the case");
    if (policy.fractions != prob.fractions)
        throw InvalidArgument("simulate: policy fraction count does not match");
    std::vector<StageLp> stages;
    stages.reserve(static_cast<size_t>(prob.fractions));
    for (int f = 0; f < prob.fractions; ++f) {
        stages.emplace_back(prob, f, policy.risk);
        if (f < prob.fractions - 1)
            for (const auto& cut : policy.cuts[static_cast<size_t>(f)]) stages.back().add_cut(cut);
    }
    return stages;
}

std::vector<SimulationTrace> run_all(const Roller& roller, int n_runs, std::uint64_t seed,
                                     int threads) {
    if (n_runs < 1) throw InvalidArgument("simulate: n_runs must be >= 1");
    std::vector<SimulationTrace> traces(static_cast<size_t>(n_runs));
    threads = std::max(1, threads);
    if (threads == 1) {
        std::vector<StageLp> stages;
        if (roller.policy) stages = build_policy_stages(*roller.policy, roller.ctx->planning);
        for (int r = 0; r < n_runs; ++r)
            traces[static_cast<size_t>(r)] = roller.roll(mix_seed(seed, static_cast<std::uint64_t>(r)),
                                                         roller.policy ? &stages : nullptr);
        return traces;
    }
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            std::vector<StageLp> stages;
            if (roller.policy) stages = build_policy_stages(*roller.policy, roller.ctx->planning);
            for (int r = t; r < n_runs; r += threads)
                traces[static_cast<size_t>(r)] =
                    roller.roll(mix_seed(seed, static_cast<std::uint64_t>(r)),
                                roller.policy ? &stages : nullptr);
        });
    }
    for (auto& th : pool) th.join();
    return traces;
}

}  // namespace

SimulationContext make_context(const PatientCase& pc, const ScenarioSet& scen,
                               PlanningProblem planning, bool with_zone) {
    SimulationContext ctx;
    ctx.planning = std::move(planning);
    ctx.probs = scen.probabilities;
    ctx.displacements = scen.displacements;
    ctx.sigma_mm = scen.sigma_mm;
    ctx.fractions = ctx.planning.fractions;
    VoxelSet table;
    for (const auto& t : pc.tissues.tissues) {
        EvalStructure s;
        s.name = t.name;
        s.is_tumor = t.is_tumor;
        s.offset = static_cast<int>(table.size());
        s.count = static_cast<int>(t.voxels.size());
        s.t_minus = t.t_minus;
        s.t_plus = t.t_plus;
        ctx.structures.push_back(s);
        table.insert(table.end(), t.voxels.begin(), t.voxels.end());
    }
    ctx.n_eval_voxels = static_cast<int>(table.size());
    for (const auto& d : scen.displacements)
        ctx.eval_dose.push_back(dose_matrix(pc.grid, pc.spec.kernel, pc.beams, table, d));
    if (with_zone) {
        const VoxelSet zone = healthy_zone(pc.ctv(), pc.grid);
        ctx.n_zone_voxels = static_cast<int>(zone.size());
        for (const auto& d : scen.displacements)
            ctx.zone_dose.push_back(dose_matrix(pc.grid, pc.spec.kernel, pc.beams, zone, d));
    }
    return ctx;
}

std::vector<SimulationTrace> simulate(const StagePolicy& policy, const SimulationContext& ctx,
                                      int n_runs, std::uint64_t seed, bool out_of_sample,
                                      int threads) {
    Roller roller{&ctx, &policy, nullptr, out_of_sample};
    return run_all(roller, n_runs, seed, threads);
}

std::vector<SimulationTrace> replay_deterministic(const DeterministicPlan& plan,
                                                  const SimulationContext& ctx, int n_runs,
                                                  std::uint64_t seed, bool out_of_sample,
                                                  int threads) {
    if (static_cast<int>(plan.fluence.size()) != ctx.planning.n_beamlets)
        throw InvalidArgument("replay: plan beamlet count does not match the case");
    Roller roller{&ctx, nullptr, &plan, out_of_sample};
    return run_all(roller, n_runs, seed, threads);
}

void write_traces(const std::string& dir_prefix, const std::vector<SimulationTrace>& traces) {
    std::ofstream tab(dir_prefix + "traces.tsv");
    if (!tab) throw InvalidArgument("cannot open " + dir_prefix + "traces.tsv");
    tab << "run\tfraction\trealization\tstage_cost\n";
    Eigen::Index rows = 0;
    for (const auto& tr : traces) rows += static_cast<Eigen::Index>(tr.path.size());
    if (traces.empty()) return;
    const auto cols = static_cast<Eigen::Index>(traces[0].tissue_dose.empty()
                                                    ? 0
                                                    : traces[0].tissue_dose[0].size());
    DoseMatrix z(rows, cols);
    Eigen::Index row = 0;
    for (size_t r = 0; r < traces.size(); ++r) {
        const auto& tr = traces[r];
        for (size_t f = 0; f < tr.path.size(); ++f) {
            tab << r << "\t" << f << "\t" << tr.path[f] << "\t" << tr.stage_cost[f] << "\n";
            for (Eigen::Index c = 0; c < cols; ++c)
                z(row, c) = tr.tissue_dose[f][static_cast<size_t>(c)];
            ++row;
        }
    }
    write_dose_matrix(dir_prefix + "traces_dose.dose", z);
}

}  // namespace msrt
