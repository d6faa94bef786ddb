#include "msrt/sddp.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

namespace msrt {

using nlohmann::json;

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

struct Visit {
    std::vector<double> state;     // incoming cumulative dose
    std::vector<double> decision;  // fluence chosen at that state
};

// realized total cost of one forward path, and the visited (state, decision)
// pairs needed by the backward pass
struct ForwardPass {
    std::vector<Visit> visits;  // one per fraction
    double cost = 0.0;
    double first_stage_value = 0.0;
};

ForwardPass run_forward(std::vector<StageLp>& stages, const PlanningProblem& prob,
                        std::mt19937_64& rng) {
    ForwardPass fw;
    const int F = prob.fractions;
    std::vector<double> state(static_cast<size_t>(stages[0].n_state()), 0.0);
    for (int f = 0; f < F; ++f) {
        auto& stage = stages[static_cast<size_t>(f)];
        stage.set_state(state);
        auto res = stage.solve();
        if (f == 0) fw.first_stage_value = res.value;
        const int p = categorical(prob.probs, rng);
        fw.visits.push_back({state, res.fluence});
        fw.cost += res.stage_pen[static_cast<size_t>(p)];
        state = res.next_state[static_cast<size_t>(p)];
    }
    return fw;
}

std::vector<double> candidate_state(const PlanningProblem& prob, const Visit& visit, int p) {
    const DoseMatrix& D = prob.dose[static_cast<size_t>(p)];
    std::vector<double> s = visit.state;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        double dose = 0.0;
        for (int j = 0; j < static_cast<int>(visit.decision.size()); ++j)
            dose += D(i, j) * visit.decision[static_cast<size_t>(j)];
        s[static_cast<size_t>(i)] += dose;
    }
    return s;
}

// per-fraction penalty of a fixed fluence under realization p (stages before
// the last carry no end-of-horizon terms)
double stage_penalty(const PlanningProblem& prob, const std::vector<double>& fluence, int p) {
    const DoseMatrix& D = prob.dose[static_cast<size_t>(p)];
    double pen = 0.0;
    for (int i = 0; i < prob.n_voxels(); ++i) {
        const auto& vox = prob.voxels[static_cast<size_t>(i)];
        double z = 0.0;
        for (int j = 0; j < prob.n_beamlets; ++j) z += D(i, j) * fluence[static_cast<size_t>(j)];
        pen += vox.w_stage_plus * std::max(0.0, z - vox.r_plus);
        if (vox.is_tumor) pen += vox.w_stage_minus * std::max(0.0, vox.r_minus - z);
    }
    return pen;
}

bool same_cut(const Cut& a, const Cut& b) {
    if (a.intercept != b.intercept || a.gradient.size() != b.gradient.size()) return false;
    for (size_t i = 0; i < a.gradient.size(); ++i)
        if (a.gradient[i] != b.gradient[i]) return false;
    return true;
}

}  // namespace

StopDecision should_stop(const std::vector<double>& lb_history,
                         const std::vector<double>& fresh_forward_costs, const RiskMeasure& rm,
                         const TrainOptions& opts) {
    const long k = static_cast<long>(lb_history.size());
    if (k >= opts.max_iters) return {true, "max_iters"};
    if (k < opts.stop_window) return {false, ""};
    if (rm.risk_neutral()) {
        const size_t m = fresh_forward_costs.size();
        if (m >= 2) {
            double mean = 0.0;
            for (double c : fresh_forward_costs) mean += c;
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (double c : fresh_forward_costs) var += (c - mean) * (c - mean);
            const double sd = std::sqrt(var / static_cast<double>(m - 1));
            const double lcb = mean - 1.96 * sd / std::sqrt(static_cast<double>(m));
            if (lb_history.back() >= lcb - 1e-12) return {true, "statistical"};
        }
        return {false, ""};
    }
    const double now = lb_history.back();
    const double then = lb_history[static_cast<size_t>(k - opts.stop_window)];
    const double rel = (now - then) / (1.0 + std::abs(now));
    if (rel < opts.stop_epsilon) return {true, "bound_stall"};
    return {false, ""};
}

std::pair<StagePolicy, TrainReport> train(const PlanningProblem& prob, const RiskMeasure& rm,
                                          const TrainOptions& opts) {
    prob.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const int F = prob.fractions;
    const int P = prob.n_realizations();

    StagePolicy policy;
    policy.risk = rm;
    policy.fractions = F;
    policy.seed = opts.seed;
    policy.cuts.assign(static_cast<size_t>(std::max(0, F - 1)), {});
    for (const auto& v : prob.voxels) policy.state_voxels.push_back(v.voxel_id);
    policy.n_state = prob.n_voxels();

    TrainReport report;

    std::vector<StageLp> stages;
    stages.reserve(static_cast<size_t>(F));
    for (int f = 0; f < F; ++f) stages.emplace_back(prob, f, rm);

    std::mt19937_64 path_rng(mix_seed(opts.seed, 11));
    std::mt19937_64 stat_rng(mix_seed(opts.seed, 13));

    if (F == 1) {
        // no cost-to-go to refine: the first-stage solve is exact
        std::vector<double> zero(static_cast<size_t>(stages[0].n_state()), 0.0);
        stages[0].set_state(zero);
        const double v = stages[0].solve().value;
        policy.lb_history = {v};
        policy.iterations = 1;
        policy.trained = true;
        policy.stop_reason = "single_stage";
        report.iterations = 1;
        report.lb_history = policy.lb_history;
        report.lower_bound = v;
        report.stop_reason = policy.stop_reason;
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return {policy, report};
    }

    std::vector<double> fresh_costs;
    std::string reason;
    while (true) {
        // ---- forward ----
        std::vector<ForwardPass> passes;
        for (int pass = 0; pass < std::max(1, opts.forward_paths); ++pass)
            passes.push_back(run_forward(stages, prob, path_rng));
        policy.lb_history.push_back(passes.front().first_stage_value);
        for (const auto& fw : passes) report.forward_costs.push_back(fw.cost);

        // ---- backward ----
        // Per-realization epigraphs need cuts that are tight at each
        // realization's candidate state, so the node is re-solved at all P of
        // them and a cut is appended for every atom the risk-adjusted
        // measure puts mass on. The measure is taken over the full realized
        // bracket (previous stage's penalty plus the downstream value), which
        // is what the node objective aggregates.
        const int iteration = static_cast<int>(policy.lb_history.size());
        for (int f = F - 1; f >= 1; --f) {
            auto& node = stages[static_cast<size_t>(f)];
            for (const auto& fw : passes) {
                const Visit& visit = fw.visits[static_cast<size_t>(f - 1)];
                std::vector<double> bracket(static_cast<size_t>(P), 0.0);
                std::vector<std::vector<double>> grads(static_cast<size_t>(P));
                std::vector<std::vector<double>> states(static_cast<size_t>(P));
                std::vector<double> values(static_cast<size_t>(P), 0.0);
                for (int p = 0; p < P; ++p) {
                    states[static_cast<size_t>(p)] = candidate_state(prob, visit, p);
                    node.set_state(states[static_cast<size_t>(p)]);
                    auto res = node.solve();
                    values[static_cast<size_t>(p)] = res.value;
                    grads[static_cast<size_t>(p)] = res.state_grad;
                    bracket[static_cast<size_t>(p)] =
                        stage_penalty(prob, visit.decision, p) + res.value;
                }
                const auto mu = risk_adjusted_probs(rm, bracket, prob.probs);
                for (int p = 0; p < P; ++p) {
                    if (mu[static_cast<size_t>(p)] <= 1e-15) continue;
                    Cut cut;
                    cut.fraction = f - 1;
                    cut.iteration = iteration;
                    cut.gradient = grads[static_cast<size_t>(p)];
                    cut.intercept = values[static_cast<size_t>(p)];
                    for (int i = 0; i < prob.n_voxels(); ++i)
                        cut.intercept -= cut.gradient[static_cast<size_t>(i)] *
                                         states[static_cast<size_t>(p)][static_cast<size_t>(i)];
                    auto& pool = policy.cuts[static_cast<size_t>(f - 1)];
                    bool duplicate = false;
                    for (auto it = pool.rbegin(); it != pool.rend() && !duplicate; ++it)
                        duplicate = same_cut(*it, cut);
                    if (duplicate) continue;
                    stages[static_cast<size_t>(f - 1)].add_cut(cut);
                    pool.push_back(cut);
                }
            }
        }

        // ---- stopping ----
        fresh_costs.clear();
        const long k = static_cast<long>(policy.lb_history.size());
        if (rm.risk_neutral() && k >= opts.stop_window && k % opts.stat_check_every == 0) {
            for (int s = 0; s < opts.stat_paths; ++s)
                fresh_costs.push_back(run_forward(stages, prob, stat_rng).cost);
        }
        const auto decision = should_stop(policy.lb_history, fresh_costs, rm, opts);
        if (decision.stop) {
            reason = decision.reason;
            break;
        }
    }

    policy.iterations = static_cast<long>(policy.lb_history.size());
    policy.trained = true;
    policy.stop_reason = reason;
    report.iterations = policy.iterations;
    report.lb_history = policy.lb_history;
    report.lower_bound = policy.lb_history.back();
    report.stop_reason = reason;
    if (!report.forward_costs.empty()) {
        double mean = 0.0;
        for (double c : report.forward_costs) mean += c;
        mean /= static_cast<double>(report.forward_costs.size());
        double var = 0.0;
        for (double c : report.forward_costs) var += (c - mean) * (c - mean);
        report.forward_cost_mean = mean;
        report.forward_cost_std =
            report.forward_costs.size() > 1
                ? std::sqrt(var / static_cast<double>(report.forward_costs.size() - 1))
                : 0.0;
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {policy, report};
}

double lower_bound(const StagePolicy& policy) {
    if (!policy.trained || policy.lb_history.empty())
        throw StateError("lower_bound: policy has not been trained");
    return policy.lb_history.back();
}

std::string policy_to_json(const StagePolicy& policy) {
    json j;
    j["version"] = 1;
    j["kind"] = "sddp-policy";
    j["risk"] = policy.risk.str();
    j["fractions"] = policy.fractions;
    j["n_state"] = policy.n_state;
    j["state_voxels"] = policy.state_voxels;
    j["seed"] = policy.seed;
    j["iterations"] = policy.iterations;
    j["lb_history"] = policy.lb_history;
    j["stop_reason"] = policy.stop_reason;
    json cuts = json::array();
    for (size_t f = 0; f < policy.cuts.size(); ++f) {
        for (const auto& c : policy.cuts[f]) {
            json jc;
            jc["f"] = c.fraction;
            jc["iteration"] = c.iteration;
            jc["intercept"] = c.intercept;
            jc["gradient"] = c.gradient;
            cuts.push_back(jc);
        }
    }
    j["cuts"] = cuts;
    return j.dump();
}

StagePolicy policy_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.value("kind", "") != "sddp-policy")
        throw InvalidArgument("not a policy file");
    StagePolicy p;
    p.risk = RiskMeasure::parse(j.at("risk").get<std::string>());
    p.fractions = j.at("fractions").get<int>();
    p.n_state = j.at("n_state").get<int>();
    p.state_voxels = j.at("state_voxels").get<std::vector<std::int64_t>>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.iterations = j.at("iterations").get<long>();
    p.lb_history = j.at("lb_history").get<std::vector<double>>();
    p.stop_reason = j.value("stop_reason", "");
    p.cuts.assign(static_cast<size_t>(std::max(0, p.fractions - 1)), {});
    for (const auto& jc : j.at("cuts")) {
        Cut c;
        c.fraction = jc.at("f").get<int>();
        c.iteration = jc.at("iteration").get<int>();
        c.intercept = jc.at("intercept").get<double>();
        c.gradient = jc.at("gradient").get<std::vector<double>>();
        if (c.fraction < 0 || c.fraction >= p.fractions - 1)
            throw InvalidArgument("policy cut fraction out of range");
        p.cuts[static_cast<size_t>(c.fraction)].push_back(c);
    }
    p.trained = true;
    return p;
}

void write_policy(const std::string& path, const StagePolicy& policy) {
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path + " for writing");
    f << policy_to_json(policy) << "\n";
}

StagePolicy read_policy(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return policy_from_json(text);
}

std::string train_report_to_json(const TrainReport& report) {
    json j;
    j["iterations"] = report.iterations;
    j["lb_history"] = report.lb_history;
    j["lower_bound"] = report.lower_bound;
    j["forward_cost_mean"] = report.forward_cost_mean;
    j["forward_cost_std"] = report.forward_cost_std;
    j["stop_reason"] = report.stop_reason;
    j["wall_seconds"] = report.wall_seconds;
    return j.dump(2);
}

void write_train_report(const std::string& path, const TrainReport& report) {
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path + " for writing");
    f << train_report_to_json(report) << "\n";
}

}  // namespace msrt
