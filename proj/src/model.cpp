#include "msrt/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace msrt {

void PlanningProblem::validate() const {
    if (voxels.empty()) throw InvalidArgument("planning problem: no voxels");
    if (n_beamlets < 1) throw InvalidArgument("planning problem: no beamlets");
    if (fractions < 1) throw InvalidArgument("planning problem: F must be >= 1");
    if (probs.empty() || dose.size() != probs.size())
        throw InvalidArgument("planning problem: dose/probability mismatch");
    double s = 0.0;
    for (double q : probs) {
        if (!(q > 0.0)) throw InvalidArgument("planning problem: nonpositive probability");
        s += q;
    }
    if (std::abs(s - 1.0) > 1e-12)
        throw InvalidArgument("planning problem: probabilities must sum to 1");
    for (const auto& m : dose)
        if (m.rows() != n_voxels() || m.cols() != n_beamlets)
            throw InvalidArgument("planning problem: dose matrix shape mismatch");
    bool tumor = false;
    for (const auto& v : voxels) {
        tumor = tumor || v.is_tumor;
        if (v.r_minus > v.r_plus + 1e-12 || v.t_minus > v.t_plus + 1e-12)
            throw InvalidArgument("planning problem: lower threshold exceeds upper");
    }
    if (!tumor) throw InvalidArgument("planning problem: no tumor voxels after sampling");
}

VoxelSample sample_voxels(const TissueSet& tissues, double rate, std::uint64_t seed) {
    if (!(rate > 0.0) || rate > 1.0)
        throw InvalidArgument("sample_voxels: rate must be in (0, 1]");
    VoxelSample vs;
    vs.rate = rate;
    vs.seed = seed;
    std::mt19937_64 rng(seed);
    for (const auto& t : tissues.tissues) {
        const int n = static_cast<int>(t.voxels.size());
        const int k = static_cast<int>(std::ceil(rate * n));
        std::vector<int> idx(static_cast<size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        // partial Fisher-Yates: first k entries are a uniform sample
        for (int i = 0; i < k; ++i) {
            const auto j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(n - i));
            std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        }
        idx.resize(static_cast<size_t>(k));
        std::sort(idx.begin(), idx.end());
        vs.retained.push_back(std::move(idx));
    }
    return vs;
}

TissueSet planning_structures(const PatientCase& pc, double target_margin_mm) {
    TissueSet out;
    Tissue target = pc.tissues.tumor();
    target.voxels = dilate(target.voxels, target_margin_mm, pc.grid);
    target.name = pc.tissues.tumor().name;
    out.tissues.push_back(target);
    for (const auto& t : pc.tissues.tissues) {
        if (t.is_tumor) continue;
        Tissue copy = t;
        copy.voxels = set_difference(copy.voxels, target.voxels);
        if (!copy.voxels.empty()) out.tissues.push_back(copy);
    }
    return out;
}

PlanningProblem build_planning_problem(const PatientCase& pc, const TissueSet& structures,
                                       const VoxelSample* sample,
                                       const std::vector<Vec3>& displacements,
                                       const std::vector<double>& probs, int fractions) {
    if (fractions < 1) throw InvalidArgument("build_planning_problem: F must be >= 1");
    if (sample && sample->retained.size() != structures.tissues.size())
        throw InvalidArgument("build_planning_problem: sample does not match structures");
    PlanningProblem prob;
    prob.fractions = fractions;
    prob.probs = probs;
    prob.n_beamlets = static_cast<int>(pc.beams.beamlets.size());
    VoxelSet retained_ids;
    for (size_t ti = 0; ti < structures.tissues.size(); ++ti) {
        const Tissue& t = structures.tissues[ti];
        std::vector<std::int64_t> ids;
        if (sample) {
            for (int pos : sample->retained[ti])
                ids.push_back(t.voxels[static_cast<size_t>(pos)]);
        } else {
            ids = t.voxels;
        }
        if (ids.empty())
            throw InvalidArgument("empty tissue '" + t.name + "' after sampling");
        const double n = static_cast<double>(ids.size());
        for (std::int64_t id : ids) {
            PlanningVoxel v;
            v.tissue = static_cast<int>(ti);
            v.voxel_id = id;
            v.is_tumor = t.is_tumor;
            v.t_plus = t.t_plus;
            v.t_minus = t.is_tumor ? t.t_minus : 0.0;
            v.r_plus = v.t_plus / fractions;
            v.r_minus = v.t_minus / fractions;
            v.w_stage_plus = t.beta_plus / n;
            v.w_stage_minus = t.is_tumor ? t.beta_minus / n : 0.0;
            v.w_end_plus = t.alpha_plus / n;
            v.w_end_minus = t.is_tumor ? t.alpha_minus / n : 0.0;
            prob.voxels.push_back(v);
            retained_ids.push_back(id);
        }
        prob.tissue_names.push_back(t.name);
    }
    prob.dose.reserve(displacements.size());
    for (const auto& d : displacements)
        prob.dose.push_back(dose_matrix(pc.grid, pc.spec.kernel, pc.beams, retained_ids, d));
    prob.validate();
    return prob;
}

// ---------------------------------------------------------------------------
// StageLp
// ---------------------------------------------------------------------------

StageLp::StageLp(const PlanningProblem& prob, int fraction, const RiskMeasure& rm,
                 bool debug_explicit)
    : prob_(&prob), fraction_(fraction), debug_explicit_(debug_explicit) {
    prob.validate();
    if (fraction < 0 || fraction >= prob.fractions)
        throw InvalidArgument("StageLp: fraction out of range");
    last_ = fraction == prob.fractions - 1;
    has_eta_ = !last_;
    n_voxels_ = prob.n_voxels();
    n_beamlets_ = prob.n_beamlets;
    n_real_ = prob.n_realizations();
    build(prob, rm);
    session_.load(lp_);
    session_loaded_ = true;
    state_.assign(static_cast<size_t>(n_voxels_), 0.0);
}

void StageLp::build(const PlanningProblem& prob, const RiskMeasure& rm) {
    const int V = n_voxels_, B = n_beamlets_, P = n_real_;
    tumor_index_.assign(static_cast<size_t>(V), -1);
    int nt = 0;
    for (int i = 0; i < V; ++i)
        if (prob.voxels[static_cast<size_t>(i)].is_tumor) tumor_index_[static_cast<size_t>(i)] = nt++;

    for (int j = 0; j < B; ++j) lp_.add_variable(0.0);
    std::vector<int> col_xp;  // explicit mode: per (p, beamlet)
    std::vector<int> col_z;   // explicit mode: per (p, voxel)
    if (debug_explicit_) {
        col_xp.resize(static_cast<size_t>(P) * B);
        col_z.resize(static_cast<size_t>(P) * V);
        for (int p = 0; p < P; ++p) {
            for (int j = 0; j < B; ++j) col_xp[static_cast<size_t>(p) * B + j] = lp_.add_variable(0.0);
            for (int i = 0; i < V; ++i) col_z[static_cast<size_t>(p) * V + i] = lp_.add_variable(0.0);
        }
    }

    col_theta_plus_.assign(static_cast<size_t>(P) * V, -1);
    col_theta_minus_.assign(static_cast<size_t>(P) * V, -1);
    col_iprime_.assign(static_cast<size_t>(P) * V, -1);
    if (last_) {
        col_gamma_plus_.assign(static_cast<size_t>(P) * V, -1);
        col_gamma_minus_.assign(static_cast<size_t>(P) * V, -1);
    }
    if (has_eta_) col_eta_.assign(static_cast<size_t>(P), -1);
    for (int p = 0; p < P; ++p) {
        for (int i = 0; i < V; ++i) {
            const auto idx = static_cast<size_t>(p) * V + i;
            col_theta_plus_[idx] = lp_.add_variable(0.0);
            if (tumor_index_[static_cast<size_t>(i)] >= 0)
                col_theta_minus_[idx] = lp_.add_variable(0.0);
            col_iprime_[idx] = lp_.add_variable(0.0);
            if (last_) {
                col_gamma_plus_[idx] = lp_.add_variable(0.0);
                if (tumor_index_[static_cast<size_t>(i)] >= 0)
                    col_gamma_minus_[idx] = lp_.add_variable(0.0);
            }
        }
        if (has_eta_) col_eta_[static_cast<size_t>(p)] = lp_.add_variable(0.0);
    }

    // rows
    state_rows_.assign(static_cast<size_t>(P) * V, -1);
    for (int p = 0; p < P; ++p) {
        const DoseMatrix& D = prob.dose[static_cast<size_t>(p)];
        for (int i = 0; i < V; ++i) {
            const auto idx = static_cast<size_t>(p) * V + i;
            const auto& vox = prob.voxels[static_cast<size_t>(i)];
            // I'_ip - sum_j D_ij x*_j = I_i
            std::vector<std::pair<int, double>> st;
            st.reserve(static_cast<size_t>(B) + 1);
            st.push_back({col_iprime_[idx], 1.0});
            for (int j = 0; j < B; ++j) {
                const double d = D(i, j);
                if (d != 0.0) st.push_back({j, -d});
            }
            state_rows_[idx] = lp_.add_row(lp::RowType::EQ, 0.0, st);

            // theta+_ip - z_ip >= -R+_i   (z = D_p x in the substituted form)
            std::vector<std::pair<int, double>> tp;
            tp.push_back({col_theta_plus_[idx], 1.0});
            if (debug_explicit_) {
                tp.push_back({col_z[idx], -1.0});
            } else {
                for (int j = 0; j < B; ++j) {
                    const double d = D(i, j);
                    if (d != 0.0) tp.push_back({j, -d});
                }
            }
            lp_.add_row(lp::RowType::GE, -vox.r_plus, tp);

            if (tumor_index_[static_cast<size_t>(i)] >= 0) {
                std::vector<std::pair<int, double>> tm;
                tm.push_back({col_theta_minus_[idx], 1.0});
                if (debug_explicit_) {
                    tm.push_back({col_z[idx], 1.0});
                } else {
                    for (int j = 0; j < B; ++j) {
                        const double d = D(i, j);
                        if (d != 0.0) tm.push_back({j, d});
                    }
                }
                lp_.add_row(lp::RowType::GE, vox.r_minus, tm);
            }

            if (last_) {
                lp_.add_row(lp::RowType::GE, -vox.t_plus,
                            {{col_gamma_plus_[idx], 1.0}, {col_iprime_[idx], -1.0}});
                if (tumor_index_[static_cast<size_t>(i)] >= 0)
                    lp_.add_row(lp::RowType::GE, vox.t_minus,
                                {{col_gamma_minus_[idx], 1.0}, {col_iprime_[idx], 1.0}});
            }
        }
        if (debug_explicit_) {
            // z_ip - sum_j D_ij x_jp = 0 and non-anticipativity x*_j = x_jp
            for (int i = 0; i < V; ++i) {
                std::vector<std::pair<int, double>> ze;
                ze.push_back({col_z[static_cast<size_t>(p) * V + i], 1.0});
                for (int j = 0; j < B; ++j) {
                    const double d = D(i, j);
                    if (d != 0.0) ze.push_back({col_xp[static_cast<size_t>(p) * B + j], -d});
                }
                lp_.add_row(lp::RowType::EQ, 0.0, ze);
            }
            for (int j = 0; j < B; ++j)
                lp_.add_row(lp::RowType::EQ, 0.0,
                            {{j, 1.0}, {col_xp[static_cast<size_t>(p) * B + j], -1.0}});
        }
    }

    // per-realization node cost expression
    bracket_expr_.assign(static_cast<size_t>(P), {});
    for (int p = 0; p < P; ++p) {
        auto& expr = bracket_expr_[static_cast<size_t>(p)];
        for (int i = 0; i < V; ++i) {
            const auto idx = static_cast<size_t>(p) * V + i;
            const auto& vox = prob.voxels[static_cast<size_t>(i)];
            if (vox.w_stage_plus > 0.0) expr.push_back({col_theta_plus_[idx], vox.w_stage_plus});
            if (tumor_index_[static_cast<size_t>(i)] >= 0 && vox.w_stage_minus > 0.0)
                expr.push_back({col_theta_minus_[idx], vox.w_stage_minus});
            if (last_) {
                if (vox.w_end_plus > 0.0) expr.push_back({col_gamma_plus_[idx], vox.w_end_plus});
                if (tumor_index_[static_cast<size_t>(i)] >= 0 && vox.w_end_minus > 0.0)
                    expr.push_back({col_gamma_minus_[idx], vox.w_end_minus});
            }
        }
        if (has_eta_) expr.push_back({col_eta_[static_cast<size_t>(p)], 1.0});
    }

    add_risk_encoding(rm, 1.0);
}

void StageLp::add_risk_encoding(const RiskMeasure& rm, double weight) {
    const int P = n_real_;
    switch (rm.kind) {
        case RiskMeasure::Kind::Expectation: {
            for (int p = 0; p < P; ++p)
                for (const auto& [col, coef] : bracket_expr_[static_cast<size_t>(p)])
                    lp_.c[static_cast<size_t>(col)] += weight * prob_->probs[static_cast<size_t>(p)] * coef;
            return;
        }
        case RiskMeasure::Kind::Worst: {
            const int w = lp_.add_variable(weight);
            for (int p = 0; p < P; ++p) {
                std::vector<std::pair<int, double>> row{{w, 1.0}};
                for (const auto& [col, coef] : bracket_expr_[static_cast<size_t>(p)])
                    row.push_back({col, -coef});
                lp_.add_row(lp::RowType::GE, 0.0, row);
            }
            return;
        }
        case RiskMeasure::Kind::AVaR: {
            if (rm.alpha <= 0.0) {
                add_risk_encoding(RiskMeasure::expectation(), weight);
                return;
            }
            if (rm.alpha >= 1.0) {
                add_risk_encoding(RiskMeasure::worst(), weight);
                return;
            }
            const double beta = 1.0 - rm.alpha;
            const int zeta = lp_.add_variable(weight);
            for (int p = 0; p < P; ++p) {
                const int s = lp_.add_variable(weight * prob_->probs[static_cast<size_t>(p)] / beta);
                std::vector<std::pair<int, double>> row{{zeta, 1.0}, {s, 1.0}};
                for (const auto& [col, coef] : bracket_expr_[static_cast<size_t>(p)])
                    row.push_back({col, -coef});
                lp_.add_row(lp::RowType::GE, 0.0, row);
            }
            return;
        }
        case RiskMeasure::Kind::Combo: {
            add_risk_encoding(*rm.first, weight * rm.lambda);
            add_risk_encoding(*rm.second, weight * (1.0 - rm.lambda));
            return;
        }
    }
    throw StateError("add_risk_encoding: bad risk measure kind");
}

void StageLp::set_state(const std::vector<double>& state) {
    if (static_cast<int>(state.size()) != n_voxels_)
        throw InvalidArgument("set_state: dimension mismatch");
    state_ = state;
    for (int p = 0; p < n_real_; ++p)
        for (int i = 0; i < n_voxels_; ++i) {
            const auto idx = static_cast<size_t>(p) * n_voxels_ + i;
            session_.set_rhs(state_rows_[idx], state[static_cast<size_t>(i)]);
        }
}

void StageLp::add_cut(const Cut& cut) {
    if (!has_eta_)
        throw StateError("add_cut: the last fraction has no cost-to-go");
    if (static_cast<int>(cut.gradient.size()) != n_voxels_)
        throw InvalidArgument("add_cut: gradient dimension mismatch");
    for (int p = 0; p < n_real_; ++p) {
        std::vector<std::pair<int, double>> row{{col_eta_[static_cast<size_t>(p)], 1.0}};
        for (int i = 0; i < n_voxels_; ++i) {
            const double g = cut.gradient[static_cast<size_t>(i)];
            if (g != 0.0)
                row.push_back({col_iprime_[static_cast<size_t>(p) * n_voxels_ + i], -g});
        }
        session_.append_row(lp::RowType::GE, cut.intercept, row);
    }
    ++n_cuts_;
}

StageLp::Result StageLp::solve() {
    auto sol = session_.solve();
    if (sol.status != lp::LpStatus::Optimal)
        throw StateError("stage LP did not solve to optimality: " + lp::to_string(sol.status));
    Result r;
    r.status = sol.status;
    r.value = sol.objective;
    r.fluence.assign(sol.x.begin(), sol.x.begin() + n_beamlets_);
    r.bracket.assign(static_cast<size_t>(n_real_), 0.0);
    r.stage_pen.assign(static_cast<size_t>(n_real_), 0.0);
    for (int p = 0; p < n_real_; ++p) {
        const int eta_col = has_eta_ ? col_eta_[static_cast<size_t>(p)] : -1;
        for (const auto& [col, coef] : bracket_expr_[static_cast<size_t>(p)]) {
            const double term = coef * sol.x[static_cast<size_t>(col)];
            r.bracket[static_cast<size_t>(p)] += term;
            if (col != eta_col) r.stage_pen[static_cast<size_t>(p)] += term;
        }
    }
    r.state_grad.assign(static_cast<size_t>(n_voxels_), 0.0);
    for (int p = 0; p < n_real_; ++p)
        for (int i = 0; i < n_voxels_; ++i)
            r.state_grad[static_cast<size_t>(i)] +=
                sol.row_dual[static_cast<size_t>(state_rows_[static_cast<size_t>(p) * n_voxels_ + i])];
    r.next_state.assign(static_cast<size_t>(n_real_), std::vector<double>(static_cast<size_t>(n_voxels_)));
    for (int p = 0; p < n_real_; ++p)
        for (int i = 0; i < n_voxels_; ++i)
            r.next_state[static_cast<size_t>(p)][static_cast<size_t>(i)] =
                sol.x[static_cast<size_t>(col_iprime_[static_cast<size_t>(p) * n_voxels_ + i])];
    return r;
}

// ---------------------------------------------------------------------------
// Deterministic model
// ---------------------------------------------------------------------------

PlanningProblem deterministic_problem(const PatientCase& pc, double margin_mm, int fractions) {
    TissueSet structures = planning_structures(pc, margin_mm);
    return build_planning_problem(pc, structures, nullptr, {{0.0, 0.0, 0.0}}, {1.0}, fractions);
}

lp::LinearProgram extensive_deterministic_lp(const PlanningProblem& prob) {
    if (prob.n_realizations() != 1)
        throw InvalidArgument("extensive_deterministic_lp: needs the nominal-only problem");
    const int V = prob.n_voxels(), B = prob.n_beamlets, F = prob.fractions;
    const DoseMatrix& D = prob.dose[0];
    lp::LinearProgram p;
    std::vector<int> xcol(static_cast<size_t>(F) * B);
    for (int f = 0; f < F; ++f)
        for (int j = 0; j < B; ++j) xcol[static_cast<size_t>(f) * B + j] = p.add_variable(0.0);
    for (int f = 0; f < F; ++f) {
        for (int i = 0; i < V; ++i) {
            const auto& vox = prob.voxels[static_cast<size_t>(i)];
            const int tp = p.add_variable(vox.w_stage_plus);
            std::vector<std::pair<int, double>> row{{tp, 1.0}};
            for (int j = 0; j < B; ++j)
                if (D(i, j) != 0.0) row.push_back({xcol[static_cast<size_t>(f) * B + j], -D(i, j)});
            p.add_row(lp::RowType::GE, -vox.r_plus, row);
            if (vox.is_tumor) {
                const int tm = p.add_variable(vox.w_stage_minus);
                std::vector<std::pair<int, double>> row2{{tm, 1.0}};
                for (int j = 0; j < B; ++j)
                    if (D(i, j) != 0.0) row2.push_back({xcol[static_cast<size_t>(f) * B + j], D(i, j)});
                p.add_row(lp::RowType::GE, vox.r_minus, row2);
            }
        }
    }
    for (int i = 0; i < V; ++i) {
        const auto& vox = prob.voxels[static_cast<size_t>(i)];
        const int gp = p.add_variable(vox.w_end_plus);
        std::vector<std::pair<int, double>> row{{gp, 1.0}};
        for (int f = 0; f < F; ++f)
            for (int j = 0; j < B; ++j)
                if (D(i, j) != 0.0) row.push_back({xcol[static_cast<size_t>(f) * B + j], -D(i, j)});
        p.add_row(lp::RowType::GE, -vox.t_plus, row);
        if (vox.is_tumor) {
            const int gm = p.add_variable(vox.w_end_minus);
            std::vector<std::pair<int, double>> row2{{gm, 1.0}};
            for (int f = 0; f < F; ++f)
                for (int j = 0; j < B; ++j)
                    if (D(i, j) != 0.0) row2.push_back({xcol[static_cast<size_t>(f) * B + j], D(i, j)});
            p.add_row(lp::RowType::GE, vox.t_minus, row2);
        }
    }
    return p;
}

DeterministicPlan solve_deterministic(const PlanningProblem& prob) {
    if (prob.n_realizations() != 1)
        throw InvalidArgument("solve_deterministic: needs the nominal-only problem");
    const int V = prob.n_voxels(), B = prob.n_beamlets, F = prob.fractions;
    const DoseMatrix& D = prob.dose[0];
    bool equal_fractionation = true;
    for (const auto& vox : prob.voxels)
        equal_fractionation = equal_fractionation &&
                              std::abs(vox.t_plus - F * vox.r_plus) <= 1e-9 &&
                              std::abs(vox.t_minus - F * vox.r_minus) <= 1e-9;

    // Identical stages and a permutation-symmetric convex objective: an
    // optimal plan exists with the same fluence every fraction, so solve for
    // one fraction. Under equal fractionation the end penalties collapse onto
    // the per-fraction ones (gamma = F * theta at the optimum).
    lp::LinearProgram p;
    for (int j = 0; j < B; ++j) p.add_variable(0.0);
    for (int i = 0; i < V; ++i) {
        const auto& vox = prob.voxels[static_cast<size_t>(i)];
        const double cp = equal_fractionation
                              ? F * vox.w_stage_plus + F * vox.w_end_plus
                              : F * vox.w_stage_plus;
        const int tp = p.add_variable(cp);
        std::vector<std::pair<int, double>> row{{tp, 1.0}};
        for (int j = 0; j < B; ++j)
            if (D(i, j) != 0.0) row.push_back({j, -D(i, j)});
        p.add_row(lp::RowType::GE, -vox.r_plus, row);
        if (vox.is_tumor) {
            const double cm = equal_fractionation
                                  ? F * vox.w_stage_minus + F * vox.w_end_minus
                                  : F * vox.w_stage_minus;
            const int tm = p.add_variable(cm);
            std::vector<std::pair<int, double>> row2{{tm, 1.0}};
            for (int j = 0; j < B; ++j)
                if (D(i, j) != 0.0) row2.push_back({j, D(i, j)});
            p.add_row(lp::RowType::GE, vox.r_minus, row2);
        }
        if (!equal_fractionation) {
            const int gp = p.add_variable(vox.w_end_plus);
            std::vector<std::pair<int, double>> row3{{gp, 1.0}};
            for (int j = 0; j < B; ++j)
                if (D(i, j) != 0.0) row3.push_back({j, -static_cast<double>(F) * D(i, j)});
            p.add_row(lp::RowType::GE, -vox.t_plus, row3);
            if (vox.is_tumor) {
                const int gm = p.add_variable(vox.w_end_minus);
                std::vector<std::pair<int, double>> row4{{gm, 1.0}};
                for (int j = 0; j < B; ++j)
                    if (D(i, j) != 0.0) row4.push_back({j, static_cast<double>(F) * D(i, j)});
                p.add_row(lp::RowType::GE, vox.t_minus, row4);
            }
        }
    }
    auto sol = lp::solve(p);
    if (sol.status != lp::LpStatus::Optimal)
        throw StateError("deterministic model did not solve: " + lp::to_string(sol.status));
    DeterministicPlan plan;
    plan.fluence.assign(sol.x.begin(), sol.x.begin() + B);
    plan.objective = sol.objective;
    plan.fractions = F;
    return plan;
}

}  // namespace msrt
