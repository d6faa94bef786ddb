#include "oracles.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>

#include "msrt/common.hpp"

namespace msrt::test {

namespace {

void combinations(int total, int choose, std::vector<int>& current,
                  const std::function<void(const std::vector<int>&)>& visit, int start) {
    if (static_cast<int>(current.size()) == choose) {
        visit(current);
        return;
    }
    for (int i = start; i <= total - (choose - static_cast<int>(current.size())); ++i) {
        current.push_back(i);
        combinations(total, choose, current, visit, i + 1);
        current.pop_back();
    }
}

}  // namespace

std::optional<double> vertex_enumeration_optimum(const lp::LinearProgram& problem) {
    const int n = problem.num_vars();
    const int m = problem.num_rows();
    for (int j = 0; j < n; ++j) {
        if (problem.lower[j] != 0.0 || problem.upper[j] != lp::kInf)
            throw InvalidArgument("vertex oracle: only default bounds supported");
    }
    // computational form columns: structural then logical
    auto column = [&](int j) {
        Eigen::VectorXd col = Eigen::VectorXd::Zero(m);
        if (j < n) {
            for (const auto& e : problem.cols[j]) col[e.row] = e.val;
        } else {
            col[j - n] = 1.0;
        }
        return col;
    };

    bool feasible = false;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> cur;
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(problem.rhs.data(), m);
    combinations(n + m, m, cur, [&](const std::vector<int>& basis) {
        Eigen::MatrixXd B(m, m);
        for (int i = 0; i < m; ++i) B.col(i) = column(basis[i]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        lu.setThreshold(1e-9);
        if (!lu.isInvertible()) return;
        Eigen::VectorXd xb = lu.solve(b);
        if ((B * xb - b).lpNorm<Eigen::Infinity>() > 1e-6 * (1.0 + b.lpNorm<Eigen::Infinity>()))
            return;
        // bound feasibility of basics; nonbasics sit at zero which is feasible
        // for every variable class here
        double value = 0.0;
        for (int i = 0; i < m; ++i) {
            const int j = basis[i];
            const double v = xb[i];
            if (j < n) {
                if (v < -1e-9) return;
                value += problem.c[j] * v;
            } else {
                switch (problem.row_type[j - n]) {
                    case lp::RowType::LE:
                        if (v < -1e-9) return;
                        break;
                    case lp::RowType::GE:
                        if (v > 1e-9) return;
                        break;
                    case lp::RowType::EQ:
                        if (std::abs(v) > 1e-9) return;
                        break;
                }
            }
        }
        feasible = true;
        best = std::min(best, value);
    }, 0);
    if (!feasible) return std::nullopt;
    return best;
}

// ---------------------------------------------------------------------------
// Scenario-tree oracles
// ---------------------------------------------------------------------------

namespace {

struct TreeLayout {
    int f0 = 0;
    int stages = 0;        // F - f0
    int P = 0;
    std::vector<long> histories_at;  // P^k histories at relative stage k
    long paths = 0;
};

TreeLayout layout_for(const PlanningProblem& prob, int f0) {
    TreeLayout t;
    t.f0 = f0;
    t.stages = prob.fractions - f0;
    if (t.stages < 1) throw InvalidArgument("tree oracle: f0 out of range");
    t.P = prob.n_realizations();
    long h = 1;
    for (int k = 0; k < t.stages; ++k) {
        t.histories_at.push_back(h);
        h *= t.P;
    }
    t.paths = h;
    if (t.paths > 100000) throw InvalidArgument("tree oracle: tree too large");
    return t;
}

// realization of relative stage k along path s
int path_real(long s, int k, int P, int stages) {
    long div = 1;
    for (int i = stages - 1; i > k; --i) div *= P;
    return static_cast<int>((s / div) % P);
}

// history index (prefix of length k) of path s
long path_history(long s, int k, int P, int stages) {
    long div = 1;
    for (int i = stages - 1; i >= k; --i) div *= P;
    return s / div;
}

struct TreeVars {
    std::vector<int> x;           // per (stage k, history, beamlet)
    std::vector<int> theta_plus;  // per (stage k, history, realization, voxel)
    std::vector<int> theta_minus;
    std::vector<int> gamma_plus;   // per (path, voxel)
    std::vector<int> gamma_minus;  // tumor only
    std::vector<long> x_off, th_off;
};

// Builds decisions, penalty blocks and their defining rows; objective
// coefficients are left at zero (the caller weights them).
TreeVars build_tree_blocks(lp::LinearProgram& p, const PlanningProblem& prob,
                           const TreeLayout& t, const std::vector<double>& I0) {
    const int V = prob.n_voxels(), B = prob.n_beamlets;
    TreeVars tv;
    for (int k = 0; k < t.stages; ++k) {
        tv.x_off.push_back(static_cast<long>(tv.x.size()));
        for (long h = 0; h < t.histories_at[static_cast<size_t>(k)]; ++h)
            for (int j = 0; j < B; ++j) tv.x.push_back(p.add_variable(0.0));
    }
    for (int k = 0; k < t.stages; ++k) {
        tv.th_off.push_back(static_cast<long>(tv.theta_plus.size()));
        for (long h = 0; h < t.histories_at[static_cast<size_t>(k)]; ++h) {
            for (int q = 0; q < t.P; ++q) {
                const DoseMatrix& D = prob.dose[static_cast<size_t>(q)];
                for (int i = 0; i < V; ++i) {
                    const auto& vox = prob.voxels[static_cast<size_t>(i)];
                    const int xbase =
                        static_cast<int>(tv.x_off[static_cast<size_t>(k)] + h * B);
                    const int tp = p.add_variable(0.0);
                    tv.theta_plus.push_back(tp);
                    std::vector<std::pair<int, double>> row{{tp, 1.0}};
                    for (int j = 0; j < B; ++j)
                        if (D(i, j) != 0.0) row.push_back({tv.x[static_cast<size_t>(xbase + j)], -D(i, j)});
                    p.add_row(lp::RowType::GE, -vox.r_plus, row);
                    if (vox.is_tumor) {
                        const int tm = p.add_variable(0.0);
                        tv.theta_minus.push_back(tm);
                        std::vector<std::pair<int, double>> row2{{tm, 1.0}};
                        for (int j = 0; j < B; ++j)
                            if (D(i, j) != 0.0)
                                row2.push_back({tv.x[static_cast<size_t>(xbase + j)], D(i, j)});
                        p.add_row(lp::RowType::GE, vox.r_minus, row2);
                    } else {
                        tv.theta_minus.push_back(-1);
                    }
                }
            }
        }
    }
    for (long s = 0; s < t.paths; ++s) {
        for (int i = 0; i < V; ++i) {
            const auto& vox = prob.voxels[static_cast<size_t>(i)];
            const double i0 = I0.empty() ? 0.0 : I0[static_cast<size_t>(i)];
            const int gp = p.add_variable(0.0);
            tv.gamma_plus.push_back(gp);
            std::vector<std::pair<int, double>> row{{gp, 1.0}};
            for (int k = 0; k < t.stages; ++k) {
                const long h = path_history(s, k, t.P, t.stages);
                const int q = path_real(s, k, t.P, t.stages);
                const DoseMatrix& D = prob.dose[static_cast<size_t>(q)];
                const int xbase = static_cast<int>(tv.x_off[static_cast<size_t>(k)] + h * B);
                for (int j = 0; j < B; ++j)
                    if (D(i, j) != 0.0) row.push_back({tv.x[static_cast<size_t>(xbase + j)], -D(i, j)});
            }
            p.add_row(lp::RowType::GE, i0 - vox.t_plus, row);
            if (vox.is_tumor) {
                const int gm = p.add_variable(0.0);
                tv.gamma_minus.push_back(gm);
                std::vector<std::pair<int, double>> row2{{gm, 1.0}};
                for (int k = 0; k < t.stages; ++k) {
                    const long h = path_history(s, k, t.P, t.stages);
                    const int q = path_real(s, k, t.P, t.stages);
                    const DoseMatrix& D = prob.dose[static_cast<size_t>(q)];
                    const int xbase = static_cast<int>(tv.x_off[static_cast<size_t>(k)] + h * B);
                    for (int j = 0; j < B; ++j)
                        if (D(i, j) != 0.0)
                            row2.push_back({tv.x[static_cast<size_t>(xbase + j)], D(i, j)});
                }
                p.add_row(lp::RowType::GE, vox.t_minus - i0, row2);
            } else {
                tv.gamma_minus.push_back(-1);
            }
        }
    }
    return tv;
}

long theta_block_index(const TreeVars& tv, const TreeLayout& t, int k, long h, int q, int i,
                       int V) {
    return tv.th_off[static_cast<size_t>(k)] + ((h * t.P + q) * V + i);
}

}  // namespace

double extensive_expected_value(const PlanningProblem& prob, int f0,
                                const std::vector<double>& initial_state) {
    const TreeLayout t = layout_for(prob, f0);
    const int V = prob.n_voxels();
    lp::LinearProgram p;
    TreeVars tv = build_tree_blocks(p, prob, t, initial_state);
    // probability-weighted objective
    for (int k = 0; k < t.stages; ++k) {
        for (long h = 0; h < t.histories_at[static_cast<size_t>(k)]; ++h) {
            // probability of reaching history h at stage k
            double ph = 1.0;
            long rest = h;
            for (int kk = k - 1; kk >= 0; --kk) {
                ph *= prob.probs[static_cast<size_t>(rest % t.P)];
                rest /= t.P;
            }
            for (int q = 0; q < t.P; ++q) {
                const double w = ph * prob.probs[static_cast<size_t>(q)];
                for (int i = 0; i < V; ++i) {
                    const auto& vox = prob.voxels[static_cast<size_t>(i)];
                    const long bi = theta_block_index(tv, t, k, h, q, i, V);
                    p.c[static_cast<size_t>(tv.theta_plus[static_cast<size_t>(bi)])] +=
                        w * vox.w_stage_plus;
                    if (vox.is_tumor)
                        p.c[static_cast<size_t>(tv.theta_minus[static_cast<size_t>(bi)])] +=
                            w * vox.w_stage_minus;
                }
            }
        }
    }
    for (long s = 0; s < t.paths; ++s) {
        double ps = 1.0;
        for (int k = 0; k < t.stages; ++k)
            ps *= prob.probs[static_cast<size_t>(path_real(s, k, t.P, t.stages))];
        for (int i = 0; i < V; ++i) {
            const auto& vox = prob.voxels[static_cast<size_t>(i)];
            p.c[static_cast<size_t>(tv.gamma_plus[static_cast<size_t>(s * V + i)])] +=
                ps * vox.w_end_plus;
            if (vox.is_tumor)
                p.c[static_cast<size_t>(tv.gamma_minus[static_cast<size_t>(s * V + i)])] +=
                    ps * vox.w_end_minus;
        }
    }
    auto sol = lp::solve(p);
    if (sol.status != lp::LpStatus::Optimal)
        throw StateError("extensive oracle: solve failed: " + lp::to_string(sol.status));
    return sol.objective;
}

double extensive_worst_case_value(const PlanningProblem& prob, int f0,
                                  const std::vector<double>& initial_state) {
    const TreeLayout t = layout_for(prob, f0);
    const int V = prob.n_voxels();
    lp::LinearProgram p;
    TreeVars tv = build_tree_blocks(p, prob, t, initial_state);
    const int epi = p.add_variable(1.0, -lp::kInf, lp::kInf);
    // one epigraph row per path: t >= total path cost
    for (long s = 0; s < t.paths; ++s) {
        std::vector<std::pair<int, double>> row{{epi, 1.0}};
        for (int k = 0; k < t.stages; ++k) {
            const long h = path_history(s, k, t.P, t.stages);
            const int q = path_real(s, k, t.P, t.stages);
            for (int i = 0; i < V; ++i) {
                const auto& vox = prob.voxels[static_cast<size_t>(i)];
                const long bi = theta_block_index(tv, t, k, h, q, i, V);
                row.push_back({tv.theta_plus[static_cast<size_t>(bi)], -vox.w_stage_plus});
                if (vox.is_tumor)
                    row.push_back({tv.theta_minus[static_cast<size_t>(bi)], -vox.w_stage_minus});
            }
        }
        for (int i = 0; i < V; ++i) {
            const auto& vox = prob.voxels[static_cast<size_t>(i)];
            row.push_back({tv.gamma_plus[static_cast<size_t>(s * V + i)], -vox.w_end_plus});
            if (vox.is_tumor)
                row.push_back({tv.gamma_minus[static_cast<size_t>(s * V + i)], -vox.w_end_minus});
        }
        p.add_row(lp::RowType::GE, 0.0, row);
    }
    auto sol = lp::solve(p);
    if (sol.status != lp::LpStatus::Optimal)
        throw StateError("minimax oracle: solve failed: " + lp::to_string(sol.status));
    return sol.objective;
}

PlanningProblem random_tiny_problem(std::mt19937_64& rng, int fractions, int realizations,
                                    int voxels, int beamlets) {
    std::uniform_real_distribution<double> d01(0.0, 1.0), weight(0.2, 1.5);
    PlanningProblem prob;
    prob.fractions = fractions;
    prob.n_beamlets = beamlets;
    prob.tissue_names = {"Tumor_0", "OAR_0"};
    for (int i = 0; i < voxels; ++i) {
        PlanningVoxel v;
        v.tissue = i < (voxels + 1) / 2 ? 0 : 1;
        v.voxel_id = i;
        v.is_tumor = v.tissue == 0;
        if (v.is_tumor) {
            v.t_minus = 1.0 + 2.0 * d01(rng);
            v.t_plus = v.t_minus + 1.0 + 2.0 * d01(rng);
        } else {
            v.t_minus = 0.0;
            v.t_plus = 0.5 + 2.0 * d01(rng);
        }
        v.r_plus = v.t_plus / fractions;
        v.r_minus = v.t_minus / fractions;
        v.w_stage_plus = weight(rng);
        v.w_stage_minus = v.is_tumor ? weight(rng) : 0.0;
        v.w_end_plus = weight(rng);
        v.w_end_minus = v.is_tumor ? weight(rng) : 0.0;
        prob.voxels.push_back(v);
    }
    std::vector<double> q(static_cast<size_t>(realizations));
    double qs = 0.0;
    for (auto& v : q) {
        v = 0.2 + d01(rng);
        qs += v;
    }
    for (auto& v : q) v /= qs;
    // exact unit sum for the validator
    double partial = 0.0;
    for (size_t i = 0; i + 1 < q.size(); ++i) partial += q[i];
    q.back() = 1.0 - partial;
    prob.probs = q;
    for (int p = 0; p < realizations; ++p) {
        DoseMatrix D(voxels, beamlets);
        for (int i = 0; i < voxels; ++i)
            for (int j = 0; j < beamlets; ++j) D(i, j) = d01(rng) < 0.2 ? 0.0 : d01(rng);
        prob.dose.push_back(D);
    }
    prob.validate();
    return prob;
}

}  // namespace msrt::test
