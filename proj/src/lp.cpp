#include "msrt/lp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "msrt/common.hpp"

namespace msrt::lp {

std::string to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
        case LpStatus::IterLimit: return "iter_limit";
    }
    return "?";
}

int LinearProgram::add_variable(double cost, double lower_b, double upper_b,
                                const std::string& name) {
    if (!(lower_b <= upper_b)) throw InvalidArgument("add_variable: lower > upper");
    c.push_back(cost);
    lower.push_back(lower_b);
    upper.push_back(upper_b);
    cols.emplace_back();
    var_names.push_back(name);
    return num_vars() - 1;
}

int LinearProgram::add_row(RowType type, double rhs_value,
                           const std::vector<std::pair<int, double>>& entries,
                           const std::string& name) {
    const int r = num_rows();
    row_type.push_back(type);
    rhs.push_back(rhs_value);
    row_names.push_back(name);
    for (const auto& [col, val] : entries) {
        if (col < 0 || col >= num_vars()) throw InvalidArgument("add_row: bad column index");
        if (val == 0.0) continue;
        auto& entries_of_col = cols[col];
        if (!entries_of_col.empty() && entries_of_col.back().row == r)
            entries_of_col.back().val += val;
        else
            entries_of_col.push_back({r, val});
    }
    return r;
}

namespace {

constexpr double kTiny = 1e-12;

// Computational form: n structural columns plus one logical column per row,
// A x + s = b, with logical bounds encoding the row type.
class Simplex {
public:
    void load(const LinearProgram& lp, const SolveOptions& opts) {
        opts_ = opts;
        n_ = lp.num_vars();
        m_ = lp.num_rows();
        cols_ = lp.cols;
        cost_ = lp.c;
        lb_ = lp.lower;
        ub_ = lp.upper;
        b_ = lp.rhs;
        row_type_ = lp.row_type;
        cost_.resize(n_ + m_, 0.0);
        lb_.resize(n_ + m_);
        ub_.resize(n_ + m_);
        for (int r = 0; r < m_; ++r) {
            switch (row_type_[r]) {
                case RowType::LE: lb_[n_ + r] = 0.0; ub_[n_ + r] = kInf; break;
                case RowType::GE: lb_[n_ + r] = -kInf; ub_[n_ + r] = 0.0; break;
                case RowType::EQ: lb_[n_ + r] = 0.0; ub_[n_ + r] = 0.0; break;
            }
        }
        bnorm_ = 1.0;
        for (double v : b_) bnorm_ = std::max(bnorm_, std::abs(v));
        factored_ = false;
        iters_ = 0;
        phase1_iters_ = 0;
    }

    void append_row(RowType type, double rhs_value,
                    const std::vector<std::pair<int, double>>& entries) {
        // Extends the computational form in place; the new logical enters the
        // basis so the old factorization is simply invalidated.
        const int r = m_;
        ++m_;
        row_type_.push_back(type);
        b_.push_back(rhs_value);
        bnorm_ = std::max(bnorm_, std::abs(rhs_value));
        // shift logical columns: logical j lives at index n_ + j, so insert
        // bounds/cost for the new logical at the end.
        cost_.push_back(0.0);
        switch (type) {
            case RowType::LE: lb_.push_back(0.0); ub_.push_back(kInf); break;
            case RowType::GE: lb_.push_back(-kInf); ub_.push_back(0.0); break;
            case RowType::EQ: lb_.push_back(0.0); ub_.push_back(0.0); break;
        }
        for (const auto& [col, val] : entries) {
            if (val != 0.0) cols_[col].push_back({r, val});
        }
        if (!vstat_.empty()) {
            vstat_.push_back(VarStatus::Basic);
            basic_.push_back(n_ + r);
        }
        factored_ = false;
    }

    void set_rhs(int row, double value) {
        b_[row] = value;
        bnorm_ = std::max(bnorm_, std::abs(value));
    }

    void set_basis(const Basis* warm) {
        const int total = n_ + m_;
        vstat_.assign(total, VarStatus::NonbasicLower);
        basic_.clear();
        bool ok = false;
        if (warm && static_cast<int>(warm->status.size()) == total) {
            int nb = 0;
            for (int j = 0; j < total; ++j)
                if (warm->status[j] == VarStatus::Basic) ++nb;
            if (nb == m_) {
                vstat_ = warm->status;
                for (int j = 0; j < total; ++j)
                    if (vstat_[j] == VarStatus::Basic) basic_.push_back(j);
                ok = true;
            }
        }
        if (!ok) {
            for (int j = 0; j < n_; ++j) vstat_[j] = default_nonbasic_status(j);
            for (int r = 0; r < m_; ++r) {
                vstat_[n_ + r] = VarStatus::Basic;
                basic_.push_back(n_ + r);
            }
        }
        factored_ = false;
    }

    bool has_basis() const { return !vstat_.empty(); }

    LpStatus run_primal() {
        if (!ensure_factored()) return LpStatus::IterLimit;
        compute_x();
        LpStatus st = phase1();
        if (st != LpStatus::Optimal) return st;
        return phase2();
    }

    // Dual simplex from the current (dual-feasible) basis; falls back to the
    // primal path when dual feasibility does not hold.
    LpStatus run_dual_then_primal() {
        if (!ensure_factored()) return LpStatus::IterLimit;
        compute_x();
        if (dual_feasible()) {
            LpStatus st = dual_simplex();
            if (st == LpStatus::Optimal || st == LpStatus::Infeasible) return st;
        }
        return run_primal();
    }

    LpSolution extract(const LinearProgram& lp, LpStatus st) {
        LpSolution sol;
        sol.status = st;
        sol.iterations = iters_;
        sol.phase1_iterations = phase1_iters_;
        sol.basis.status = vstat_;
        sol.x.assign(n_, 0.0);
        for (int j = 0; j < n_; ++j) sol.x[j] = value_of(j);
        sol.objective = 0.0;
        for (int j = 0; j < n_; ++j) sol.objective += lp.c[j] * sol.x[j];
        if (st == LpStatus::Optimal) {
            std::vector<double> y = btran(basic_costs());
            sol.row_dual = y;
            sol.reduced_cost.assign(n_, 0.0);
            for (int j = 0; j < n_; ++j) sol.reduced_cost[j] = cost_[j] - col_dot(j, y);
        }
        return sol;
    }

    long iterations() const { return iters_; }

private:
    VarStatus default_nonbasic_status(int j) const {
        if (lb_[j] > -kInf) return VarStatus::NonbasicLower;
        if (ub_[j] < kInf) return VarStatus::NonbasicUpper;
        return VarStatus::NonbasicFree;
    }

    double value_of(int j) const {
        if (vstat_[j] == VarStatus::Basic) {
            return xbasic_[pos_in_basis_.at(j)];
        }
        switch (vstat_[j]) {
            case VarStatus::NonbasicLower: return lb_[j];
            case VarStatus::NonbasicUpper: return ub_[j];
            default: return 0.0;
        }
    }

    std::vector<double> basic_costs() const {
        std::vector<double> cb(m_);
        for (int i = 0; i < m_; ++i) cb[i] = cost_[basic_[i]];
        return cb;
    }

    double col_dot(int j, const std::vector<double>& y) const {
        if (j >= n_) return y[j - n_];
        double s = 0.0;
        for (const auto& e : cols_[j]) s += e.val * y[e.row];
        return s;
    }

    // dense column of variable j in computational form
    void fill_column(int j, Eigen::VectorXd& out) const {
        out.setZero(m_);
        if (j >= n_) {
            out[j - n_] = 1.0;
        } else {
            for (const auto& e : cols_[j]) out[e.row] = e.val;
        }
    }

    bool ensure_factored() {
        if (factored_) return true;
        pos_in_basis_.clear();
        for (int i = 0; i < m_; ++i) pos_in_basis_[basic_[i]] = i;
        if (m_ == 0) {
            factored_ = true;
            etas_.clear();
            return true;
        }
        Eigen::MatrixXd B(m_, m_);
        Eigen::VectorXd colv(m_);
        for (int i = 0; i < m_; ++i) {
            fill_column(basic_[i], colv);
            B.col(i) = colv;
        }
        lu_.compute(B);
        etas_.clear();
        // Singular or near-singular basis: repair by replacing dependent
        // columns with their row's logical.
        if (!lu_solve_ok()) {
            Eigen::FullPivLU<Eigen::MatrixXd> full(B);
            full.setThreshold(1e-10);
            if (full.rank() < m_) {
                repair_basis();
                for (int i = 0; i < m_; ++i) {
                    fill_column(basic_[i], colv);
                    B.col(i) = colv;
                }
                lu_.compute(B);
            }
        }
        factored_ = true;
        return true;
    }

    bool lu_solve_ok() {
        if (m_ == 0) return true;
        // cheap conditioning probe
        Eigen::VectorXd e = Eigen::VectorXd::Ones(m_);
        Eigen::VectorXd z = lu_.solve(e);
        return z.allFinite();
    }

    void repair_basis() {
        // Greedy: keep structural columns that extend the span, fill the rest
        // with logicals of uncovered rows.
        Eigen::MatrixXd M(m_, m_);
        std::vector<int> chosen;
        Eigen::VectorXd colv(m_);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
        std::vector<int> candidates = basic_;
        std::vector<char> used_row(m_, 0);
        Eigen::MatrixXd acc(m_, 0);
        for (int idx : candidates) {
            if (static_cast<int>(chosen.size()) == m_) break;
            fill_column(idx, colv);
            Eigen::MatrixXd trial(m_, acc.cols() + 1);
            trial << acc, colv;
            qr.compute(trial);
            if (qr.rank() == trial.cols()) {
                acc = trial;
                chosen.push_back(idx);
            }
        }
        for (int r = 0; r < m_ && static_cast<int>(chosen.size()) < m_; ++r) {
            const int j = n_ + r;
            if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
            fill_column(j, colv);
            Eigen::MatrixXd trial(m_, acc.cols() + 1);
            trial << acc, colv;
            qr.compute(trial);
            if (qr.rank() == trial.cols()) {
                acc = trial;
                chosen.push_back(j);
            }
        }
        for (int j : basic_)
            if (std::find(chosen.begin(), chosen.end(), j) == chosen.end())
                vstat_[j] = default_nonbasic_status(j);
        basic_ = chosen;
        for (int j : basic_) vstat_[j] = VarStatus::Basic;
        pos_in_basis_.clear();
        for (int i = 0; i < m_; ++i) pos_in_basis_[basic_[i]] = i;
    }

    std::vector<double> ftran(const std::vector<double>& v) const {
        if (m_ == 0) return {};
        Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(v.data(), m_);
        z = lu_.solve(z);
        for (const auto& eta : etas_) {
            const double t = z[eta.r] / eta.w[eta.r];
            if (t != 0.0) {
                z -= t * eta.w;
                z[eta.r] = t;
            } else {
                z[eta.r] = 0.0;
            }
        }
        return {z.data(), z.data() + m_};
    }

    std::vector<double> btran(const std::vector<double>& v) const {
        if (m_ == 0) return {};
        Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(v.data(), m_);
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            const double ur = u[it->r];
            const double dotv = it->w.dot(u) - it->w[it->r] * ur;
            u[it->r] = (ur - dotv) / it->w[it->r];
        }
        Eigen::VectorXd y = lu_.transpose().solve(u);
        return {y.data(), y.data() + m_};
    }

    void compute_x() {
        std::vector<double> r = b_;
        for (int j = 0; j < n_ + m_; ++j) {
            if (vstat_[j] == VarStatus::Basic) continue;
            const double v = value_of(j);
            if (v == 0.0) continue;
            if (j >= n_) {
                r[j - n_] -= v;
            } else {
                for (const auto& e : cols_[j]) r[e.row] -= e.val * v;
            }
        }
        auto xb = ftran(r);
        xbasic_.assign(xb.begin(), xb.end());
    }

    double primal_infeasibility() const {
        double s = 0.0;
        for (int i = 0; i < m_; ++i) {
            const int j = basic_[i];
            if (xbasic_[i] < lb_[j]) s += lb_[j] - xbasic_[i];
            if (xbasic_[i] > ub_[j]) s += xbasic_[i] - ub_[j];
        }
        return s;
    }

    bool dual_feasible() {
        auto y = btran(basic_costs());
        const double tol = opts_.tol_dual * 10.0;
        for (int j = 0; j < n_ + m_; ++j) {
            if (vstat_[j] == VarStatus::Basic) continue;
            if (lb_[j] == ub_[j]) continue;
            const double d = cost_[j] - col_dot(j, y);
            if (vstat_[j] == VarStatus::NonbasicLower && d < -tol) return false;
            if (vstat_[j] == VarStatus::NonbasicUpper && d > tol) return false;
            if (vstat_[j] == VarStatus::NonbasicFree && std::abs(d) > tol) return false;
        }
        return true;
    }

    long iter_cap() const {
        if (opts_.max_iters > 0) return opts_.max_iters;
        const long mn = static_cast<long>(m_) + n_;
        return 10 * mn * mn + 1000;
    }

    // ------------------------------------------------------------------
    // Primal simplex. phase==1 minimizes total bound violation of basics;
    // phase==2 minimizes the true cost from a feasible point.
    // ------------------------------------------------------------------

    LpStatus phase1() {
        const double ftol = opts_.tol_feas * (1.0 + bnorm_);
        long degen_run = 0;
        const long bland_window = std::max<long>(200, m_);
        while (true) {
            if (primal_infeasibility() <= ftol) return LpStatus::Optimal;
            if (iters_ >= iter_cap()) return LpStatus::IterLimit;
            std::vector<double> cb(m_, 0.0);
            for (int i = 0; i < m_; ++i) {
                const int j = basic_[i];
                if (xbasic_[i] < lb_[j] - kTiny) cb[i] = -1.0;
                else if (xbasic_[i] > ub_[j] + kTiny) cb[i] = 1.0;
            }
            auto y = btran(cb);
            const bool bland = degen_run > bland_window;
            int q = -1;
            double best = opts_.tol_dual;
            int sigma = +1;
            for (int j = 0; j < n_ + m_; ++j) {
                if (vstat_[j] == VarStatus::Basic || lb_[j] == ub_[j]) continue;
                const double d = -col_dot(j, y);  // phase-1 cost of nonbasics is 0
                double viol = 0.0;
                int sg = 0;
                if (vstat_[j] == VarStatus::NonbasicLower && d < -opts_.tol_dual) {
                    viol = -d; sg = +1;
                } else if (vstat_[j] == VarStatus::NonbasicUpper && d > opts_.tol_dual) {
                    viol = d; sg = -1;
                } else if (vstat_[j] == VarStatus::NonbasicFree && std::abs(d) > opts_.tol_dual) {
                    viol = std::abs(d); sg = d < 0 ? +1 : -1;
                }
                if (sg != 0 && viol > best) {
                    q = j; best = viol; sigma = sg;
                    if (bland) break;
                }
            }
            if (q < 0) return LpStatus::Infeasible;  // phase-1 optimal but infeasible
            const double step = pivot(q, sigma, /*phase1=*/true);
            if (step < 0) return LpStatus::Infeasible;  // no blocking: numerical dead end
            ++iters_;
            ++phase1_iters_;
            degen_run = step <= 1e-10 ? degen_run + 1 : 0;
        }
    }

    LpStatus phase2() {
        long degen_run = 0;
        const long bland_window = std::max<long>(200, m_);
        while (true) {
            if (iters_ >= iter_cap()) return LpStatus::IterLimit;
            auto y = btran(basic_costs());
            const bool bland = degen_run > bland_window;
            int q = -1;
            double best = opts_.tol_dual;
            int sigma = +1;
            for (int j = 0; j < n_ + m_; ++j) {
                if (vstat_[j] == VarStatus::Basic || lb_[j] == ub_[j]) continue;
                const double d = cost_[j] - col_dot(j, y);
                double viol = 0.0;
                int sg = 0;
                if (vstat_[j] == VarStatus::NonbasicLower && d < -opts_.tol_dual) {
                    viol = -d; sg = +1;
                } else if (vstat_[j] == VarStatus::NonbasicUpper && d > opts_.tol_dual) {
                    viol = d; sg = -1;
                } else if (vstat_[j] == VarStatus::NonbasicFree && std::abs(d) > opts_.tol_dual) {
                    viol = std::abs(d); sg = d < 0 ? +1 : -1;
                }
                if (sg != 0 && viol > best) {
                    q = j; best = viol; sigma = sg;
                    if (bland) break;
                }
            }
            if (q < 0) return LpStatus::Optimal;
            const double step = pivot(q, sigma, /*phase1=*/false);
            if (step < 0) return LpStatus::Unbounded;
            ++iters_;
            degen_run = step <= 1e-10 ? degen_run + 1 : 0;
        }
    }

    // Moves entering variable q in direction sigma; returns the step taken or
    // -1 when unblocked. Handles bound flips and basis updates.
    double pivot(int q, int sigma, bool phase1_mode) {
        Eigen::VectorXd aq(m_);
        fill_column(q, aq);
        std::vector<double> w = ftran({aq.data(), aq.data() + m_});

        double t_best = kInf;
        int leave = -1;       // position in basis
        double leave_to = 0;  // bound the leaving variable lands on
        for (int i = 0; i < m_; ++i) {
            const int j = basic_[i];
            const double rate = -sigma * w[i];
            if (std::abs(rate) <= opts_.tol_pivot) continue;
            const double xv = xbasic_[i];
            double bound = kInf;
            if (phase1_mode && xv < lb_[j] - kTiny) {
                // infeasible below: blocks only when moving up, at its lower bound
                if (rate > 0) bound = lb_[j];
            } else if (phase1_mode && xv > ub_[j] + kTiny) {
                if (rate < 0) bound = ub_[j];
            } else {
                bound = rate > 0 ? ub_[j] : lb_[j];
            }
            if (bound == kInf || bound == -kInf) continue;
            double t = (bound - xv) / rate;
            if (t < 0) t = 0;  // already at/over the bound: degenerate block
            if (t < t_best - kTiny || (t < t_best + kTiny && (leave < 0 || basic_[i] < basic_[leave]))) {
                t_best = t;
                leave = i;
                leave_to = bound;
            }
        }
        // entering variable's own opposite bound
        double t_flip = kInf;
        if (vstat_[q] != VarStatus::NonbasicFree) {
            const double range = ub_[q] - lb_[q];
            if (range < kInf) t_flip = range;
        }
        if (t_flip < t_best) {
            // bound flip: no basis change
            const double delta = sigma * t_flip;
            for (int i = 0; i < m_; ++i) xbasic_[i] -= delta * w[i];
            vstat_[q] = vstat_[q] == VarStatus::NonbasicLower ? VarStatus::NonbasicUpper
                                                              : VarStatus::NonbasicLower;
            return t_flip;
        }
        if (leave < 0) return -1.0;

        const double delta = sigma * t_best;
        for (int i = 0; i < m_; ++i) xbasic_[i] -= delta * w[i];
        const int jl = basic_[leave];
        const double enter_value = value_of(q) + delta;
        // basis exchange
        vstat_[jl] = (leave_to == lb_[jl])
                         ? VarStatus::NonbasicLower
                         : (leave_to == ub_[jl] ? VarStatus::NonbasicUpper : VarStatus::NonbasicLower);
        if (lb_[jl] == -kInf && ub_[jl] == kInf) vstat_[jl] = VarStatus::NonbasicFree;
        vstat_[q] = VarStatus::Basic;
        basic_[leave] = q;
        pos_in_basis_.erase(jl);
        pos_in_basis_[q] = leave;
        xbasic_[leave] = enter_value;
        push_eta(leave, w);
        return t_best;
    }

    // ------------------------------------------------------------------
    // Dual simplex for warm restarts after RHS changes / appended rows.
    // ------------------------------------------------------------------
    LpStatus dual_simplex() {
        const double ftol = opts_.tol_feas * (1.0 + bnorm_);
        while (true) {
            if (iters_ >= iter_cap()) return LpStatus::IterLimit;
            int r = -1;
            double worst = ftol;
            int e_dir = 0;
            for (int i = 0; i < m_; ++i) {
                const int j = basic_[i];
                double v = 0.0;
                int dir = 0;
                if (xbasic_[i] < lb_[j]) { v = lb_[j] - xbasic_[i]; dir = -1; }
                else if (xbasic_[i] > ub_[j]) { v = xbasic_[i] - ub_[j]; dir = +1; }
                if (v > worst) { worst = v; r = i; e_dir = dir; }
            }
            if (r < 0) return LpStatus::Optimal;

            std::vector<double> er(m_, 0.0);
            er[r] = 1.0;
            auto rho = btran(er);
            auto y = btran(basic_costs());

            int q = -1;
            double theta_best = kInf;
            double alpha_q = 0.0;
            for (int j = 0; j < n_ + m_; ++j) {
                if (vstat_[j] == VarStatus::Basic || lb_[j] == ub_[j]) continue;
                const double alpha = col_dot(j, rho);
                if (std::abs(alpha) <= opts_.tol_pivot) continue;
                bool eligible = false;
                if (vstat_[j] == VarStatus::NonbasicLower)
                    eligible = (e_dir == -1 && alpha < 0) || (e_dir == +1 && alpha > 0);
                else if (vstat_[j] == VarStatus::NonbasicUpper)
                    eligible = (e_dir == -1 && alpha > 0) || (e_dir == +1 && alpha < 0);
                else
                    eligible = true;  // free nonbasic
                if (!eligible) continue;
                const double d = cost_[j] - col_dot(j, y);
                const double theta = std::abs(d) / std::abs(alpha);
                if (theta < theta_best - kTiny ||
                    (theta < theta_best + kTiny && (q < 0 || j < q))) {
                    theta_best = theta;
                    q = j;
                    alpha_q = alpha;
                }
            }
            if (q < 0) return LpStatus::Infeasible;

            Eigen::VectorXd aq(m_);
            fill_column(q, aq);
            std::vector<double> w = ftran({aq.data(), aq.data() + m_});
            // use the ftran value for the pivot element (rho-based alpha may
            // drift numerically); bail to refactorization when they disagree.
            const double wr = w[r];
            if (std::abs(wr) <= opts_.tol_pivot ||
                std::abs(wr - alpha_q) > 1e-5 * (1.0 + std::abs(wr))) {
                refactor_now();
                compute_x();
                continue;
            }
            const int jl = basic_[r];
            const double target = e_dir == -1 ? lb_[jl] : ub_[jl];
            const double delta = (xbasic_[r] - target) / wr;
            for (int i = 0; i < m_; ++i) xbasic_[i] -= delta * w[i];
            const double enter_value = value_of(q) + delta;
            vstat_[jl] = target == lb_[jl] ? VarStatus::NonbasicLower : VarStatus::NonbasicUpper;
            vstat_[q] = VarStatus::Basic;
            basic_[r] = q;
            pos_in_basis_.erase(jl);
            pos_in_basis_[q] = r;
            xbasic_[r] = enter_value;
            push_eta(r, w);
            ++iters_;
        }
    }

    struct Eta {
        int r;
        Eigen::VectorXd w;
    };

    void push_eta(int r, const std::vector<double>& w) {
        Eta e;
        e.r = r;
        e.w = Eigen::Map<const Eigen::VectorXd>(w.data(), m_);
        etas_.push_back(std::move(e));
        if (static_cast<int>(etas_.size()) >= opts_.refactor_every) {
            refactor_now();
            compute_x();
        }
    }

    void refactor_now() {
        factored_ = false;
        ensure_factored();
    }

public:
    // final consistency pass: refactorize and recompute from scratch so the
    // reported solution meets the advertised residuals
    void polish() {
        refactor_now();
        compute_x();
    }

private:
    SolveOptions opts_;
    int n_ = 0, m_ = 0;
    std::vector<std::vector<LinearProgram::Entry>> cols_;
    std::vector<double> cost_, lb_, ub_, b_;
    std::vector<RowType> row_type_;
    double bnorm_ = 1.0;

    std::vector<VarStatus> vstat_;
    std::vector<int> basic_;
    std::unordered_map<int, int> pos_in_basis_;
    std::vector<double> xbasic_;

    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    std::vector<Eta> etas_;
    bool factored_ = false;
    long iters_ = 0;
    long phase1_iters_ = 0;
};

}  // namespace

LpSolution solve(const LinearProgram& lp, const Basis* warm, const SolveOptions& opts) {
    for (double v : lp.c)
        if (!std::isfinite(v)) throw InvalidArgument("solve: non-finite objective coefficient");
    for (const auto& col : lp.cols)
        for (const auto& e : col)
            if (!std::isfinite(e.val)) throw InvalidArgument("solve: non-finite matrix entry");
    Simplex s;
    s.load(lp, opts);
    s.set_basis(warm);
    LpStatus st = s.run_primal();
    if (st == LpStatus::Optimal) s.polish();
    return s.extract(lp, st);
}

double dual_wrt_rhs(const LpSolution& sol, int row) {
    if (sol.status != LpStatus::Optimal)
        throw StateError("dual_wrt_rhs: solution is not optimal");
    if (row < 0 || row >= static_cast<int>(sol.row_dual.size()))
        throw InvalidArgument("dual_wrt_rhs: bad row index");
    return sol.row_dual[row];
}

std::string check_solution(const LinearProgram& lp, const LpSolution& sol) {
    if (sol.status != LpStatus::Optimal) return "not optimal";
    std::ostringstream bad;
    double bnorm = 1.0;
    for (double v : lp.rhs) bnorm = std::max(bnorm, std::abs(v));
    const double ftol = 1e-7 * bnorm;
    // primal feasibility
    std::vector<double> act(lp.num_rows(), 0.0);
    for (int j = 0; j < lp.num_vars(); ++j) {
        for (const auto& e : lp.cols[j]) act[e.row] += e.val * sol.x[j];
        if (sol.x[j] < lp.lower[j] - ftol || sol.x[j] > lp.upper[j] + ftol)
            bad << "bound violation on x" << j << "; ";
    }
    for (int r = 0; r < lp.num_rows(); ++r) {
        const double slack = lp.rhs[r] - act[r];
        switch (lp.row_type[r]) {
            case RowType::LE:
                if (slack < -ftol) bad << "row " << r << " violated; ";
                break;
            case RowType::GE:
                if (slack > ftol) bad << "row " << r << " violated; ";
                break;
            case RowType::EQ:
                if (std::abs(slack) > ftol) bad << "row " << r << " violated; ";
                break;
        }
    }
    // dual objective = y'b + sum over nonbasic bounds of reduced-cost terms;
    // use complementary slackness + duality gap via direct computation.
    double dual_obj = 0.0;
    for (int r = 0; r < lp.num_rows(); ++r) dual_obj += sol.row_dual[r] * lp.rhs[r];
    for (int j = 0; j < lp.num_vars(); ++j) {
        const double d = sol.reduced_cost[j];
        if (d > 0 && lp.lower[j] > -kInf) dual_obj += d * lp.lower[j];
        else if (d < 0 && lp.upper[j] < kInf) dual_obj += d * lp.upper[j];
        else if (std::abs(d) > 1e-7 && lp.lower[j] == -kInf && lp.upper[j] == kInf)
            bad << "free variable x" << j << " has nonzero reduced cost; ";
    }
    const double gap = std::abs(dual_obj - sol.objective);
    if (gap > 1e-6 * (1.0 + std::abs(sol.objective)))
        bad << "duality gap " << gap << "; ";
    // complementary slackness: y_r * slack_r ~ 0
    for (int r = 0; r < lp.num_rows(); ++r) {
        const double slack = lp.rhs[r] - act[r];
        if (std::abs(sol.row_dual[r] * slack) > 1e-6 * (1.0 + std::abs(sol.objective)))
            bad << "complementary slackness row " << r << "; ";
    }
    return bad.str();
}

// ---------------------------------------------------------------------------
// SimplexSession
// ---------------------------------------------------------------------------

struct SimplexSession::Impl {
    Simplex core;
    LinearProgram lp;
    SolveOptions opts;
    bool loaded = false;
    bool have_solution = false;
};

SimplexSession::SimplexSession() : impl_(new Impl) {}
SimplexSession::~SimplexSession() = default;
SimplexSession::SimplexSession(SimplexSession&&) noexcept = default;
SimplexSession& SimplexSession::operator=(SimplexSession&&) noexcept = default;

void SimplexSession::load(const LinearProgram& lp, const SolveOptions& opts) {
    impl_->lp = lp;
    impl_->opts = opts;
    impl_->core.load(lp, opts);
    impl_->core.set_basis(nullptr);
    impl_->loaded = true;
    impl_->have_solution = false;
}

bool SimplexSession::loaded() const { return impl_->loaded; }

void SimplexSession::set_rhs(int row, double value) {
    impl_->lp.set_rhs(row, value);
    impl_->core.set_rhs(row, value);
}

int SimplexSession::append_row(RowType type, double rhs_value,
                               const std::vector<std::pair<int, double>>& entries) {
    const int r = impl_->lp.add_row(type, rhs_value, entries);
    impl_->core.append_row(type, rhs_value, entries);
    return r;
}

LpSolution SimplexSession::solve() {
    if (!impl_->loaded) throw StateError("SimplexSession: not loaded");
    LpStatus st;
    if (impl_->have_solution) {
        st = impl_->core.run_dual_then_primal();
    } else {
        st = impl_->core.run_primal();
    }
    if (st == LpStatus::Optimal) {
        impl_->core.polish();
        impl_->have_solution = true;
    } else {
        impl_->have_solution = false;
    }
    return impl_->core.extract(impl_->lp, st);
}

// ---------------------------------------------------------------------------
// LP text format
// ---------------------------------------------------------------------------

namespace {

std::string var_name(const LinearProgram& lp, int j) {
    if (!lp.var_names[j].empty()) return lp.var_names[j];
    return "x" + std::to_string(j + 1);
}

std::string row_name(const LinearProgram& lp, int r) {
    if (!lp.row_names[r].empty()) return lp.row_names[r];
    return "c" + std::to_string(r + 1);
}

void append_term(std::ostringstream& os, double coeff, const std::string& name, bool first) {
    if (first) {
        os << (coeff < 0 ? "- " : "");
    } else {
        os << (coeff < 0 ? " - " : " + ");
    }
    std::ostringstream num;
    num.precision(17);
    num << std::abs(coeff);
    os << num.str() << " " << name;
}

}  // namespace

std::string write_lp_text(const LinearProgram& lp) {
    std::ostringstream os;
    os.precision(17);
    os << "Minimize\n obj:";
    // every variable appears once so a reader recovers the column order
    for (int j = 0; j < lp.num_vars(); ++j) {
        os << " ";
        append_term(os, lp.c[j], var_name(lp, j), j == 0);
    }
    os << "\nSubject To\n";
    std::vector<std::vector<std::pair<int, double>>> rows(lp.num_rows());
    for (int j = 0; j < lp.num_vars(); ++j)
        for (const auto& e : lp.cols[j]) rows[e.row].push_back({j, e.val});
    for (int r = 0; r < lp.num_rows(); ++r) {
        os << " " << row_name(lp, r) << ":";
        if (rows[r].empty()) os << " 0 " << var_name(lp, 0);
        bool first = true;
        for (const auto& [j, v] : rows[r]) {
            os << " ";
            append_term(os, v, var_name(lp, j), first);
            first = false;
        }
        const char* rel = lp.row_type[r] == RowType::LE   ? "<="
                          : lp.row_type[r] == RowType::GE ? ">="
                                                          : "=";
        os << " " << rel << " " << lp.rhs[r] << "\n";
    }
    os << "Bounds\n";
    for (int j = 0; j < lp.num_vars(); ++j) {
        const double lo = lp.lower[j], up = lp.upper[j];
        if (lo == 0.0 && up == kInf) continue;
        os << " ";
        if (lo == -kInf && up == kInf) {
            os << var_name(lp, j) << " free\n";
        } else if (lo == up) {
            os << var_name(lp, j) << " = " << lo << "\n";
        } else {
            if (lo == -kInf) os << "-inf";
            else os << lo;
            os << " <= " << var_name(lp, j) << " <= ";
            if (up == kInf) os << "+inf";
            else os << up;
            os << "\n";
        }
    }
    os << "End\n";
    return os.str();
}

namespace {

struct Tok {
    enum Kind { Name, Number, Op, Colon, End } kind;
    std::string text;
    double num = 0.0;
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) {}
    Tok next() {
        while (pos_ < s_.size()) {
            const char ch = s_[pos_];
            if (ch == '\\') {  // comment to end of line
                while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(ch))) {
                ++pos_;
                continue;
            }
            break;
        }
        if (pos_ >= s_.size()) return {Tok::End, ""};
        const char ch = s_[pos_];
        if (ch == ':') {
            ++pos_;
            return {Tok::Colon, ":"};
        }
        if (ch == '<' || ch == '>' || ch == '=') {
            std::string op(1, ch);
            ++pos_;
            if (pos_ < s_.size() && s_[pos_] == '=') {
                op += '=';
                ++pos_;
            }
            return {Tok::Op, op};
        }
        if (ch == '+' || ch == '-') {
            ++pos_;
            return {Tok::Op, std::string(1, ch)};
        }
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
            size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                    s_[pos_] == 'e' || s_[pos_] == 'E' ||
                    ((s_[pos_] == '+' || s_[pos_] == '-') &&
                     (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
                ++pos_;
            Tok t{Tok::Number, s_.substr(start, pos_ - start)};
            t.num = std::stod(t.text);
            return t;
        }
        // name: letters, digits, _, (), etc.
        size_t start = pos_;
        while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) &&
               s_[pos_] != ':' && s_[pos_] != '<' && s_[pos_] != '>' && s_[pos_] != '=' &&
               s_[pos_] != '+' && s_[pos_] != '-' && s_[pos_] != '\\')
            ++pos_;
        return {Tok::Name, s_.substr(start, pos_ - start)};
    }

private:
    const std::string& s_;
    size_t pos_ = 0;
};

bool iequals(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

}  // namespace

LinearProgram read_lp_text(const std::string& text) {
    Lexer lex(text);
    LinearProgram lp;
    std::unordered_map<std::string, int> var_of;
    auto var_id = [&](const std::string& name) {
        auto it = var_of.find(name);
        if (it != var_of.end()) return it->second;
        const int id = lp.add_variable(0.0, 0.0, kInf, name);
        var_of[name] = id;
        return id;
    };

    enum Section { None, Objective, Rows, BoundsSec, Done } section = None;
    Tok t = lex.next();
    auto expect_section = [&](const std::string& word) {
        if (iequals(word, "minimize") || iequals(word, "min")) return Objective;
        if (iequals(word, "subject")) return Rows;  // "Subject To"
        if (iequals(word, "st") || iequals(word, "s.t.")) return Rows;
        if (iequals(word, "bounds")) return BoundsSec;
        if (iequals(word, "end")) return Done;
        return None;
    };

    std::string pending_name;
    std::vector<std::pair<int, double>> terms;
    double sign = 1.0;
    double coeff = 1.0;
    bool have_coeff = false;

    auto flush_row = [&](RowType type, double rhs) {
        lp.add_row(type, rhs, terms, pending_name);
        terms.clear();
        pending_name.clear();
        sign = 1.0;
        coeff = 1.0;
        have_coeff = false;
    };

    while (t.kind != Tok::End && section != Done) {
        if (t.kind == Tok::Name) {
            Section s = expect_section(t.text);
            if (s == Rows) {
                // swallow "To"
                Tok t2 = lex.next();
                if (t2.kind == Tok::Name && iequals(t2.text, "to")) t2 = lex.next();
                section = Rows;
                t = t2;
                continue;
            }
            if (s != None) {
                section = s;
                t = lex.next();
                continue;
            }
        }
        if (section == Objective || section == Rows) {
            if (t.kind == Tok::Name) {
                std::string name = t.text;
                Tok t2 = lex.next();
                if (t2.kind == Tok::Colon) {
                    pending_name = name;
                    if (section == Objective) pending_name.clear();  // obj label
                    t = lex.next();
                    continue;
                }
                const int j = var_id(name);
                const double v = sign * (have_coeff ? coeff : 1.0);
                if (section == Objective) lp.c[j] += v;
                else terms.push_back({j, v});
                sign = 1.0;
                have_coeff = false;
                t = t2;
                continue;
            }
            if (t.kind == Tok::Number) {
                coeff = t.num;
                have_coeff = true;
                t = lex.next();
                continue;
            }
            if (t.kind == Tok::Op) {
                if (t.text == "+") { t = lex.next(); continue; }
                if (t.text == "-") { sign = -sign; t = lex.next(); continue; }
                RowType type = t.text == "<=" || t.text == "<"   ? RowType::LE
                               : t.text == ">=" || t.text == ">" ? RowType::GE
                                                                 : RowType::EQ;
                Tok rhs_tok = lex.next();
                double rsign = 1.0;
                while (rhs_tok.kind == Tok::Op) {
                    if (rhs_tok.text == "-") rsign = -rsign;
                    rhs_tok = lex.next();
                }
                if (rhs_tok.kind != Tok::Number)
                    throw InvalidArgument("lp format: expected rhs number");
                flush_row(type, rsign * rhs_tok.num);
                t = lex.next();
                continue;
            }
        }
        if (section == BoundsSec) {
            // forms: "a <= x <= b" | "x >= a" | "x <= b" | "x free" | "x = a" | "-inf <= x <= b"
            double lo_val = 0.0;
            bool have_lo = false;
            double s1 = 1.0;
            while (t.kind == Tok::Op && (t.text == "-" || t.text == "+")) {
                if (t.text == "-") s1 = -s1;
                t = lex.next();
            }
            if (t.kind == Tok::Number) {
                lo_val = s1 * t.num;
                have_lo = true;
                t = lex.next();
                if (t.kind != Tok::Op) throw InvalidArgument("lp format: bad bounds line");
                t = lex.next();  // consume <=
            } else if (t.kind == Tok::Name && (iequals(t.text, "-inf") || iequals(t.text, "inf"))) {
                lo_val = iequals(t.text, "-inf") || s1 < 0 ? -kInf : kInf;
                have_lo = true;
                t = lex.next();
                t = lex.next();  // consume <=
            }
            if (t.kind != Tok::Name) throw InvalidArgument("lp format: expected variable in bounds");
            const int j = var_id(t.text);
            t = lex.next();
            if (t.kind == Tok::Name && iequals(t.text, "free")) {
                lp.lower[j] = -kInf;
                lp.upper[j] = kInf;
                t = lex.next();
                continue;
            }
            if (have_lo) lp.lower[j] = lo_val;
            if (t.kind == Tok::Op && (t.text == "<=" || t.text == "<" || t.text == ">=" ||
                                      t.text == ">" || t.text == "=" || t.text == "==")) {
                const std::string op = t.text;
                t = lex.next();
                double s2 = 1.0;
                while (t.kind == Tok::Op && (t.text == "-" || t.text == "+")) {
                    if (t.text == "-") s2 = -s2;
                    t = lex.next();
                }
                double v;
                if (t.kind == Tok::Number) v = s2 * t.num;
                else if (t.kind == Tok::Name && (iequals(t.text, "inf") || iequals(t.text, "+inf")))
                    v = s2 * kInf;
                else if (t.kind == Tok::Name && iequals(t.text, "-inf")) v = -kInf;
                else throw InvalidArgument("lp format: expected bound value");
                if (op == "<=" || op == "<") lp.upper[j] = v;
                else if (op == ">=" || op == ">") lp.lower[j] = v;
                else { lp.lower[j] = v; lp.upper[j] = v; }
                t = lex.next();
                continue;
            }
            continue;
        }
        t = lex.next();
    }
    return lp;
}

void write_lp_file(const LinearProgram& lp, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path + " for writing");
    f << write_lp_text(lp);
}

LinearProgram read_lp_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return read_lp_text(ss.str());
}

}  // namespace msrt::lp
