#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace msrt::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowType : std::uint8_t { LE, EQ, GE };
enum class LpStatus : std::uint8_t { Optimal, Infeasible, Unbounded, IterLimit };

std::string to_string(LpStatus s);

/// Minimize c'x subject to typed rows and variable bounds (default [0, inf)).
/// Stored column-wise; rows are untyped until add_row fixes them.
struct LinearProgram {
    struct Entry {
        int row;
        double val;
    };

    int num_vars() const { return static_cast<int>(cols.size()); }
    int num_rows() const { return static_cast<int>(row_type.size()); }

    int add_variable(double cost, double lower = 0.0, double upper = kInf,
                     const std::string& name = "");
    /// entries: (column, coefficient) pairs; duplicate columns are summed.
    int add_row(RowType type, double rhs_value,
                const std::vector<std::pair<int, double>>& entries,
                const std::string& name = "");
    void set_rhs(int row, double value) { rhs[row] = value; }

    std::vector<double> c;
    std::vector<double> lower, upper;
    std::vector<std::vector<Entry>> cols;
    std::vector<RowType> row_type;
    std::vector<double> rhs;
    std::vector<std::string> var_names, row_names;
};

/// Variable status in a simplex basis (structural variables first, then one
/// logical per row).
enum class VarStatus : std::uint8_t { NonbasicLower, NonbasicUpper, NonbasicFree, Basic };

struct Basis {
    std::vector<VarStatus> status;
    bool empty() const { return status.empty(); }
};

struct LpSolution {
    LpStatus status = LpStatus::IterLimit;
    std::vector<double> x;             // structural primal values
    double objective = 0.0;
    std::vector<double> row_dual;      // dV/db_r sensitivity convention
    std::vector<double> reduced_cost;  // structural: c_j - y'A_j
    Basis basis;
    long iterations = 0;
    long phase1_iterations = 0;
};

struct SolveOptions {
    double tol_feas = 1e-9;    // primal bound tolerance
    double tol_dual = 1e-9;    // reduced-cost tolerance
    double tol_pivot = 1e-9;   // minimum acceptable pivot magnitude
    long max_iters = -1;       // default 10*(m+n)^2
    int refactor_every = 120;  // eta vectors between refactorizations
};

/// Revised simplex with bounded variables; Dantzig pricing with Bland
/// fallback after a degenerate-pivot window.
LpSolution solve(const LinearProgram& lp, const Basis* warm = nullptr,
                 const SolveOptions& opts = {});

/// Dual of one row of an optimal solution, i.e. d(objective)/d(rhs[row]).
double dual_wrt_rhs(const LpSolution& sol, int row);

/// Checks the LpSolution invariants (feasibility residual, duality gap,
/// complementary slackness). Returns an empty string if all hold.
std::string check_solution(const LinearProgram& lp, const LpSolution& sol);

/// Persistent solver for the repeated stage solves in SDDP: RHS updates are
/// warm-started with the dual simplex on the existing factorization; appended
/// rows trigger one refactorization at the next solve.
class SimplexSession {
public:
    SimplexSession();
    ~SimplexSession();
    SimplexSession(SimplexSession&&) noexcept;
    SimplexSession& operator=(SimplexSession&&) noexcept;

    void load(const LinearProgram& lp, const SolveOptions& opts = {});
    bool loaded() const;
    void set_rhs(int row, double value);
    int append_row(RowType type, double rhs_value,
                   const std::vector<std::pair<int, double>>& entries);
    LpSolution solve();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// CPLEX-style LP text format, for external-solver cross-checks.
std::string write_lp_text(const LinearProgram& lp);
LinearProgram read_lp_text(const std::string& text);
void write_lp_file(const LinearProgram& lp, const std::string& path);
LinearProgram read_lp_file(const std::string& path);

}  // namespace msrt::lp
