#pragma once

#include <array>
#include <string>
#include <vector>

#include "msrt/simulate.hpp"

namespace msrt {

/// Fraction of tumor voxels whose cumulative dose reaches the minimum
/// prescription (inclusive at the threshold).
double coverage(const std::vector<double>& final_dose, double t_minus);

/// Percentage of voxels strictly above 110% of the maximum tolerable dose.
double hotspot(const std::vector<double>& final_dose, double t_plus);

/// Percentage of voxels that received more than d Gy, per grid point.
/// The strict inequality also applies at d = 0; `inclusive_at_zero` switches
/// d = 0 to >= for callers that want every voxel counted.
std::vector<double> dvh(const std::vector<double>& final_dose, const std::vector<double>& d_grid,
                        bool inclusive_at_zero = false);

/// mean +- 1.645 * Bessel-corrected std: the ~90% prediction band.
std::array<double, 2> k_interval(const std::vector<double>& samples);

struct PenaltyValues {
    double theta_plus = 0.0;
    double gamma_plus = 0.0;
    double theta_minus = 0.0;
    double gamma_minus = 0.0;
};

/// Per-tissue average over/underdose penalties of one trace: theta sums the
/// per-fraction hinge violations, gamma the end-of-course ones.
PenaltyValues penalties(const std::vector<std::vector<double>>& per_fraction_dose,
                        const std::vector<double>& final_dose, int offset, int count,
                        double r_plus, double r_minus, double t_plus, double t_minus,
                        bool is_tumor);

struct Band {
    std::vector<double> lo, mean, hi;
};

struct TissueReport {
    std::string name;
    bool is_tumor = false;
    std::array<double, 2> k_coverage{0, 0};  // tumor only
    std::array<double, 2> k_min_dose{0, 0};
    std::array<double, 2> k_max_dose{0, 0};
    std::array<double, 2> k_hotspot{0, 0};
    std::array<double, 2> k_theta_plus{0, 0};
    std::array<double, 2> k_gamma_plus{0, 0};
    std::array<double, 2> k_theta_minus{0, 0};  // tumor only
    std::array<double, 2> k_gamma_minus{0, 0};
    Band dvh_band;
};

struct EvaluationReport {
    std::string case_id;
    std::string model_id;
    int n_runs = 0;
    int fractions = 0;
    std::uint64_t seed = 0;
    std::vector<double> d_grid;
    std::vector<TissueReport> tissues;
    Band zone_dvh;  // empty when the healthy zone was not evaluated
};

/// All paper metrics over a trace set. The d grid defaults to 0..dvh_max Gy
/// in 1 Gy steps.
EvaluationReport evaluate_traces(const std::vector<SimulationTrace>& traces,
                                 const SimulationContext& ctx, const std::string& case_id,
                                 const std::string& model_id, std::uint64_t seed,
                                 double dvh_max_gy = 120.0);

std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const std::string& text);
void write_report(const std::string& path, const EvaluationReport& report);
EvaluationReport read_report(const std::string& path);

/// Human-readable tables in the shape of the paper's summary tables.
std::string report_to_text(const EvaluationReport& report);

/// DVH band file: one row per grid point, "d lo mean hi", raw (unclipped).
void write_dvh_band(const std::string& path, const std::vector<double>& d_grid, const Band& band);

/// Side-by-side K-intervals with interval-width ratios. Reports must describe
/// the same case.
std::string compare_reports(const EvaluationReport& a, const EvaluationReport& b);

}  // namespace msrt
