#include "msrt/evaluate.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace msrt {

using nlohmann::json;

double coverage(const std::vector<double>& final_dose, double t_minus) {
    if (final_dose.empty()) throw InvalidArgument("coverage: empty tissue");
    std::size_t hit = 0;
    for (double v : final_dose)
        if (v >= t_minus) ++hit;
    return static_cast<double>(hit) / static_cast<double>(final_dose.size());
}

double hotspot(const std::vector<double>& final_dose, double t_plus) {
    if (final_dose.empty()) throw InvalidArgument("hotspot: empty tissue");
    std::size_t hit = 0;
    for (double v : final_dose)
        if (v > 1.1 * t_plus) ++hit;
    return 100.0 * static_cast<double>(hit) / static_cast<double>(final_dose.size());
}

std::vector<double> dvh(const std::vector<double>& final_dose, const std::vector<double>& d_grid,
                        bool inclusive_at_zero) {
    if (final_dose.empty()) throw InvalidArgument("dvh: empty dose vector");
    for (size_t k = 1; k < d_grid.size(); ++k)
        if (d_grid[k] < d_grid[k - 1]) throw InvalidArgument("dvh: grid must be ascending");
    std::vector<double> out;
    out.reserve(d_grid.size());
    for (double d : d_grid) {
        std::size_t hit = 0;
        for (double v : final_dose) {
            const bool in = (inclusive_at_zero && d == 0.0) ? v >= d : v > d;
            if (in) ++hit;
        }
        out.push_back(100.0 * static_cast<double>(hit) / static_cast<double>(final_dose.size()));
    }
    return out;
}

std::array<double, 2> k_interval(const std::vector<double>& samples) {
    if (samples.size() < 2) throw InvalidArgument("k_interval: needs at least 2 samples");
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(samples.size() - 1));
    return {mean - 1.645 * sd, mean + 1.645 * sd};
}

PenaltyValues penalties(const std::vector<std::vector<double>>& per_fraction_dose,
                        const std::vector<double>& final_dose, int offset, int count,
                        double r_plus, double r_minus, double t_plus, double t_minus,
                        bool is_tumor) {
    PenaltyValues out;
    const double n = static_cast<double>(count);
    for (int i = 0; i < count; ++i) {
        const auto idx = static_cast<size_t>(offset + i);
        for (const auto& z : per_fraction_dose) {
            out.theta_plus += std::max(0.0, z[idx] - r_plus);
            if (is_tumor) out.theta_minus += std::max(0.0, r_minus - z[idx]);
        }
        out.gamma_plus += std::max(0.0, final_dose[idx] - t_plus);
        if (is_tumor) out.gamma_minus += std::max(0.0, t_minus - final_dose[idx]);
    }
    out.theta_plus /= n;
    out.gamma_plus /= n;
    out.theta_minus /= n;
    out.gamma_minus /= n;
    return out;
}

namespace {

std::vector<double> slice(const std::vector<double>& v, int offset, int count) {
    return {v.begin() + offset, v.begin() + offset + count};
}

Band band_over_traces(const std::vector<std::vector<double>>& curves) {
    Band b;
    if (curves.empty()) return b;
    const size_t n = curves[0].size();
    b.lo.resize(n);
    b.mean.resize(n);
    b.hi.resize(n);
    std::vector<double> samples(curves.size());
    for (size_t k = 0; k < n; ++k) {
        for (size_t r = 0; r < curves.size(); ++r) samples[r] = curves[r][k];
        const auto ki = k_interval(samples);
        b.lo[k] = ki[0];
        b.hi[k] = ki[1];
        double mean = 0.0;
        for (double v : samples) mean += v;
        b.mean[k] = mean / static_cast<double>(samples.size());
    }
    return b;
}

}  // namespace

EvaluationReport evaluate_traces(const std::vector<SimulationTrace>& traces,
                                 const SimulationContext& ctx, const std::string& case_id,
                                 const std::string& model_id, std::uint64_t seed,
                                 double dvh_max_gy) {
    if (traces.size() < 2) throw InvalidArgument("evaluate: needs at least 2 traces");
    EvaluationReport rep;
    rep.case_id = case_id;
    rep.model_id = model_id;
    rep.n_runs = static_cast<int>(traces.size());
    rep.fractions = ctx.fractions;
    rep.seed = seed;
    for (double d = 0.0; d <= dvh_max_gy + 1e-9; d += 1.0) rep.d_grid.push_back(d);

    for (const auto& s : ctx.structures) {
        TissueReport tr;
        tr.name = s.name;
        tr.is_tumor = s.is_tumor;
        std::vector<double> cov, dmin, dmax, hot, thp, gap, thm, gam;
        std::vector<std::vector<double>> curves;
        const double r_plus = s.t_plus / ctx.fractions;
        const double r_minus = s.t_minus / ctx.fractions;
        for (const auto& t : traces) {
            const auto dose = slice(t.tissue_final, s.offset, s.count);
            if (s.is_tumor) cov.push_back(coverage(dose, s.t_minus));
            dmin.push_back(*std::min_element(dose.begin(), dose.end()));
            dmax.push_back(*std::max_element(dose.begin(), dose.end()));
            hot.push_back(hotspot(dose, s.t_plus));
            const auto pv = penalties(t.tissue_dose, t.tissue_final, s.offset, s.count, r_plus,
                                      r_minus, s.t_plus, s.t_minus, s.is_tumor);
            thp.push_back(pv.theta_plus);
            gap.push_back(pv.gamma_plus);
            if (s.is_tumor) {
                thm.push_back(pv.theta_minus);
                gam.push_back(pv.gamma_minus);
            }
            curves.push_back(dvh(dose, rep.d_grid));
        }
        if (s.is_tumor) tr.k_coverage = k_interval(cov);
        tr.k_min_dose = k_interval(dmin);
        tr.k_max_dose = k_interval(dmax);
        tr.k_hotspot = k_interval(hot);
        tr.k_theta_plus = k_interval(thp);
        tr.k_gamma_plus = k_interval(gap);
        if (s.is_tumor) {
            tr.k_theta_minus = k_interval(thm);
            tr.k_gamma_minus = k_interval(gam);
        }
        tr.dvh_band = band_over_traces(curves);
        rep.tissues.push_back(std::move(tr));
    }
    if (ctx.n_zone_voxels > 0) {
        std::vector<std::vector<double>> curves;
        for (const auto& t : traces) curves.push_back(dvh(t.zone_final, rep.d_grid));
        rep.zone_dvh = band_over_traces(curves);
    }
    return rep;
}

namespace {

json band_to_json(const Band& b) {
    json j;
    j["lo"] = b.lo;
    j["mean"] = b.mean;
    j["hi"] = b.hi;
    return j;
}

Band band_from_json(const json& j) {
    Band b;
    if (j.is_null()) return b;
    b.lo = j.at("lo").get<std::vector<double>>();
    b.mean = j.at("mean").get<std::vector<double>>();
    b.hi = j.at("hi").get<std::vector<double>>();
    return b;
}

json interval_to_json(const std::array<double, 2>& k) { return json::array({k[0], k[1]}); }

std::array<double, 2> interval_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

std::string fmt_interval(const std::array<double, 2>& k) {
    std::ostringstream os;
    os << "[" << std::fixed << std::setprecision(3) << k[0] << ", " << k[1] << "]";
    return os.str();
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
    json j;
    j["version"] = 1;
    j["kind"] = "evaluation-report";
    j["case_id"] = report.case_id;
    j["model_id"] = report.model_id;
    j["n_runs"] = report.n_runs;
    j["fractions"] = report.fractions;
    j["seed"] = report.seed;
    j["d_grid"] = report.d_grid;
    json tissues = json::array();
    for (const auto& t : report.tissues) {
        json jt;
        jt["name"] = t.name;
        jt["is_tumor"] = t.is_tumor;
        jt["coverage"] = interval_to_json(t.k_coverage);
        jt["min_dose"] = interval_to_json(t.k_min_dose);
        jt["max_dose"] = interval_to_json(t.k_max_dose);
        jt["hotspot"] = interval_to_json(t.k_hotspot);
        jt["theta_plus"] = interval_to_json(t.k_theta_plus);
        jt["gamma_plus"] = interval_to_json(t.k_gamma_plus);
        jt["theta_minus"] = interval_to_json(t.k_theta_minus);
        jt["gamma_minus"] = interval_to_json(t.k_gamma_minus);
        jt["dvh"] = band_to_json(t.dvh_band);
        tissues.push_back(jt);
    }
    j["tissues"] = tissues;
    j["zone_dvh"] = report.zone_dvh.lo.empty() ? json() : band_to_json(report.zone_dvh);
    return j.dump();
}

EvaluationReport report_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.value("kind", "") != "evaluation-report")
        throw InvalidArgument("not an evaluation report file");
    EvaluationReport r;
    r.case_id = j.at("case_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.n_runs = j.at("n_runs").get<int>();
    r.fractions = j.at("fractions").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.d_grid = j.at("d_grid").get<std::vector<double>>();
    for (const auto& jt : j.at("tissues")) {
        TissueReport t;
        t.name = jt.at("name").get<std::string>();
        t.is_tumor = jt.at("is_tumor").get<bool>();
        t.k_coverage = interval_from_json(jt.at("coverage"));
        t.k_min_dose = interval_from_json(jt.at("min_dose"));
        t.k_max_dose = interval_from_json(jt.at("max_dose"));
        t.k_hotspot = interval_from_json(jt.at("hotspot"));
        t.k_theta_plus = interval_from_json(jt.at("theta_plus"));
        t.k_gamma_plus = interval_from_json(jt.at("gamma_plus"));
        t.k_theta_minus = interval_from_json(jt.at("theta_minus"));
        t.k_gamma_minus = interval_from_json(jt.at("gamma_minus"));
        t.dvh_band = band_from_json(jt.at("dvh"));
        r.tissues.push_back(std::move(t));
    }
    r.zone_dvh = band_from_json(j.at("zone_dvh"));
    return r;
}

void write_report(const std::string& path, const EvaluationReport& report) {
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path + " for writing");
    f << report_to_json(report) << "\n";
}

EvaluationReport read_report(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return report_from_json(text);
}

std::string report_to_text(const EvaluationReport& report) {
    std::ostringstream os;
    os << "case: " << report.case_id << "  model: " << report.model_id
       << "  runs: " << report.n_runs << "  F: " << report.fractions << "\n";
    os << std::left << std::setw(22) << "metric";
    for (const auto& t : report.tissues) os << std::setw(20) << t.name;
    os << "\n";
    auto row = [&](const std::string& label, auto getter, bool tumor_only) {
        os << std::setw(22) << label;
        for (const auto& t : report.tissues) {
            if (tumor_only && !t.is_tumor) os << std::setw(20) << "-";
            else os << std::setw(20) << fmt_interval(getter(t));
        }
        os << "\n";
    };
    row("K(Coverage)", [](const TissueReport& t) { return t.k_coverage; }, true);
    row("K(min D)", [](const TissueReport& t) { return t.k_min_dose; }, false);
    row("K(max D)", [](const TissueReport& t) { return t.k_max_dose; }, false);
    row("K(H)", [](const TissueReport& t) { return t.k_hotspot; }, false);
    row("K(Theta+)", [](const TissueReport& t) { return t.k_theta_plus; }, false);
    row("K(Gamma+)", [](const TissueReport& t) { return t.k_gamma_plus; }, false);
    row("K(Theta-)", [](const TissueReport& t) { return t.k_theta_minus; }, true);
    row("K(Gamma-)", [](const TissueReport& t) { return t.k_gamma_minus; }, true);
    return os.str();
}

void write_dvh_band(const std::string& path, const std::vector<double>& d_grid, const Band& band) {
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path + " for writing");
    f << "d\tlo\tmean\thi\n";
    f << std::setprecision(12);
    for (size_t k = 0; k < d_grid.size(); ++k)
        f << d_grid[k] << "\t" << band.lo[k] << "\t" << band.mean[k] << "\t" << band.hi[k] << "\n";
}

std::string compare_reports(const EvaluationReport& a, const EvaluationReport& b) {
    if (a.case_id != b.case_id)
        throw InvalidArgument("compare: reports describe different cases");
    std::ostringstream os;
    os << "case: " << a.case_id << "    " << a.model_id << " vs " << b.model_id << "\n";
    os << std::left << std::setw(30) << "metric" << std::setw(22) << a.model_id << std::setw(22)
       << b.model_id << std::setw(14) << "width ratio" << "\n";
    auto width = [](const std::array<double, 2>& k) { return k[1] - k[0]; };
    auto row = [&](const std::string& label, const std::array<double, 2>& ka,
                   const std::array<double, 2>& kb) {
        os << std::setw(30) << label << std::setw(22) << fmt_interval(ka) << std::setw(22)
           << fmt_interval(kb);
        const double wa = width(ka), wb = width(kb);
        if (wb > 0) os << std::setw(14) << std::fixed << std::setprecision(3) << wa / wb;
        else os << std::setw(14) << (wa > 0 ? "inf" : "1.000");
        os << "\n";
    };
    for (const auto& ta : a.tissues) {
        const TissueReport* tb = nullptr;
        for (const auto& t : b.tissues)
            if (t.name == ta.name) tb = &t;
        if (!tb) continue;
        if (ta.is_tumor) row("K(Coverage) " + ta.name, ta.k_coverage, tb->k_coverage);
        row("K(min D) " + ta.name, ta.k_min_dose, tb->k_min_dose);
        row("K(max D) " + ta.name, ta.k_max_dose, tb->k_max_dose);
        row("K(H) " + ta.name, ta.k_hotspot, tb->k_hotspot);
        row("K(Theta+) " + ta.name, ta.k_theta_plus, tb->k_theta_plus);
        row("K(Gamma+) " + ta.name, ta.k_gamma_plus, tb->k_gamma_plus);
        if (ta.is_tumor) {
            row("K(Theta-) " + ta.name, ta.k_theta_minus, tb->k_theta_minus);
            row("K(Gamma-) " + ta.name, ta.k_gamma_minus, tb->k_gamma_minus);
        }
    }
    return os.str();
}

}  // namespace msrt
