#include "msrt/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

namespace msrt {

using nlohmann::json;

void ScenarioSet::validate() const {
    if (displacements.empty()) throw InvalidArgument("scenario: empty support");
    if (probabilities.size() != displacements.size())
        throw InvalidArgument("scenario: probability/displacement size mismatch");
    double s = 0.0;
    for (double q : probabilities) {
        if (!(q > 0.0)) throw InvalidArgument("scenario: probabilities must be positive");
        s += q;
    }
    if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument("scenario: probabilities must sum to 1");
    for (const auto& m : dose)
        if ((m.array() < 0.0).any()) throw InvalidArgument("scenario: negative dose entry");
}

ScenarioSet sample_miga(double sigma_mm, int p, std::uint64_t seed) {
    if (p < 1) throw InvalidArgument("sample_miga: P must be >= 1");
    if (!(sigma_mm > 0.0)) throw InvalidArgument("sample_miga: sigma must be > 0");
    ScenarioSet scen;
    scen.seed = seed;
    scen.sigma_mm = sigma_mm;
    scen.displacements.resize(static_cast<size_t>(p));
    scen.probabilities.assign(static_cast<size_t>(p), 1.0 / p);
    scen.displacements[0] = {0.0, 0.0, 0.0};  // nominal geometry is always an atom
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma_mm);
    for (int i = 1; i < p; ++i)
        scen.displacements[static_cast<size_t>(i)] = {gauss(rng), gauss(rng), gauss(rng)};
    return scen;
}

std::vector<DoseMatrix> shifted_dose_matrices(const VoxelGrid& grid, const PencilKernel& kernel,
                                              const BeamletLayout& beams, const VoxelSet& voxels,
                                              const std::vector<Vec3>& displacements) {
    std::vector<DoseMatrix> out;
    out.reserve(displacements.size());
    for (const auto& d : displacements) out.push_back(dose_matrix(grid, kernel, beams, voxels, d));
    return out;
}

namespace {

// categorical draw via inverse CDF on a 53-bit uniform; avoids the
// implementation-defined std distributions so streams are stable
int categorical(const std::vector<double>& probs, std::mt19937_64& rng) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace

SamplePath draw_path(const ScenarioSet& scen, int fractions, std::mt19937_64& rng) {
    if (fractions < 1) throw InvalidArgument("draw_path: F must be >= 1");
    SamplePath path(static_cast<size_t>(fractions));
    for (auto& v : path) v = categorical(scen.probabilities, rng);
    return path;
}

SamplePath draw_path_out_of_sample(const ScenarioSet& scen, int fractions, std::mt19937_64& rng) {
    if (fractions < 1) throw InvalidArgument("draw_path: F must be >= 1");
    if (!(scen.sigma_mm > 0.0))
        throw StateError("out-of-sample path needs the scenario sigma");
    std::normal_distribution<double> gauss(0.0, scen.sigma_mm);
    SamplePath path(static_cast<size_t>(fractions));
    for (auto& v : path) {
        const Vec3 d = {gauss(rng), gauss(rng), gauss(rng)};
        int best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int p = 0; p < scen.size(); ++p) {
            const double dist = norm(d - scen.displacements[static_cast<size_t>(p)]);
            if (dist < best_dist) {
                best_dist = dist;
                best = p;
            }
        }
        v = best;
    }
    return path;
}

std::string scenario_to_json(const ScenarioSet& scen) {
    json j;
    j["version"] = 1;
    j["seed"] = scen.seed;
    j["sigma_mm"] = scen.sigma_mm;
    j["probabilities"] = scen.probabilities;
    json disp = json::array();
    for (const auto& d : scen.displacements) disp.push_back({d[0], d[1], d[2]});
    j["displacements"] = disp;
    return j.dump(2);
}

ScenarioSet scenario_from_json(const std::string& text) {
    const json j = json::parse(text);
    ScenarioSet scen;
    scen.seed = j.at("seed").get<std::uint64_t>();
    scen.sigma_mm = j.at("sigma_mm").get<double>();
    scen.probabilities = j.at("probabilities").get<std::vector<double>>();
    for (const auto& d : j.at("displacements"))
        scen.displacements.push_back({d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()});
    scen.validate();
    return scen;
}

}  // namespace msrt
