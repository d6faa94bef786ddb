#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "msrt/phantom.hpp"
#include "msrt/sddp.hpp"

namespace msrt {

/// key = value text with '#' comments.
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// CaseSpec from a config map; unknown keys are rejected so typos surface.
CaseSpec case_spec_from_config(const std::map<std::string, std::string>& kv);
CaseSpec load_case_spec(const std::string& path);
std::string case_spec_to_config(const CaseSpec& spec);

/// One full run: case, horizon, support size, risk measure, sampling rate,
/// training options, simulation count, seeds, output directory.
struct RunConfig {
    std::string case_path;
    int fractions = 5;
    int realizations = 20;
    std::string risk = "worst";
    double voxel_rate = 0.3;
    int n_sim = 200;
    std::uint64_t seed = 1;
    bool deterministic = false;
    std::string margin = "ctv+";  // ctv+ | ptv | explicit millimeters
    long max_iters = 200;
    int stop_window = 20;
    double stop_epsilon = 1e-4;
    int stat_paths = 30;
    int stat_check_every = 5;
    int threads = 1;
    bool out_of_sample = false;
    std::string out_dir = "out";

    void validate() const;
    /// margin in millimeters this run applies to the tumor for planning
    double margin_mm(const CaseSpec& spec) const;
    std::string model_id(const CaseSpec& spec) const;
    TrainOptions train_options() const;
};

std::string run_config_to_text(const RunConfig& rc);
RunConfig run_config_from_text(const std::string& text);

}  // namespace msrt
