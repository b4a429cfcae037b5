#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "splitmc/diagnostics.hpp"
#include "splitmc/engine.hpp"
#include "splitmc/kt.hpp"
#include "splitmc/ppa.hpp"
#include "splitmc/saddle.hpp"

namespace splitmc::cli {

using json = nlohmann::json;

struct ValidationIssue {
    std::string where;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    std::vector<std::string> notes;  // informational (regime tags, constants)
    bool ok() const { return issues.empty(); }
    json to_json() const;
};

/// Parsed and normalized experiment description. `echo` re-serializes to an
/// equivalent document; `fingerprint` hashes the normalized form.
struct RunConfig {
    json echo;
    std::string algorithm;
    std::int64_t n_iter = 0;
    std::vector<std::uint64_t> seeds;
    int residual_every = 10;
    double rho = 2.0;
    std::string out_dir;  // empty = require --out
    std::uint64_t fingerprint = 0;
};

/// Parse + full validation (operators, step sizes, relaxation laws). Never
/// iterates. Throws ConfigError-style ParameterError on malformed documents;
/// semantic problems land in the report instead.
RunConfig load_config(const std::filesystem::path& path, ValidationReport& report);

/// Seed list override from --seeds ("12" = count with base from config,
/// "3,5,8" = explicit list).
void apply_seeds_flag(RunConfig& cfg, const std::string& flag);

int cmd_check(const std::filesystem::path& config_path, bool quiet);
int cmd_run(const std::filesystem::path& config_path, const std::string& out_override,
            const std::string& seeds_flag, bool quiet);
int cmd_sweep(const std::filesystem::path& config_path, const std::string& out_override,
              const std::string& seeds_flag, bool quiet);

// Exposed for tests.
struct SeedRunData {
    std::uint64_t seed;
    Trace trace;
    double final_dist = std::numeric_limits<double>::quiet_NaN();
    double final_residual = std::numeric_limits<double>::quiet_NaN();
};
std::vector<SeedRunData> run_all_seeds(const json& doc, const RunConfig& cfg);

}  // namespace splitmc::cli
