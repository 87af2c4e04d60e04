#pragma once

#include <string>
#include <vector>

#include "resmin/error.hpp"

namespace resmin {

/// Exit codes of the command-line front end.
enum ExitCode : int {
    exit_ok = 0,
    exit_config = 2, ///< unknown benchmark, malformed config, out-of-range values
    exit_solver = 3, ///< solver failure (with level context on stderr)
    exit_io = 4,     ///< output files could not be written
};

struct RunConfig {
    std::string benchmark;
    std::vector<int> degrees = {1};
    int levels = 1;
    double eta_ref = 0.25;
    double newton_tol = 1e-6;
    int newton_max_iters = 50;
    bool plots = false;
    bool dg_reference = false;
    std::string out_dir = ".";
};

/// Reads "key = value" lines (# starts a comment) onto the defaults.
/// Recognized keys: benchmark, degrees, levels, eta_ref, newton_tol,
/// newton_max_iters, plots, dg_reference, out.
RunConfig parse_config_file(const std::string& path);

/// Range-checks a config; throws InvalidInput with a message on violation.
void validate_config(const RunConfig& config);

/// Executes one configuration: per (benchmark, degree) writes a CSV table,
/// optionally an SVG convergence plot, and a metadata file into out_dir.
/// Returns an ExitCode instead of throwing.
int run(const RunConfig& config);

/// Full command line: `resmin run --benchmark <name> ... --out <dir>`.
int cli_main(int argc, char** argv);

} // namespace resmin
