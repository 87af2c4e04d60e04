#include "resmin/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "resmin/adapt.hpp"
#include "resmin/problems.hpp"
#include "resmin/report.hpp"

namespace resmin {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<int> parse_degree_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        std::size_t pos = 0;
        const int v = std::stoi(item, &pos);
        if (pos != item.size()) throw InvalidInput("config: bad degree entry '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw InvalidInput("config: empty degree list");
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidInput("config: bad boolean for '" + key + "': " + v);
}

} // namespace

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("config: cannot open '" + path + "'");
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidInput("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "benchmark") cfg.benchmark = value;
            else if (key == "degrees" || key == "degree") cfg.degrees = parse_degree_list(value);
            else if (key == "levels") cfg.levels = std::stoi(value);
            else if (key == "eta_ref") cfg.eta_ref = std::stod(value);
            else if (key == "newton_tol") cfg.newton_tol = std::stod(value);
            else if (key == "newton_max_iters") cfg.newton_max_iters = std::stoi(value);
            else if (key == "plots") cfg.plots = parse_bool(value, key);
            else if (key == "dg_reference") cfg.dg_reference = parse_bool(value, key);
            else if (key == "out") cfg.out_dir = value;
            else throw InvalidInput("config: unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw InvalidInput("config: bad value for '" + key + "' on line " + std::to_string(lineno));
        } catch (const std::out_of_range&) {
            throw InvalidInput("config: value out of range for '" + key + "'");
        }
    }
    return cfg;
}

void validate_config(const RunConfig& config) {
    if (config.benchmark.empty()) throw InvalidInput("config: benchmark name required");
    if (config.degrees.empty()) throw InvalidInput("config: at least one degree required");
    for (int d : config.degrees)
        if (d < 1 || d > 4) throw InvalidInput("config: degree " + std::to_string(d) + " outside 1..4");
    if (config.levels < 1) throw InvalidInput("config: levels must be >= 1");
    if (!(config.eta_ref > 0.0) || config.eta_ref > 1.0)
        throw InvalidInput("config: eta_ref must lie in (0, 1]");
    if (!(config.newton_tol > 0.0)) throw InvalidInput("config: newton_tol must be positive");
    if (config.newton_max_iters < 1) throw InvalidInput("config: newton_max_iters must be >= 1");
    if (config.out_dir.empty()) throw InvalidInput("config: output directory required");
}

namespace {

void write_meta(std::ostream& out, const RunConfig& cfg, int degree, const AdaptiveResult& result,
                double seconds) {
    out << "benchmark = " << cfg.benchmark << "\n";
    out << "degree = " << degree << "\n";
    out << "levels = " << cfg.levels << "\n";
    out << "eta_ref = " << cfg.eta_ref << "\n";
    out << "newton_tol = " << cfg.newton_tol << "\n";
    out << "newton_max_iters = " << cfg.newton_max_iters << "\n";
    out << "plots = " << (cfg.plots ? "true" : "false") << "\n";
    out << "dg_reference = " << (cfg.dg_reference ? "true" : "false") << "\n";
    out << "out = " << cfg.out_dir << "\n";
    out << "saddle_residual_tol = 1e-9\n";
    out << "reconstruction_residual_tol = 1e-9\n";
    out << "spd_residual_tol = 1e-10\n";
    out << "ordering = COLAMD (Eigen SparseLU)\n";
    out << "records = " << result.records.size() << "\n";
    if (!result.records.empty()) {
        out << "final_dofs = " << result.records.back().dofs << "\n";
        out << "final_est_Vh = " << result.records.back().est_vh << "\n";
    }
    out << "wall_time_seconds = " << seconds << "\n";
}

} // namespace

int run(const RunConfig& config) {
    try {
        validate_config(config);
    } catch (const InvalidInput& e) {
        std::cerr << "resmin: " << e.what() << "\n";
        return exit_config;
    }

    Benchmark benchmark;
    try {
        benchmark = make_benchmark(config.benchmark);
    } catch (const InvalidInput& e) {
        std::cerr << "resmin: " << e.what() << "\n";
        return exit_config;
    }

    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (ec) {
        std::cerr << "resmin: cannot create output directory '" << config.out_dir << "': " << ec.message()
                  << "\n";
        return exit_io;
    }

    for (int degree : config.degrees) {
        AdaptiveOptions opts;
        opts.degree = degree;
        opts.levels = config.levels;
        opts.eta_ref = config.eta_ref;
        opts.newton.tolerance = config.newton_tol;
        opts.newton.max_iterations = config.newton_max_iters;
        opts.reference = config.dg_reference;

        AdaptiveResult result;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            result = adaptive_loop(benchmark, opts);
        } catch (const SolverError& e) {
            std::cerr << "resmin: solver failure: " << e.what() << "\n";
            return exit_solver;
        } catch (const InvalidInput& e) {
            std::cerr << "resmin: " << e.what() << "\n";
            return exit_config;
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const std::string stem =
            (std::filesystem::path(config.out_dir) / (config.benchmark + "_p" + std::to_string(degree)))
                .string();
        {
            std::ofstream csv(stem + ".csv", std::ios::binary);
            if (csv) write_records_csv(csv, result.records);
            if (!csv) {
                std::cerr << "resmin: cannot write '" << stem << ".csv'\n";
                return exit_io;
            }
        }
        if (config.plots) {
            std::ofstream svg(stem + ".svg", std::ios::binary);
            if (svg)
                write_convergence_svg(svg, result.records,
                                      config.benchmark + " p=" + std::to_string(degree));
            if (!svg) {
                std::cerr << "resmin: cannot write '" << stem << ".svg'\n";
                return exit_io;
            }
        }
        {
            std::ofstream meta(stem + ".meta.txt", std::ios::binary);
            if (meta) write_meta(meta, config, degree, result, seconds);
            if (!meta) {
                std::cerr << "resmin: cannot write '" << stem << ".meta.txt'\n";
                return exit_io;
            }
        }
    }
    return exit_ok;
}

int cli_main(int argc, char** argv) {
    CLI::App app{"adaptive stabilized FEM via residual minimization"};
    app.require_subcommand(1);

    CLI::App* run_cmd = app.add_subcommand("run", "run an adaptive study");
    std::string config_path;
    std::string benchmark;
    std::string degree_list;
    int levels = 0;
    double eta_ref = 0.0;
    double newton_tol = 0.0;
    int newton_max_iters = 0;
    bool plots = false;
    bool dg_reference = false;
    std::string out_dir;

    run_cmd->add_option("--config", config_path, "plain-text key = value configuration file");
    auto* o_bench = run_cmd->add_option("--benchmark", benchmark, "benchmark name");
    auto* o_deg = run_cmd->add_option("--degree", degree_list, "polynomial degree list, e.g. 1,2,3");
    auto* o_lvl = run_cmd->add_option("--levels", levels, "number of adaptive levels");
    auto* o_eta = run_cmd->add_option("--eta-ref", eta_ref, "Dorfler marking fraction");
    auto* o_ntol = run_cmd->add_option("--newton-tol", newton_tol, "Newton increment tolerance");
    auto* o_nmax = run_cmd->add_option("--newton-max-iters", newton_max_iters, "Newton iteration cap");
    auto* o_plots = run_cmd->add_flag("--plots", plots, "emit SVG convergence plots");
    auto* o_dg = run_cmd->add_flag("--dg-reference", dg_reference, "also compute the reference dG solution");
    auto* o_out = run_cmd->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_config;
    }

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = parse_config_file(config_path);
    } catch (const InvalidInput& e) {
        std::cerr << "resmin: " << e.what() << "\n";
        return exit_config;
    }

    // Flags override the file.
    try {
        if (o_bench->count() > 0) cfg.benchmark = benchmark;
        if (o_deg->count() > 0) cfg.degrees = parse_degree_list(degree_list);
        if (o_lvl->count() > 0) cfg.levels = levels;
        if (o_eta->count() > 0) cfg.eta_ref = eta_ref;
        if (o_ntol->count() > 0) cfg.newton_tol = newton_tol;
        if (o_nmax->count() > 0) cfg.newton_max_iters = newton_max_iters;
        if (o_plots->count() > 0) cfg.plots = plots;
        if (o_dg->count() > 0) cfg.dg_reference = dg_reference;
        if (o_out->count() > 0) cfg.out_dir = out_dir;
    } catch (const InvalidInput& e) {
        std::cerr << "resmin: " << e.what() << "\n";
        return exit_config;
    }

    return run(cfg);
}

} // namespace resmin
