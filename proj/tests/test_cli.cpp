#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "resmin/cli.hpp"
#include "resmin/report.hpp"

using namespace resmin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("resmin_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

} // namespace

TEST_CASE("parse_config_file: file values and validation") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "run.cfg";
    {
        std::ofstream out(cfg);
        out << "# comment line\n";
        out << "benchmark = lshape\n";
        out << "degrees = 1,2\n";
        out << "levels = 20\n";
        out << "eta_ref = 0.25\n";
        out << "plots = true\n";
    }
    const RunConfig c = parse_config_file(cfg.string());
    CHECK(c.benchmark == "lshape");
    CHECK(c.degrees == std::vector<int>{1, 2});
    CHECK(c.levels == 20);
    CHECK(c.eta_ref == doctest::Approx(0.25));
    CHECK(c.plots);
    CHECK(c.newton_tol == doctest::Approx(1e-6)); // default kept

    RunConfig bad = c;
    bad.out_dir = "x";
    bad.eta_ref = 1.5;
    CHECK_THROWS_AS(validate_config(bad), InvalidInput);
    bad.eta_ref = 0.25;
    bad.degrees = {5};
    CHECK_THROWS_AS(validate_config(bad), InvalidInput);
    bad.degrees = {1};
    bad.levels = 0;
    CHECK_THROWS_AS(validate_config(bad), InvalidInput);

    const fs::path broken = tmp.path / "broken.cfg";
    {
        std::ofstream out(broken);
        out << "levels post 3\n";
    }
    CHECK_THROWS_AS(parse_config_file(broken.string()), InvalidInput);
    CHECK_THROWS_AS(parse_config_file((tmp.path / "missing.cfg").string()), InvalidInput);
}

TEST_CASE("cli_main: flags override the config file") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "run.cfg";
    {
        std::ofstream out(cfg);
        out << "benchmark = lshape\ndegrees = 1\nlevels = 2\neta_ref = 0.25\nout = " << tmp.path.string()
            << "\n";
    }
    const std::string cfg_flag = "--config";
    const std::string cfg_path = cfg.string();
    const char* argv[] = {"resmin", "run", "--config", cfg_path.c_str(), "--eta-ref", "0.125", "--levels", "3"};
    CHECK(cli_main(8, const_cast<char**>(argv)) == exit_ok);

    const std::string meta = slurp(tmp.path / "lshape_p1.meta.txt");
    CHECK(meta.find("eta_ref = 0.125") != std::string::npos);
    CHECK(meta.find("levels = 3") != std::string::npos);
    CHECK(meta.find("wall_time_seconds") != std::string::npos);

    const std::string csv = slurp(tmp.path / "lshape_p1.csv");
    CHECK(count_lines(csv) == 4); // header + one row per level
}

TEST_CASE("run: unknown benchmark exits with code 2") {
    TempDir tmp;
    RunConfig cfg;
    cfg.benchmark = "nosuch";
    cfg.out_dir = tmp.path.string();
    CHECK(run(cfg) == exit_config);
}

TEST_CASE("run: csv is deterministic across reruns") {
    TempDir tmp;
    RunConfig cfg;
    cfg.benchmark = "lshape";
    cfg.degrees = {1};
    cfg.levels = 3;
    cfg.plots = true;
    cfg.dg_reference = true;
    cfg.out_dir = (tmp.path / "a").string();
    REQUIRE(run(cfg) == exit_ok);
    const std::string first = slurp(fs::path(cfg.out_dir) / "lshape_p1.csv");

    cfg.out_dir = (tmp.path / "b").string();
    REQUIRE(run(cfg) == exit_ok);
    const std::string second = slurp(fs::path(cfg.out_dir) / "lshape_p1.csv");
    CHECK(first == second);
    CHECK(!first.empty());

    // header and one row per level
    CHECK(first.rfind("level,dofs,est_Vh,", 0) == 0);
    CHECK(count_lines(first) == 4);
    // the dG columns are filled when requested
    CHECK(fs::exists(fs::path(cfg.out_dir) / "lshape_p1.svg"));

    // SVG has content for every tracked series
    const std::string svg = slurp(fs::path(cfg.out_dir) / "lshape_p1.svg");
    CHECK(svg.find("estimator") != std::string::npos);
    CHECK(svg.find("coarse") != std::string::npos);
    CHECK(svg.find("dG") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("run: nonlinear benchmark emits newton iteration counts") {
    TempDir tmp;
    RunConfig cfg;
    cfg.benchmark = "burgers-isotropic";
    cfg.degrees = {1};
    cfg.levels = 2;
    cfg.out_dir = tmp.path.string();
    REQUIRE(run(cfg) == exit_ok);
    const std::string csv = slurp(tmp.path / "burgers-isotropic_p1.csv");
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line); // header
    while (std::getline(ss, line)) {
        const auto last_comma = line.rfind(',');
        REQUIRE(last_comma != std::string::npos);
        const std::string iters = line.substr(last_comma + 1);
        CHECK(!iters.empty());
        CHECK(std::stoi(iters) >= 1);
    }
}

TEST_CASE("write_records_csv: blanks for unavailable quantities") {
    std::vector<ConvergenceRecord> recs(1);
    recs[0].level = 0;
    recs[0].dofs = 42;
    recs[0].est_vh = 0.5;
    std::stringstream ss;
    write_records_csv(ss, recs);
    const std::string text = ss.str();
    CHECK(text.find("0,42,0.5,,,,,,,,,\n") != std::string::npos);
}
