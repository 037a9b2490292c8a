#include "cli.hpp"

#include "nafe/panel_data.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nafe;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "nafe_cli_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> rows_of(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        rows.push_back(fields);
    }
    return rows;
}

const std::string demo = "data/demo_panel.csv";

}  // namespace

TEST_CASE("demo panel has the documented shape") {
    auto d = load_csv(demo, ColumnMap::positional(read_csv_header(demo)));
    CHECK(d.n() == 45);
    CHECK(d.T() == 16);
    CHECK(d.time_ids().front() == "1988");
    CHECK(d.time_ids().back() == "2003");
    CHECK(d.regressor_names().back() == "log_oil_wealth");
}

TEST_CASE("estimate: nafe at the mean gives one row per coefficient") {
    auto out = scratch("est_nafe.csv");
    auto r = run({"estimate", "--data", demo, "--method", "nafe", "--tau", "0.5", "--x-star", "mean", "--out",
                  out.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("seed: 42") != std::string::npos);
    auto rows = rows_of(out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"method", "tau", "coefficient", "estimate", "se"});
    CHECK(rows[1][2] == "(Intercept)");
    CHECK(rows[2][2] == "log_oil_wealth");
    CHECK(rows[1][4] == "NA");

    auto manifest = nlohmann::json::parse(slurp(scratch("est_nafe.meta.json")));
    CHECK(manifest["seed"] == 42);
    CHECK(manifest["version"].is_string());
    CHECK(manifest["x_star"].size() == 2);
    CHECK(manifest["x_star"][0] == 1.0);
}

TEST_CASE("estimate: fe on the noiseless demo panel recovers slope 2 exactly") {
    auto out = scratch("est_fe.csv");
    auto r = run({"estimate", "--data", demo, "--method", "fe,feqr", "--tau", "0.25,0.75", "--out", out.string()});
    REQUIRE(r.code == 0);
    auto rows = rows_of(out);
    REQUIRE(rows.size() == 4);
    CHECK(rows[1] == std::vector<std::string>{"fe", "NA", "log_oil_wealth", "2", "NA"});
    CHECK(std::stod(rows[2][3]) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("estimate: bootstrap standard errors and explicit x*") {
    auto out = scratch("est_se.csv");
    auto r = run({"estimate", "--data", demo, "--tau", "0.5", "--x-star", "6", "--se", "bootstrap", "--B", "50",
                  "--seed", "9", "--out", out.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("seed: 9") != std::string::npos);
    auto rows = rows_of(out);
    CHECK(rows[1][4] != "NA");
    CHECK(std::stod(rows[1][4]) >= 0.0);
}

TEST_CASE("estimate: usage errors exit 1") {
    auto out = scratch("bad.csv");
    auto r = run({"estimate", "--data", demo, "--tau", "1.5", "--out", out.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("open interval (0,1)") != std::string::npos);
    CHECK(run({"estimate", "--data", demo, "--tau", "0.5", "--out", out.string(), "--bogus"}).code == 1);
    CHECK(run({"estimate", "--data", demo, "--tau", "0.5", "--method", "ols", "--out", out.string()}).code == 1);
    CHECK(run({"estimate", "--data", demo, "--tau", "0.5", "--x-star", "1,2,3", "--out", out.string()}).code == 1);
    CHECK(run({"estimate", "--tau", "0.5", "--out", out.string()}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({}).code == 1);
}

TEST_CASE("estimate: data errors exit 2, singular units exit 3") {
    auto out = scratch("x.csv");
    CHECK(run({"estimate", "--data", "no/such/file.csv", "--tau", "0.5", "--out", out.string()}).code == 2);

    auto unbalanced = scratch("unbalanced.csv");
    std::ofstream(unbalanced) << "unit,time,y,x\nA,1,1,1\nA,2,2,2\nB,1,1,1\n";
    auto r = run({"estimate", "--data", unbalanced.string(), "--tau", "0.5", "--out", out.string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("B") != std::string::npos);

    auto singular = scratch("singular.csv");
    std::ofstream(singular) << "unit,time,y,x\nA,1,1,1\nA,2,2,2\nA,3,2,3\nB,1,1,5\nB,2,2,5\nB,3,3,5\n";
    r = run({"estimate", "--data", singular.string(), "--tau", "0.5", "--out", out.string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("B") != std::string::npos);
}

TEST_CASE("help exits 0 and lists every flag") {
    auto r = run({"--help"});
    CHECK(r.code == 0);
    for (const char* sub : {"estimate", "simulate", "bootstrap", "probe"}) CHECK(r.out.find(sub) != std::string::npos);
    auto e = run({"estimate", "--help"});
    CHECK(e.code == 0);
    for (const char* flag : {"--data", "--tau", "--x-star", "--method", "--se", "--B", "--seed", "--out", "--threads"})
        CHECK(e.out.find(flag) != std::string::npos);
    auto s = run({"simulate", "--help"});
    CHECK(s.code == 0);
    for (const char* flag : {"--table", "--reps", "--seed", "--out", "--n", "--rates", "--rho", "--sigma-v"})
        CHECK(s.out.find(flag) != std::string::npos);
    CHECK(run({"probe", "--help"}).code == 0);
    CHECK(run({"bootstrap", "--help"}).code == 0);
}

TEST_CASE("presets encode the table grids") {
    auto t1 = cli::expand_grid(cli::preset_grid("t1"), 500, 42, 0);
    CHECK(t1.spec_grid.size() == 28);
    CHECK(t1.taus == std::vector<double>{0.25, 0.5, 0.75});
    CHECK(t1.x_star_rules.size() == 1);
    CHECK(t1.x_star_rules[0].value(1) == 4.5);
    std::size_t skipped = 0;
    for (const auto& s : t1.spec_grid) skipped += s.n * s.T > t1.max_cell_obs;
    CHECK(skipped == 5);  // n=2000,5000,10000 at T=n and n=5000,10000 at T=n^(3/4)

    auto t2 = cli::expand_grid(cli::preset_grid("t2"), 500, 42, 0);
    CHECK(t2.spec_grid.size() == 2);
    CHECK(t2.x_star_rules.size() == 5);

    auto t3 = cli::expand_grid(cli::preset_grid("t3"), 500, 42, 0);
    CHECK(t3.spec_grid.size() == 12);
    CHECK(t3.spec_grid[0].family == DgpFamily::RankMixture);
    CHECK(t3.estimators == std::vector<Estimator>{Estimator::Nafe, Estimator::Feqr});

    auto t8 = cli::expand_grid(cli::preset_grid("t8"), 500, 42, 0);
    CHECK(t8.spec_grid.size() == 4);
    CHECK(t8.estimators.back() == Estimator::Fe);

    CHECK_THROWS_AS(cli::preset_grid("t9"), cli::UsageError);
    CHECK_THROWS_AS(cli::expand_grid(cli::preset_grid("custom"), 10, 1, 1), cli::UsageError);
}

TEST_CASE("simulate: t8 layout includes the fe row") {
    auto out = scratch("t8.csv");
    auto r = run({"simulate", "--table", "t8", "--reps", "3", "--seed", "42", "--rho", "10", "--out", out.string()});
    REQUIRE(r.code == 0);
    auto rows = rows_of(out);
    CHECK(rows[0].size() == 13);
    bool fe = false;
    for (const auto& row : rows)
        if (row[6] == "fe") {
            fe = true;
            CHECK(row[5] == "NA");
            CHECK(row[7] == "NA");
        }
    CHECK(fe);
    auto manifest = nlohmann::json::parse(slurp(scratch("t8.meta.json")));
    CHECK(manifest["grid"].size() == 1);
    CHECK(manifest["reps"] == 3);
}

TEST_CASE("simulate: t1 rows cover tau x n x rate") {
    auto out = scratch("t1.csv");
    auto r = run({"simulate", "--table", "t1", "--reps", "2", "--n", "100,200", "--out", out.string()});
    REQUIRE(r.code == 0);
    auto rows = rows_of(out);
    // 2 n x 4 rates x 3 tau x 2 coefficients.
    CHECK(rows.size() == 1 + 2 * 4 * 3 * 2);
}

TEST_CASE("simulate: usage errors") {
    auto out = scratch("bad_sim.csv");
    CHECK(run({"simulate", "--table", "t1", "--reps", "0", "--out", out.string()}).code == 1);
    CHECK(run({"simulate", "--table", "t5", "--out", out.string()}).code == 1);
    CHECK(run({"simulate", "--table", "custom", "--n", "10", "--out", out.string()}).code == 1);
    CHECK(run({"simulate", "--table", "t2", "--tau", "0", "--out", out.string()}).code == 1);
    auto ok = run({"simulate", "--table", "custom", "--family", "baseline", "--n", "20", "--T", "5", "--rho", "1",
                   "--sigma-v", "1", "--reps", "2", "--out", out.string()});
    CHECK(ok.code == 0);
}

TEST_CASE("simulate and bootstrap output does not depend on --threads") {
    auto a = scratch("det_a.csv"), b = scratch("det_b.csv");
    std::vector<std::string> base{"simulate", "--table", "t3", "--reps", "4", "--seed", "11", "--rho", "1"};
    auto ra = base, rb = base;
    ra.insert(ra.end(), {"--threads", "1", "--out", a.string()});
    rb.insert(rb.end(), {"--threads", "3", "--out", b.string()});
    REQUIRE(run(ra).code == 0);
    REQUIRE(run(rb).code == 0);
    CHECK(slurp(a) == slurp(b));

    REQUIRE(run({"bootstrap", "--data", demo, "--tau", "0.25,0.5", "--B", "60", "--threads", "1", "--out",
                 a.string()}).code == 0);
    REQUIRE(run({"bootstrap", "--data", demo, "--tau", "0.25,0.5", "--B", "60", "--threads", "4", "--out",
                 b.string()}).code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(rows_of(a)[0] == std::vector<std::string>{"tau", "coefficient", "se", "B", "seed", "failed_replicates"});
}

TEST_CASE("probes") {
    auto out = scratch("probe.csv");
    auto r = run({"probe", "--which", "identification", "--tau", "0.5", "--out", out.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("|p_hat - tau|") != std::string::npos);

    r = run({"probe", "--which", "spacing", "--n", "10", "--reps", "2000", "--out", out.string()});
    REQUIRE(r.code == 0);
    auto rows = rows_of(out);
    CHECK(rows[0] == std::vector<std::string>{"n", "x", "empirical", "bound", "se", "empirical_le_bound"});
    CHECK(rows.size() == 11);

    r = run({"probe", "--which", "permutation", "--n", "50", "--T", "4", "--reps", "5", "--out", out.string()});
    REQUIRE(r.code == 0);
    CHECK(rows_of(out)[1][5] == "1");

    CHECK(run({"probe", "--which", "entropy", "--out", out.string()}).code == 1);
    CHECK(run({"probe", "--which", "spacing", "--points", "1", "--out", out.string()}).code == 1);
    CHECK(run({"probe", "--which", "identification", "--tau", "2", "--out", out.string()}).code == 1);
}

TEST_CASE("x* parsing") {
    CHECK(cli::parse_x_star("mean", 2, true).size() == 0);
    CHECK(cli::parse_x_star("4.5", 2, true) == Eigen::Vector2d(1.0, 4.5));
    CHECK(cli::parse_x_star("1,4.5", 2, true) == Eigen::Vector2d(1.0, 4.5));
    CHECK(cli::parse_x_star("2,4.5", 2, false) == Eigen::Vector2d(2.0, 4.5));
    CHECK_THROWS_AS(cli::parse_x_star("4.5", 2, false), cli::UsageError);
    CHECK_THROWS_AS(cli::parse_x_star("a,b", 2, true), cli::UsageError);
}
