#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <string>

#ifndef FLOWMI_CLI_PATH
#error "FLOWMI_CLI_PATH must point at the CLI binary"
#endif

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
};

// stderr folds into the captured stream; the CLI keeps it silent on success
CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(FLOWMI_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

} // namespace

using nlohmann::json;

TEST_CASE("generate then estimate recovers the ground truth") {
    const auto gen = run_cli("generate --n 1000 --d 1 --dz 1 --rho 0.8 --f cube --g cube --seed 42 "
                             "--output cli_scenario.csv");
    REQUIRE(gen.exit_code == 0);
    const auto gj = json::parse(gen.out);
    CHECK(gj["ground_truth_cmi"].get<double>() == doctest::Approx(0.5108256238).epsilon(1e-6));
    CHECK(slurp("cli_scenario.csv.meta").find("ground_truth_cmi=") != std::string::npos);

    const auto est = run_cli("estimate --input cli_scenario.csv --x-cols x0 --y-cols y0 --z-cols z0 --seed 1");
    REQUIRE(est.exit_code == 0);
    const auto ej = json::parse(est.out);
    CHECK(std::abs(ej["estimate"].get<double>() - 0.5108) < 0.15);
    CHECK(ej["n"].get<int>() == 1000);
    CHECK(ej["dims"]["d_z"].get<int>() == 1);

    // identical invocation, identical JSON
    const auto est2 = run_cli("estimate --input cli_scenario.csv --x-cols x0 --y-cols y0 --z-cols z0 --seed 1");
    CHECK(est.out == est2.out);
}

TEST_CASE("estimate without z columns runs the MI path") {
    const auto gen = run_cli("generate --n 500 --d 1 --dz 0 --rho 0.0 --f linear --g linear --seed 3 "
                             "--output cli_mi.csv");
    REQUIRE(gen.exit_code == 0);
    const auto est = run_cli("estimate --input cli_mi.csv --x-cols x0 --y-cols y0 --seed 2 --epochs 60");
    REQUIRE(est.exit_code == 0);
    const auto ej = json::parse(est.out);
    CHECK(ej["dims"]["d_z"].get<int>() == 0);
    CHECK(std::abs(ej["estimate"].get<double>()) < 0.1);
    std::remove("cli_mi.csv");
    std::remove("cli_mi.csv.meta");
}

TEST_CASE("non-numeric cell is rejected with the offending row") {
    {
        std::ofstream out("cli_bad.csv");
        out << "x0,y0\n";
        for (int i = 1; i <= 6; ++i) out << i << "," << -i << "\n";
        out << "7,oops\n8,8\n";
    }
    const auto r = run_cli("estimate --input cli_bad.csv --x-cols x0 --y-cols y0");
    CHECK(r.exit_code == 2);
    CHECK(r.out.find("row 7") != std::string::npos);
    CHECK(r.out.find("y0") != std::string::npos);
    std::remove("cli_bad.csv");

    const auto missing = run_cli("estimate --input no_such_file.csv --x-cols x0 --y-cols y0");
    CHECK(missing.exit_code == 2);

    const auto usage = run_cli("estimate --x-cols x0");
    CHECK(usage.exit_code == 2);
}

TEST_CASE("citest decides dependence and honors B = 1") {
    const auto gen = run_cli("generate --n 500 --d 1 --dz 3 --rho 0.9 --f cube --g sigmoid --seed 9 "
                             "--output cli_ci.csv");
    REQUIRE(gen.exit_code == 0);

    const auto ci = run_cli("citest --input cli_ci.csv --x-cols x0 --y-cols y0 --z-cols z0,z1,z2 "
                            "--permutations 50 --seed 4 --epochs 60");
    REQUIRE(ci.exit_code == 0);
    const auto cj = json::parse(ci.out);
    CHECK(cj["decision"].get<std::string>() == "dependent");
    CHECK(cj["p_value"].get<double>() == 0.0);

    const auto one = run_cli("citest --input cli_ci.csv --x-cols x0 --y-cols y0 --z-cols z0,z1,z2 "
                             "--permutations 1 --seed 4 --epochs 30");
    REQUIRE(one.exit_code == 0);
    const double p = json::parse(one.out)["p_value"].get<double>();
    CHECK((p == 0.0 || p == 1.0));
    std::remove("cli_ci.csv");
    std::remove("cli_ci.csv.meta");
}

TEST_CASE("benchmark emits deterministic records and cit metrics") {
    const std::string flags = "benchmark --task cit --n 150 --d 1 --dz 2 --runs 2 --permutations 10 "
                              "--epochs 8 --seed 31 --output cli_bench.csv";
    const auto a = run_cli(flags);
    REQUIRE(a.exit_code == 0);
    const std::string csv_a = slurp("cli_bench.csv");
    const auto aj = json::parse(a.out);
    REQUIRE(aj["cells"].size() == 1);
    CHECK(aj["cells"][0]["metrics"]["n_dependent"].get<int>() == 2);
    CHECK(aj["records"].get<int>() == 4);

    const auto b = run_cli(flags);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp("cli_bench.csv") == csv_a);

    // header schema is stable
    CHECK(csv_a.rfind("task,n,d,d_z,rho,label,run,seed,estimate,p_value,ground_truth\n", 0) == 0);
    std::remove("cli_bench.csv");
    std::remove("cli_scenario.csv");
    std::remove("cli_scenario.csv.meta");
}
