#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fixtures.hpp"

#ifndef SSCERT_CLI
#error "SSCERT_CLI must name the command-line binary"
#endif

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(SSCERT_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("sscert_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::string case9 = "--case " + fixtures::data("case9.m");

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("certify then validate case9") {
    const auto dir = scratch("case9");
    REQUIRE(run(case9 + " --out " + dir.string() + " certify") == 0);
    const auto cert_text = slurp(dir / "certificate.json");
    const auto j = nlohmann::json::parse(cert_text);
    CHECK(j.at("schema") == "sscert-certificate");
    CHECK(j.at("version") == 1);
    CHECK(j.at("status") == "certified-nonlinear");
    CHECK(j.at("value").get<double>() > 0.0);

    CHECK(run(case9 + " --out " + dir.string() + " validate") == 0);
    const auto rep = nlohmann::json::parse(slurp(dir / "validation.json"));
    CHECK(rep.at("soundness").at("failures") == 0);

    SUBCASE("output is deterministic") {
        const auto again = scratch("case9_again");
        REQUIRE(run(case9 + " --out " + again.string() + " certify") == 0);
        CHECK(slurp(again / "certificate.json") == cert_text);
    }
    SUBCASE("zero samples still passes") {
        CHECK(run(case9 + " --samples 0 --brouwer-samples 0 --out " + dir.string() + " validate") == 0);
    }
    SUBCASE("tampered certificate fails validation") {
        auto t = j;
        for (auto side : {"lo", "hi"}) {
            for (auto& v : t["lu"][side]) v = v.get<double>() * 3.0;
        }
        const auto bad = dir / "tampered.json";
        std::ofstream(bad) << t.dump(1);
        CHECK(run(case9 + " --certificate " + bad.string() + " --out " + dir.string() + " validate") == 3);
    }
}

TEST_CASE("section files") {
    const auto dir = scratch("section");
    REQUIRE(run(case9 + " --plane 9,7 --rays 1 --out " + dir.string() + " section") == 0);
    const auto csv = slurp(dir / "section_9_7.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.rfind("angle,r_true,r_cert\n", 0) == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "section_9_7.json"));
    CHECK(j.at("rays").size() == 1);
}

TEST_CASE("errors exit with 1") {
    const auto dir = scratch("errors");
    CHECK(run("--case " + fixtures::data("no_such_case.m") + " --out " + dir.string() + " certify") == 1);
    CHECK(run(case9 + " --plane 99,7 --out " + dir.string() + " section") == 1);
    CHECK(run(case9 + " --band 2 --out " + dir.string() + " certify") == 1);
    CHECK(run(case9 + " --out " + dir.string() + " frobnicate") == 1);
    CHECK(run(case9 + " --certificate " + (dir / "missing.json").string() + " validate") == 1);
}

TEST_CASE("config file supplies options") {
    const auto dir = scratch("config");
    const auto cfg = dir / "run.ini";
    std::ofstream(cfg) << "case=" << fixtures::data("case9.m") << "\nplane=9,7\nlp-only=true\nout=" << dir.string() << "\n";
    REQUIRE(run("--config " + cfg.string() + " certify") == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "certificate.json"));
    CHECK(j.at("status") == "certified-linear-relaxation");
}

TEST_CASE("an angle cap the base point already exceeds exits with 2") {
    const auto dir = scratch("zero");
    CHECK(run(case9 + " --plane 9,7 --theta-cap 1e-6 --out " + dir.string() + " certify") == 2);
    CHECK_FALSE(fs::exists(dir / "certificate.json"));
}

}  // TEST_SUITE
