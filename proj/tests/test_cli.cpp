// Drives the obsctl binary through its verbs on small meshes.

#include "obsctl/io.hpp"
#include "obsctl/mesh.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(OBSCTL_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return r;
    }
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
        r.out.append(buf, got);
    }
    const int st = ::pclose(pipe);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("obsctl_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, ZeroProblemIsCertifiedUnique) {
    const auto r = run("solve --N 8 --gamma-max 100 --f 0 --y0 0 --psi -1 --ud 0");
    ASSERT_EQ(r.status, 0);
    std::istringstream is(r.out);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, obsctl::io::kResultsHeader);
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        EXPECT_NE(line.find(",0.00000000e+00,"), std::string::npos) << line;
        EXPECT_EQ(line.substr(line.rfind(',') + 1), "CertifiedUnique");
    }
    EXPECT_EQ(rows, 3);
}

TEST_F(Cli, GammaMaxControlsRowCount) {
    for (const int e : {0, 3, 6}) {
        const auto r = run("solve --example 2 --N 8 --gamma-max 1e" + std::to_string(e));
        ASSERT_EQ(r.status, 0);
        EXPECT_EQ(count_lines(r.out), static_cast<std::size_t>(e + 2));
    }
    const auto shifted = run("solve --example 2 --N 8 --gamma-start 10 --gamma-max 1e3");
    EXPECT_EQ(count_lines(shifted.out), 4u);
    EXPECT_EQ(shifted.out.substr(shifted.out.find('\n') + 1, 15), "1.00000000e+01,");
}

TEST_F(Cli, OutputFileMatchesStdout) {
    const auto a = run("solve --example 4 --N 8 --gamma-max 1e4");
    const auto b = run("solve --example 4 --N 8 --gamma-max 1e4 --out " + path("t.csv"));
    ASSERT_EQ(b.status, 0);
    EXPECT_EQ(b.out, "");
    EXPECT_EQ(slurp(path("t.csv")), a.out);
}

TEST_F(Cli, SeveralExamplesWriteOneTableEach) {
    const auto r = run("solve --example 1 --example 2 --N 8 --gamma-max 10 --jobs 2 --out " + path("tabs"));
    ASSERT_EQ(r.status, 0);
    for (const int k : {1, 2}) {
        const auto single = run("solve --example " + std::to_string(k) + " --N 8 --gamma-max 10");
        EXPECT_EQ(slurp(path("tabs/example" + std::to_string(k) + ".csv")), single.out);
    }
}

TEST_F(Cli, ExportThenCertify) {
    ASSERT_EQ(run("export --example 1 --N 8 --gamma-max 1e6 --out " + path("f")).status, 0);
    for (const char* name : {"u", "y", "p", "xi", "mu"}) {
        EXPECT_TRUE(fs::exists(path("f/") + name + ".csv")) << name;
        EXPECT_TRUE(fs::exists(path("f/") + name + ".vtk")) << name;
    }
    const std::string fields = " --y " + path("f/y.csv") + " --p " + path("f/p.csv");
    const auto c = run("certify --example 1 --N 8" + fields);
    EXPECT_EQ(c.status, 0);
    EXPECT_NE(c.out.find("verdict   CertifiedUnique"), std::string::npos) << c.out;

    const auto m = run("certify --example 1 --N 8" + fields + " --xi " + path("f/xi.csv") + " --mu " + path("f/mu.csv"));
    EXPECT_EQ(m.status, 0);
    // both routes give the same eta
    const auto eta_line = [](const std::string& out, const std::string& key) {
        const auto at = out.find(key);
        return out.substr(at + key.size(), out.find('\n', at) - at - key.size());
    };
    EXPECT_EQ(eta_line(m.out, "eta       "), eta_line(m.out, "eta (multipliers) "));

    // the same fields on another mesh
    EXPECT_EQ(run("certify --example 1 --N 9" + fields).status, 2);
}

TEST_F(Cli, CertifyRejectsLargeEta) {
    // y - psi = 1 everywhere and p = -100 gives eta = -100 > threshold 3.97
    std::ofstream y(path("y.csv")), p(path("p.csv"));
    const auto mesh = std::make_shared<const obsctl::Mesh>(obsctl::build_uniform_mesh(obsctl::Domain::UnitSquare, 4));
    y << "x,y,value\n";
    p << "x,y,value\n";
    for (obsctl::Index i = 0; i < mesh->num_vertices(); ++i) {
        const auto v = mesh->vertex(i);
        const bool inner = mesh->is_interior(i);
        y << v.x1 << ',' << v.x2 << ',' << (inner ? 1.0 : 0.0) << '\n';
        p << v.x1 << ',' << v.x2 << ',' << (inner ? -100.0 : 0.0) << '\n';
    }
    y.close();
    p.close();
    const auto r = run("certify --N 4 --alpha 0.1 --psi 0 --y " + path("y.csv") + " --p " + path("p.csv"));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.out.find("NotCertified"), std::string::npos);
}

TEST_F(Cli, Eig) {
    const auto r = run("eig --domain square --N 16 --alpha 0.1");
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(r.out.rfind("lambda1   ", 0), 0u);
    const double lambda = std::stod(r.out.substr(10));
    EXPECT_GT(lambda, 19.7392);
    EXPECT_LT(lambda, 20.2);
}

TEST_F(Cli, MeshInfoAndExport) {
    const auto r = run("mesh-info --domain lshape --N 4 --out " + path("m"));
    ASSERT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("vertices  65\n"), std::string::npos);
    EXPECT_NE(r.out.find("interior  33\n"), std::string::npos);
    EXPECT_NE(r.out.find("triangles 96\n"), std::string::npos);
    EXPECT_EQ(count_lines(slurp(path("m.nodes"))), 65u);
    EXPECT_EQ(count_lines(slurp(path("m.elements"))), 96u);
}

TEST_F(Cli, ConfigFileAndFlagPrecedence) {
    {
        std::ofstream cfg(path("c.cfg"));
        cfg << "# small run\nexample = 2\nN = 8\ngamma_max = 1e2\n";
    }
    const auto viaconfig = run("solve --config " + path("c.cfg"));
    const auto viaflags = run("solve --example 2 --N 8 --gamma-max 1e2");
    ASSERT_EQ(viaconfig.status, 0);
    EXPECT_EQ(viaconfig.out, viaflags.out);
    const auto overridden = run("solve --config " + path("c.cfg") + " --gamma-max 10");
    EXPECT_EQ(count_lines(overridden.out), 3u);
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("solve --N 1").status, 2);
    EXPECT_EQ(run("solve --example 7").status, 2);
    EXPECT_EQ(run("solve --gamma-start 0.5").status, 2);
    EXPECT_EQ(run("solve --N 8 --psi 'x1 +'").status, 2);
    EXPECT_EQ(run("frobnicate").status, 2);
    EXPECT_EQ(run("solve --config /nonexistent.cfg").status, 2);
}
