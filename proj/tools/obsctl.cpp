// obsctl: command-line front end for the penalized obstacle control solver.
//
//   obsctl solve     --example 1 [--gamma-max 1e15] [--out table.csv]
//   obsctl certify   --example 2 --y y.csv --p p.csv [--xi xi.csv --mu mu.csv]
//   obsctl eig       --domain lshape --N 64 --alpha 1
//   obsctl export    --example 1 --gamma-max 1e8 --out fields/
//   obsctl mesh-info --domain square --N 8 [--out mesh]

#include "obsctl/obsctl.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace obsctl;

namespace {

/// Everything a run needs. Filled from a preset, then the config file,
/// then command-line flags, in that order.
struct RunConfig {
    std::optional<int> example;
    Domain domain = Domain::UnitSquare;
    Index N = 64;
    double alpha = 1.0;
    double gamma_start = 1.0;
    double gamma_max = 1e15;
    std::optional<std::string> f, y0, psi, ud;
    double tau = 0.0;
    std::optional<double> lambda1;
    std::string out;
};

struct Flags {
    std::vector<int> examples;
    std::string config;
    std::optional<std::string> domain;
    std::optional<Index> N;
    std::optional<double> alpha, gamma_start, gamma_max, tau, lambda1;
    std::optional<std::string> f, y0, psi, ud;
    std::string out;
    std::string save_fields;
    std::string y_file, p_file, xi_file, mu_file;
    unsigned jobs = 1;
};

double parse_number(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) {
            throw std::invalid_argument(v);
        }
        return d;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    }
}

void apply_config(RunConfig& rc, const std::map<std::string, std::string>& kv, const std::string& path) {
    for (const auto& [key, value] : kv) {
        if (key == "example") {
            continue;   // handled before the preset is applied
        } else if (key == "domain") {
            rc.domain = parse_domain(value);
        } else if (key == "N") {
            rc.N = static_cast<Index>(parse_number(key, value));
        } else if (key == "alpha") {
            rc.alpha = parse_number(key, value);
        } else if (key == "gamma_start") {
            rc.gamma_start = parse_number(key, value);
        } else if (key == "gamma_max") {
            rc.gamma_max = parse_number(key, value);
        } else if (key == "tau") {
            rc.tau = parse_number(key, value);
        } else if (key == "lambda1") {
            rc.lambda1 = parse_number(key, value);
        } else if (key == "f") {
            rc.f = value;
        } else if (key == "y0") {
            rc.y0 = value;
        } else if (key == "psi") {
            rc.psi = value;
        } else if (key == "ud") {
            rc.ud = value;
        } else if (key == "out") {
            rc.out = value;
        } else {
            throw ConfigError("unknown config key '" + key + "' in " + path);
        }
    }
}

RunConfig resolve(const Flags& fl, std::optional<int> example) {
    RunConfig rc;
    std::map<std::string, std::string> kv;
    if (!fl.config.empty()) {
        kv = io::read_config(fl.config);
    }
    rc.example = example;
    if (!rc.example && kv.count("example")) {
        rc.example = static_cast<int>(parse_number("example", kv.at("example")));
    }
    if (rc.example) {
        const auto spec = presets::example(*rc.example);
        rc.domain = spec.domain;
        rc.alpha = spec.alpha;
    }
    apply_config(rc, kv, fl.config);
    if (fl.domain) rc.domain = parse_domain(*fl.domain);
    if (fl.N) rc.N = *fl.N;
    if (fl.alpha) rc.alpha = *fl.alpha;
    if (fl.gamma_start) rc.gamma_start = *fl.gamma_start;
    if (fl.gamma_max) rc.gamma_max = *fl.gamma_max;
    if (fl.tau) rc.tau = *fl.tau;
    if (fl.lambda1) rc.lambda1 = *fl.lambda1;
    if (fl.f) rc.f = fl.f;
    if (fl.y0) rc.y0 = fl.y0;
    if (fl.psi) rc.psi = fl.psi;
    if (fl.ud) rc.ud = fl.ud;
    if (!fl.out.empty()) rc.out = fl.out;

    if (rc.N < 2) throw ConfigError("N must be at least 2");
    if (!(rc.gamma_start >= 1.0)) throw ConfigError("gamma start must be at least 1");
    if (!(rc.gamma_max >= rc.gamma_start)) throw ConfigError("gamma max below gamma start");
    if (!(rc.alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (rc.lambda1 && !(*rc.lambda1 > 0.0)) throw ConfigError("lambda1 must be positive");
    return rc;
}

ProblemSpec make_spec(const RunConfig& rc) {
    ProblemSpec spec;
    if (rc.example) {
        spec = presets::example(*rc.example);
    }
    spec.domain = rc.domain;
    spec.alpha = rc.alpha;
    if (rc.f) spec.f = ScalarFunction::from_expression(*rc.f);
    if (rc.y0) spec.y0 = ScalarFunction::from_expression(*rc.y0);
    if (rc.psi) spec.psi = ScalarFunction::from_expression(*rc.psi);
    if (rc.ud) spec.ud = ScalarFunction::from_expression(*rc.ud);
    return spec;
}

/// gamma_start * 10^k up to gamma_max.
std::vector<double> make_schedule(const RunConfig& rc) {
    std::vector<double> s;
    const int decades = static_cast<int>(std::floor(std::log10(rc.gamma_max / rc.gamma_start) + 1e-9));
    for (int k = 0; k <= decades; ++k) {
        s.push_back(rc.gamma_start * std::pow(10.0, k));
    }
    return s;
}

double discrete_lambda1(const ProblemData& d) {
    return smallest_generalized_eigenvalue(d.stiffness, d.mass).value;
}

/// 2 pi^2 on the unit square; the computed discrete value on the L-shape.
double certificate_lambda1(const RunConfig& rc, const ProblemData& d) {
    if (rc.lambda1) {
        return *rc.lambda1;
    }
    if (rc.domain == Domain::UnitSquare) {
        return 2.0 * std::numbers::pi * std::numbers::pi;
    }
    return discrete_lambda1(d);
}

void export_stage(const KktSolution& s, const ProblemData& d, const std::string& dir) {
    fs::create_directories(dir);
    const auto [xi, mu] = multiplier_fields(s.y, s.p, d.psi_h, s.gamma);
    const std::vector<std::pair<std::string, const NodalField*>> fields{
        {"u", &s.u}, {"y", &s.y}, {"p", &s.p}, {"xi", &xi}, {"mu", &mu}};
    for (const auto& [name, field] : fields) {
        io::write_field_csv((fs::path(dir) / (name + ".csv")).string(), *field);
        io::write_vtk((fs::path(dir) / (name + ".vtk")).string(), *field, name);
    }
}

struct SolveOutcome {
    HomotopyResult homotopy;
    std::vector<Certificate> certs;
};

SolveOutcome run_homotopy(const RunConfig& rc, const ProblemData& d) {
    const double lambda1 = certificate_lambda1(rc, d);
    SolveOutcome out;
    out.homotopy = gamma_homotopy(d, make_schedule(rc));
    for (const auto& s : out.homotopy.stages) {
        const auto c = classify_nodes(s.y, d.psi_h, rc.tau);
        out.certs.push_back(finish_certificate(compute_eta(s.y, s.p, d.psi_h, c), d.alpha, lambda1));
        io::log(io::LogLevel::Debug, "gamma " + io::sci(s.gamma) + ": " + std::to_string(s.newton_iters) +
                                         " Newton steps, eta " + io::sci(out.certs.back().eta));
    }
    if (out.homotopy.truncated) {
        io::warn("homotopy stopped after gamma = " + io::sci(out.homotopy.last_gamma()) + ": " +
                 out.homotopy.truncation_reason);
    }
    return out;
}

void emit_table(const SolveOutcome& r, const std::string& path) {
    if (path.empty() || path == "-") {
        io::write_results(std::cout, r.homotopy.stages, r.certs);
        return;
    }
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    auto os = io::open_output(path);
    io::write_results(os, r.homotopy.stages, r.certs);
    io::check_written(os, path);
}

int cmd_solve(const Flags& fl) {
    std::vector<std::optional<int>> runs;
    for (const int k : fl.examples) {
        runs.emplace_back(k);
    }
    if (runs.empty()) {
        runs.emplace_back(std::nullopt);
    }
    if (runs.size() == 1) {
        const auto rc = resolve(fl, runs[0]);
        const auto d = ProblemData::build(make_spec(rc), rc.N);
        const auto r = run_homotopy(rc, d);
        emit_table(r, rc.out);
        if (!fl.save_fields.empty()) {
            export_stage(r.homotopy.stages.back(), d, fl.save_fields);
        }
        return 0;
    }

    // several examples: --out names a directory, one table per example
    const std::string dir = fl.out.empty() ? "." : fl.out;
    std::atomic<std::size_t> next{0};
    std::atomic<int> status{0};
    std::mutex err_mu;
    auto worker = [&] {
        for (std::size_t i = next++; i < runs.size(); i = next++) {
            const int k = *runs[i];
            try {
                Flags one = fl;
                one.out.clear();
                auto rc = resolve(one, k);
                rc.out = (fs::path(dir) / ("example" + std::to_string(k) + ".csv")).string();
                const auto d = ProblemData::build(make_spec(rc), rc.N);
                emit_table(run_homotopy(rc, d), rc.out);
                if (!fl.save_fields.empty()) {
                    io::log(io::LogLevel::Info, "--save-fields is ignored when solving several examples");
                }
            } catch (const std::exception& e) {
                std::lock_guard lock(err_mu);
                std::cerr << "example " << k << ": " << e.what() << '\n';
                status = 2;
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(fl.jobs, static_cast<unsigned>(runs.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    return status;
}

int cmd_export(const Flags& fl) {
    const auto rc = resolve(fl, fl.examples.empty() ? std::nullopt : std::optional<int>(fl.examples.front()));
    const auto d = ProblemData::build(make_spec(rc), rc.N);
    const auto r = run_homotopy(rc, d);
    const std::string dir = rc.out.empty() ? "fields" : rc.out;
    export_stage(r.homotopy.stages.back(), d, dir);
    std::cout << "wrote u, y, p, xi, mu at gamma = " << io::sci(r.homotopy.last_gamma()) << " to " << dir << '\n';
    return 0;
}

int cmd_certify(const Flags& fl) {
    if (fl.y_file.empty() || fl.p_file.empty()) {
        throw ConfigError("certify needs --y and --p field files");
    }
    const auto rc = resolve(fl, fl.examples.empty() ? std::nullopt : std::optional<int>(fl.examples.front()));
    const auto d = ProblemData::build(make_spec(rc), rc.N);
    const auto y = io::read_field_csv(fl.y_file, d.mesh);
    const auto p = io::read_field_csv(fl.p_file, d.mesh);
    const double lambda1 = certificate_lambda1(rc, d);
    const auto c = classify_nodes(y, d.psi_h, rc.tau);
    const auto cert = finish_certificate(compute_eta(y, p, d.psi_h, c), d.alpha, lambda1);

    std::cout << "eta       " << io::sci(cert.eta) << '\n'
              << "threshold " << io::sci(cert.threshold) << '\n'
              << "kappa     " << io::sci(cert.kappa) << '\n';
    if (!cert.biactive_ok) {
        std::cout << "biactive nodes with p < 0:";
        for (const Index j : cert.biactive_violations) {
            std::cout << ' ' << j;
        }
        std::cout << '\n';
    }
    bool ok = certified(cert.verdict);
    std::cout << "verdict   " << to_string(cert.verdict) << '\n';

    if (!fl.xi_file.empty() || !fl.mu_file.empty()) {
        if (fl.xi_file.empty() || fl.mu_file.empty()) {
            throw ConfigError("--xi and --mu must be given together");
        }
        // nodal densities as written by export; convert to load units
        const auto xi = io::read_field_csv(fl.xi_file, d.mesh);
        const auto mu = io::read_field_csv(fl.mu_file, d.mesh);
        const auto m = d.lumped_interior();
        const Vector xi_load = m.cwiseProduct(xi.interior());
        const Vector mu_load = -m.cwiseProduct(mu.interior());
        const double eta_u = eta_unpenalized(y.interior(), p.interior(), xi_load, mu_load, d.psi_interior());
        const Verdict v = verdict_for(eta_u, cert.threshold, true);
        std::cout << "eta (multipliers) " << io::sci(eta_u) << '\n'
                  << "verdict (multipliers) " << to_string(v) << '\n';
        ok = ok && certified(v);
    }
    return ok ? 0 : 1;
}

int cmd_eig(const Flags& fl) {
    const auto rc = resolve(fl, fl.examples.empty() ? std::nullopt : std::optional<int>(fl.examples.front()));
    const auto mesh = std::make_shared<const Mesh>(build_uniform_mesh(rc.domain, rc.N));
    const Index n = mesh->num_interior();
    const auto r = smallest_generalized_eigenvalue(assemble_stiffness(*mesh).block(0, n, 0, n),
                                                   assemble_mass(*mesh).block(0, n, 0, n));
    std::printf("lambda1   %.8f\n", r.value);
    std::printf("threshold %.4f (alpha = %g)\n", threshold(rc.alpha, r.value), rc.alpha);
    return 0;
}

int cmd_mesh_info(const Flags& fl) {
    const auto rc = resolve(fl, fl.examples.empty() ? std::nullopt : std::optional<int>(fl.examples.front()));
    const Mesh mesh = build_uniform_mesh(rc.domain, rc.N);
    std::cout << "domain    " << to_string(mesh.domain()) << '\n'
              << "N         " << mesh.subdivisions() << '\n'
              << "vertices  " << mesh.num_vertices() << '\n'
              << "interior  " << mesh.num_interior() << '\n'
              << "boundary  " << mesh.num_boundary() << '\n'
              << "triangles " << mesh.num_triangles() << '\n';
    std::printf("h         %.17g\n", mesh.h());
    if (!rc.out.empty()) {
        auto nodes = io::open_output(rc.out + ".nodes");
        mesh.write_nodes(nodes);
        io::check_written(nodes, rc.out + ".nodes");
        auto elems = io::open_output(rc.out + ".elements");
        mesh.write_elements(elems);
        io::check_written(elems, rc.out + ".elements");
    }
    return 0;
}

void add_problem_options(CLI::App* app, Flags& fl) {
    app->add_option("--example", fl.examples, "Built-in example 1-4 (repeatable for solve)")
        ->check(CLI::Range(1, 4));
    app->add_option("--config", fl.config, "key = value configuration file");
    app->add_option("--domain", fl.domain, "square or lshape");
    app->add_option("--N", fl.N, "Cells per unit length (default 64)");
    app->add_option("--alpha", fl.alpha, "Control cost weight");
    app->add_option("--gamma-start", fl.gamma_start, "First penalty parameter (default 1)");
    app->add_option("--gamma-max", fl.gamma_max, "Last penalty parameter (default 1e15)");
    app->add_option("--f", fl.f, "Load f(x1, x2)");
    app->add_option("--y0", fl.y0, "Desired state y0(x1, x2)");
    app->add_option("--psi", fl.psi, "Obstacle psi(x1, x2)");
    app->add_option("--ud", fl.ud, "Control shift u_d(x1, x2)");
    app->add_option("--tau", fl.tau, "Tolerance for y = psi in the node classification");
    app->add_option("--lambda1", fl.lambda1, "Override the eigenvalue used in the threshold");
    app->add_option("--out", fl.out, "Output file or directory");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal control of the obstacle problem: penalized solves and global-optimality certificates"};
    app.require_subcommand(1);
    Flags fl;

    auto* solve = app.add_subcommand("solve", "Run the gamma homotopy and print the results table");
    add_problem_options(solve, fl);
    solve->add_option("--save-fields", fl.save_fields, "Directory for the final stage's fields");
    solve->add_option("--jobs", fl.jobs, "Examples solved concurrently")->check(CLI::PositiveNumber);

    auto* certify_cmd = app.add_subcommand("certify", "Certify nodal fields read from disk");
    add_problem_options(certify_cmd, fl);
    certify_cmd->add_option("--y", fl.y_file, "State field CSV")->check(CLI::ExistingFile);
    certify_cmd->add_option("--p", fl.p_file, "Adjoint field CSV")->check(CLI::ExistingFile);
    certify_cmd->add_option("--xi", fl.xi_file, "Multiplier xi CSV")->check(CLI::ExistingFile);
    certify_cmd->add_option("--mu", fl.mu_file, "Multiplier mu CSV")->check(CLI::ExistingFile);

    auto* eig = app.add_subcommand("eig", "Smallest Dirichlet eigenvalue and the threshold");
    add_problem_options(eig, fl);

    auto* exp = app.add_subcommand("export", "Write u, y, p, xi, mu of the last stage as CSV and VTK");
    add_problem_options(exp, fl);

    auto* info = app.add_subcommand("mesh-info", "Mesh statistics; --out PREFIX writes node/element lists");
    add_problem_options(info, fl);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help exits 0; every usage error exits 2 like other failures
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (solve->parsed()) return cmd_solve(fl);
        if (certify_cmd->parsed()) return cmd_certify(fl);
        if (eig->parsed()) return cmd_eig(fl);
        if (exp->parsed()) return cmd_export(fl);
        if (info->parsed()) return cmd_mesh_info(fl);
    } catch (const MeshMismatch& e) {
        std::cerr << "mesh mismatch: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
