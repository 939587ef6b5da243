#pragma once

// Result tables, nodal field files (CSV and legacy VTK), key=value config
// files and a tiny stderr logger controlled by OBSCTL_LOG.

#include "obsctl/certificate.hpp"
#include "obsctl/error.hpp"
#include "obsctl/fem.hpp"
#include "obsctl/mesh.hpp"
#include "obsctl/penalized.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace obsctl::io {

// ---------------------------------------------------------------- logging

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

/// OBSCTL_LOG = quiet|info|debug (or 0|1|2); default info.
inline LogLevel log_level() {
    const char* v = std::getenv("OBSCTL_LOG");
    if (v == nullptr) {
        return LogLevel::Info;
    }
    const std::string_view s(v);
    if (s == "quiet" || s == "0" || s == "off") {
        return LogLevel::Quiet;
    }
    if (s == "debug" || s == "2") {
        return LogLevel::Debug;
    }
    return LogLevel::Info;
}

inline void log(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) <= static_cast<int>(log_level())) {
        std::cerr << (level == LogLevel::Debug ? "[debug] " : "") << msg << '\n';
    }
}

inline void warn(const std::string& msg) {
    if (log_level() != LogLevel::Quiet) {
        std::cerr << "warning: " << msg << '\n';
    }
}

// ---------------------------------------------------------------- numbers

inline std::string sci(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8e", v);
    return buf;
}

inline std::string exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------- results table

inline constexpr std::string_view kResultsHeader =
    "gamma,min_ratio_pos,min_ratio_neg,eta,min_violation,newton_iters,threshold,kappa,verdict";

inline std::string results_row(const KktSolution& s, const Certificate& c) {
    std::string row = sci(s.gamma);
    for (const double v : {c.min_ratio_pos, c.min_ratio_neg, c.eta, s.min_violation}) {
        row += ',';
        row += sci(v);
    }
    row += ',' + std::to_string(s.newton_iters);
    row += ',' + sci(c.threshold);
    row += ',' + sci(c.kappa);
    row += ',';
    row += to_string(c.verdict);
    return row;
}

inline void write_results(std::ostream& os, const std::vector<KktSolution>& stages,
                          const std::vector<Certificate>& certs) {
    if (stages.size() != certs.size()) {
        throw DimensionMismatch("write_results: one certificate per stage expected");
    }
    os << kResultsHeader << '\n';
    for (std::size_t i = 0; i < stages.size(); ++i) {
        os << results_row(stages[i], certs[i]) << '\n';
    }
}

// ---------------------------------------------------------------- files

inline std::ofstream open_output(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    return os;
}

inline void check_written(std::ostream& os, const std::string& path) {
    os.flush();
    if (!os) {
        throw IoError("write to '" + path + "' failed");
    }
}

/// One line "x,y,value" per vertex, after a header line.
inline void write_field_csv(std::ostream& os, const NodalField& f) {
    os << "x,y,value\n";
    const Mesh& mesh = f.mesh();
    for (Index i = 0; i < mesh.num_vertices(); ++i) {
        const Point& v = mesh.vertex(i);
        os << exact(v.x1) << ',' << exact(v.x2) << ',' << exact(f[i]) << '\n';
    }
}

inline void write_field_csv(const std::string& path, const NodalField& f) {
    auto os = open_output(path);
    write_field_csv(os, f);
    check_written(os, path);
}

/// Reads a field written by write_field_csv; coordinates must match the mesh.
inline NodalField read_field_csv(std::istream& is, std::shared_ptr<const Mesh> mesh, double tol = 1e-12) {
    std::string line;
    if (!std::getline(is, line)) {
        throw IoError("field file is empty");
    }
    if (line.rfind("x,y,value", 0) != 0) {
        throw IoError("field file lacks the 'x,y,value' header");
    }
    Vector values(mesh->num_vertices());
    Index i = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        double x = 0.0, y = 0.0, v = 0.0;
        char c1 = 0, c2 = 0;
        std::istringstream ls(line);
        if (!(ls >> x >> c1 >> y >> c2 >> v) || c1 != ',' || c2 != ',') {
            throw IoError("malformed field line " + std::to_string(i + 2) + ": '" + line + "'");
        }
        if (i >= mesh->num_vertices()) {
            throw MeshMismatch("field file has more rows than the mesh has vertices");
        }
        const Point& p = mesh->vertex(i);
        if (std::abs(p.x1 - x) > tol || std::abs(p.x2 - y) > tol) {
            throw MeshMismatch("field row " + std::to_string(i) + " at (" + exact(x) + ", " + exact(y) +
                               ") does not match mesh vertex (" + exact(p.x1) + ", " + exact(p.x2) + ")");
        }
        values[i++] = v;
    }
    if (i != mesh->num_vertices()) {
        throw MeshMismatch("field file has " + std::to_string(i) + " rows, mesh has " +
                           std::to_string(mesh->num_vertices()) + " vertices");
    }
    return NodalField(std::move(mesh), std::move(values), FieldKind::Free);
}

inline NodalField read_field_csv(const std::string& path, std::shared_ptr<const Mesh> mesh) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open '" + path + "'");
    }
    return read_field_csv(is, std::move(mesh));
}

/// Legacy ASCII VTK, unstructured grid of triangles with one point scalar.
inline void write_vtk(std::ostream& os, const NodalField& f, const std::string& name) {
    const Mesh& mesh = f.mesh();
    os << "# vtk DataFile Version 3.0\n" << name << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << mesh.num_vertices() << " double\n";
    for (const auto& v : mesh.vertices()) {
        os << exact(v.x1) << ' ' << exact(v.x2) << " 0\n";
    }
    os << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
    for (const auto& t : mesh.triangles()) {
        os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    os << "CELL_TYPES " << mesh.num_triangles() << '\n';
    for (Index k = 0; k < mesh.num_triangles(); ++k) {
        os << "5\n";
    }
    os << "POINT_DATA " << mesh.num_vertices() << "\nSCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Index i = 0; i < f.size(); ++i) {
        os << exact(f[i]) << '\n';
    }
}

inline void write_vtk(const std::string& path, const NodalField& f, const std::string& name) {
    auto os = open_output(path);
    write_vtk(os, f, name);
    check_written(os, path);
}

// ---------------------------------------------------------------- config

/// Flat "key = value" file; '#' starts a comment, blank lines are skipped.
inline std::map<std::string, std::string> parse_config(std::istream& is) {
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) {
            return std::string();
        }
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline std::map<std::string, std::string> read_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open config '" + path + "'");
    }
    return parse_config(is);
}

} // namespace obsctl::io
