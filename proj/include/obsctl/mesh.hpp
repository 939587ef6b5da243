#pragma once

#include "obsctl/error.hpp"
#include "obsctl/sparse_matrix.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace obsctl {

/// UnitSquare = (0,1)^2, LShape = (-1,0)x(-1,1) u [0,1)x(0,1).
enum class Domain { UnitSquare, LShape };

inline std::string_view to_string(Domain d) {
    return d == Domain::UnitSquare ? "square" : "lshape";
}

inline Domain parse_domain(std::string_view s) {
    if (s == "square" || s == "unit-square" || s == "UnitSquare") {
        return Domain::UnitSquare;
    }
    if (s == "lshape" || s == "l-shape" || s == "LShape") {
        return Domain::LShape;
    }
    throw ConfigError("unknown domain '" + std::string(s) + "' (expected square or lshape)");
}

inline double domain_area(Domain d) { return d == Domain::UnitSquare ? 1.0 : 3.0; }

struct Point {
    double x1 = 0.0;
    double x2 = 0.0;
};

/// Geometric test for x in the boundary of the domain.
inline bool on_boundary(Domain d, Point p, double tol = 1e-12) {
    auto near = [tol](double a, double b) { return std::abs(a - b) <= tol; };
    if (d == Domain::UnitSquare) {
        return near(p.x1, 0.0) || near(p.x1, 1.0) || near(p.x2, 0.0) || near(p.x2, 1.0);
    }
    return near(p.x1, -1.0) || near(p.x1, 1.0) || near(p.x2, 1.0) ||
           (near(p.x2, -1.0) && p.x1 <= tol) || (near(p.x2, 0.0) && p.x1 >= -tol) ||
           (near(p.x1, 0.0) && p.x2 <= tol);
}

using Triangle = std::array<Index, 3>;

/// Conforming triangulation. Vertices 0..n-1 are interior, n..n+m-1 lie on
/// the boundary.
class Mesh {
public:
    Mesh(Domain domain, Index subdivisions, std::vector<Point> vertices, std::vector<Triangle> triangles,
         Index num_interior)
        : domain_(domain), subdivisions_(subdivisions), vertices_(std::move(vertices)),
          triangles_(std::move(triangles)), num_interior_(num_interior) {
        h_ = 0.0;
        for (const auto& t : triangles_) {
            h_ = std::max(h_, diameter(t));
        }
    }

    Domain domain() const noexcept { return domain_; }
    Index subdivisions() const noexcept { return subdivisions_; }
    const std::vector<Point>& vertices() const noexcept { return vertices_; }
    const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
    const Point& vertex(Index i) const { return vertices_[static_cast<std::size_t>(i)]; }

    Index num_vertices() const noexcept { return static_cast<Index>(vertices_.size()); }
    Index num_triangles() const noexcept { return static_cast<Index>(triangles_.size()); }
    Index num_interior() const noexcept { return num_interior_; }
    Index num_boundary() const noexcept { return num_vertices() - num_interior_; }
    bool is_interior(Index i) const noexcept { return i < num_interior_; }
    /// Largest triangle diameter.
    double h() const noexcept { return h_; }

    /// Signed area, positive for counterclockwise vertex order.
    double signed_area(const Triangle& t) const {
        const Point& a = vertex(t[0]);
        const Point& b = vertex(t[1]);
        const Point& c = vertex(t[2]);
        return 0.5 * ((b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2));
    }

    double diameter(const Triangle& t) const {
        double d = 0.0;
        for (int i = 0; i < 3; ++i) {
            const Point& a = vertex(t[static_cast<std::size_t>(i)]);
            const Point& b = vertex(t[static_cast<std::size_t>((i + 1) % 3)]);
            d = std::max(d, std::hypot(a.x1 - b.x1, a.x2 - b.x2));
        }
        return d;
    }

    double inradius(const Triangle& t) const {
        double perimeter = 0.0;
        for (int i = 0; i < 3; ++i) {
            const Point& a = vertex(t[static_cast<std::size_t>(i)]);
            const Point& b = vertex(t[static_cast<std::size_t>((i + 1) % 3)]);
            perimeter += std::hypot(a.x1 - b.x1, a.x2 - b.x2);
        }
        return 2.0 * std::abs(signed_area(t)) / perimeter;
    }

    double area() const {
        double s = 0.0;
        for (const auto& t : triangles_) {
            s += signed_area(t);
        }
        return s;
    }

    /// Vertex within tol of p, if any.
    std::optional<Index> locate_node(Point p, double tol = 1e-12) const {
        for (Index i = 0; i < num_vertices(); ++i) {
            const Point& v = vertex(i);
            if (std::abs(v.x1 - p.x1) <= tol && std::abs(v.x2 - p.x2) <= tol) {
                return i;
            }
        }
        return std::nullopt;
    }

    /// One vertex per line, "x y".
    void write_nodes(std::ostream& os) const {
        char buf[64];
        for (const auto& v : vertices_) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x1, v.x2);
            os << buf;
        }
    }

    /// One triangle per line, "i j k", 0-based.
    void write_elements(std::ostream& os) const {
        for (const auto& t : triangles_) {
            os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
        }
    }

private:
    Domain domain_;
    Index subdivisions_;
    std::vector<Point> vertices_;
    std::vector<Triangle> triangles_;
    Index num_interior_;
    double h_ = 0.0;
};

namespace detail {

inline bool cell_in_domain(Domain d, Index i, Index j, Index n) {
    if (d == Domain::UnitSquare) {
        return i >= 0 && i < n && j >= 0 && j < n;
    }
    return (i >= -n && i < 0 && j >= -n && j < n) || (i >= 0 && i < n && j >= 0 && j < n);
}

} // namespace detail

/// Uniform mesh with n cells per unit length. Each cell is split along the
/// diagonal from its lower-left to its upper-right corner, so h = sqrt(2)/n.
/// Vertices are sorted by (x2, x1) with the interior block first.
inline Mesh build_uniform_mesh(Domain domain, Index n) {
    if (n < 1) {
        throw ConfigError("build_uniform_mesh: need at least one subdivision per unit");
    }
    const Index lo = domain == Domain::UnitSquare ? 0 : -n;
    using Key = std::pair<Index, Index>;   // (j, i): row-major in x2 then x1
    std::vector<std::array<Key, 3>> cells;
    std::map<Key, Index> ids;
    for (Index j = lo; j < n; ++j) {
        for (Index i = lo; i < n; ++i) {
            if (!detail::cell_in_domain(domain, i, j, n)) {
                continue;
            }
            const Key ll{j, i}, lr{j, i + 1}, ur{j + 1, i + 1}, ul{j + 1, i};
            cells.push_back({ll, lr, ur});
            cells.push_back({ll, ur, ul});
            for (const auto& k : {ll, lr, ur, ul}) {
                ids.emplace(k, 0);
            }
        }
    }

    // Boundary vertices are those on an edge owned by a single triangle.
    std::map<std::pair<Key, Key>, int> edge_count;
    for (const auto& c : cells) {
        for (int e = 0; e < 3; ++e) {
            Key a = c[static_cast<std::size_t>(e)];
            Key b = c[static_cast<std::size_t>((e + 1) % 3)];
            if (b < a) {
                std::swap(a, b);
            }
            ++edge_count[{a, b}];
        }
    }
    std::map<Key, bool> boundary;
    for (const auto& [edge, count] : edge_count) {
        if (count == 1) {
            boundary[edge.first] = true;
            boundary[edge.second] = true;
        }
    }

    const double scale = 1.0 / static_cast<double>(n);
    std::vector<Point> vertices;
    vertices.reserve(ids.size());
    Index next = 0;
    for (int pass = 0; pass < 2; ++pass) {
        const bool want_boundary = pass == 1;
        for (auto& [key, id] : ids) {
            if (boundary.contains(key) == want_boundary) {
                id = next++;
                vertices.push_back({static_cast<double>(key.second) * scale, static_cast<double>(key.first) * scale});
            }
        }
    }
    const auto num_interior = static_cast<Index>(ids.size() - boundary.size());

    std::vector<Triangle> triangles;
    triangles.reserve(cells.size());
    for (const auto& c : cells) {
        triangles.push_back({ids.at(c[0]), ids.at(c[1]), ids.at(c[2])});
    }
    return Mesh(domain, n, std::move(vertices), std::move(triangles), num_interior);
}

} // namespace obsctl
