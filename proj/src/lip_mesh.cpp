#include "viscofrac/lip_mesh.hpp"

#include "viscofrac/error.hpp"

#include <boost/polygon/voronoi.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <set>

namespace viscofrac::mesh {

namespace {

double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
}

bool segments_cross(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
    const double o1 = orient(p, q, a), o2 = orient(p, q, b);
    const double o3 = orient(a, b, p), o4 = orient(a, b, q);
    return ((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0));
}

bool cell_from_triangle(const std::vector<Vec2>& v, std::array<int, 3> t, LipCell& out) {
    const Vec2* a = &v[t[0]];
    const Vec2* b = &v[t[1]];
    const Vec2* c = &v[t[2]];
    double two_a = orient(*a, *b, *c);
    const double h2 = std::max({(*b - *a).squaredNorm(), (*c - *b).squaredNorm(), (*a - *c).squaredNorm()});
    if (h2 == 0.0 || std::abs(two_a) <= 1e-10 * h2) return false;
    if (two_a < 0) {
        std::swap(t[1], t[2]);
        std::swap(b, c);
        two_a = -two_a;
    }
    out.vertices = t;
    out.arity = 3;
    out.grad_op.col(0) << b->y() - c->y(), c->x() - b->x();
    out.grad_op.col(1) << c->y() - a->y(), a->x() - c->x();
    out.grad_op.col(2) << a->y() - b->y(), b->x() - a->x();
    out.grad_op /= two_a;
    return true;
}

void build_adjacency(LipMesh& lip) {
    std::set<std::pair<int, int>> edges;
    for (const auto& c : lip.cells) {
        for (int k = 0; k < c.arity; ++k) {
            const int a = c.vertices[k];
            const int b = c.vertices[(k + 1) % c.arity];
            if (a == b) continue;
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    }
    lip.adjacency.assign(lip.vertices.size(), {});
    for (const auto& [a, b] : edges) {
        const double len = (lip.vertices[a] - lip.vertices[b]).norm();
        if (!(len > 0)) throw ConstructionError("lip-mesh edge of zero length");
        lip.adjacency[a].push_back({b, len});
        lip.adjacency[b].push_back({a, len});
    }
}

// 2 * area / longest_edge^2; sqrt(3)/2 for an equilateral triangle.
double cell_quality(const LipMesh& lip, const LipCell& c) {
    const Vec2& a = lip.vertices[c.vertices[0]];
    const Vec2& b = lip.vertices[c.vertices[1]];
    const Vec2& d = lip.vertices[c.vertices[2]];
    const double h2 = std::max({(b - a).squaredNorm(), (d - b).squaredNorm(), (a - d).squaredNorm()});
    return std::abs(orient(a, b, d)) / h2;
}

// Delaunay triangulations of nearly collinear centroids along a boundary carry
// thin hull triangles whose gradient operator is orders of magnitude stiffer
// than the rest. Such triangles are peeled from the outside in, as long as each
// of their vertices keeps another cell.
void peel_hull_slivers(LipMesh& lip, double min_quality = 0.05) {
    for (bool changed = true; changed;) {
        changed = false;
        std::map<std::pair<int, int>, int> edge_use;
        std::vector<int> vertex_use(lip.vertices.size(), 0);
        for (const auto& c : lip.cells) {
            for (int k = 0; k < 3; ++k) {
                const int a = c.vertices[k], b = c.vertices[(k + 1) % 3];
                ++edge_use[{std::min(a, b), std::max(a, b)}];
                ++vertex_use[a];
            }
        }
        std::vector<LipCell> kept;
        kept.reserve(lip.cells.size());
        for (const auto& c : lip.cells) {
            bool on_hull = false, vertices_covered = true;
            for (int k = 0; k < 3; ++k) {
                const int a = c.vertices[k], b = c.vertices[(k + 1) % 3];
                on_hull |= edge_use[{std::min(a, b), std::max(a, b)}] == 1;
                vertices_covered &= vertex_use[a] > 1;
            }
            if (on_hull && vertices_covered && cell_quality(lip, c) < min_quality) {
                for (int k = 0; k < 3; ++k) --vertex_use[c.vertices[k]];
                changed = true;
                continue;
            }
            kept.push_back(c);
        }
        lip.cells = std::move(kept);
    }
}

// Delaunay triangles of `pts` through the dual of Boost.Polygon's Voronoi diagram.
// Coordinates are snapped to a 2^28 integer grid over the bounding box; a Voronoi
// vertex of degree k > 3 (cocircular input) is fan-triangulated.
std::vector<std::array<int, 3>> delaunay(const std::vector<Vec2>& pts) {
    using boost::polygon::point_data;
    Vec2 lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double ext = std::max((hi - lo).maxCoeff(), 1e-300);
    const double scale = static_cast<double>(1 << 28) / ext;
    std::vector<point_data<int>> ip;
    ip.reserve(pts.size());
    std::set<std::pair<int, int>> seen;
    for (const auto& p : pts) {
        const int x = static_cast<int>(std::lround((p.x() - lo.x()) * scale));
        const int y = static_cast<int>(std::lround((p.y() - lo.y()) * scale));
        if (!seen.insert({x, y}).second) throw ConstructionError("coincident base-element centroids");
        ip.emplace_back(x, y);
    }
    boost::polygon::voronoi_diagram<double> vd;
    boost::polygon::construct_voronoi(ip.begin(), ip.end(), &vd);

    std::vector<std::array<int, 3>> tris;
    std::vector<int> ring;
    for (const auto& v : vd.vertices()) {
        ring.clear();
        const auto* e = v.incident_edge();
        do {
            ring.push_back(static_cast<int>(e->cell()->source_index()));
            e = e->rot_next();
        } while (e != v.incident_edge());
        for (std::size_t k = 1; k + 1 < ring.size(); ++k) tris.push_back({ring[0], ring[k], ring[k + 1]});
    }
    return tris;
}

}  // namespace

Eigen::Vector2d LipMesh::cell_gradient(std::size_t c, std::span<const double> field) const {
    const auto& cell = cells[c];
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    for (int k = 0; k < cell.arity; ++k) v[k] = field[cell.vertices[k]];
    return cell.grad_op * v;
}

LipMesh build_lip_mesh(const BaseMesh& mesh) {
    if (mesh.num_elements() < 3) throw ConstructionError("lip-mesh needs at least 3 base elements");
    LipMesh lip;
    lip.vertices.reserve(mesh.num_elements());
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) lip.vertices.push_back(mesh.centroid(e));

    const PointLocator locator(mesh);
    const auto bnd = boundary_edges(mesh);

    // Bucket the boundary edges for the crossing test.
    Vec2 lo = mesh.nodes.front(), hi = lo;
    for (const auto& p : mesh.nodes) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec2 ext = (hi - lo).cwiseMax(1e-12);
    const double cell = std::max(ext.x(), ext.y()) / std::max(1.0, std::sqrt(static_cast<double>(bnd.size())));
    const int nx = std::max(1, static_cast<int>(std::ceil(ext.x() / cell)));
    const int ny = std::max(1, static_cast<int>(std::ceil(ext.y() / cell)));
    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(nx) * ny);
    auto cell_range = [&](const Vec2& a, const Vec2& b, auto&& fn) {
        const int i0 = std::clamp(static_cast<int>((std::min(a.x(), b.x()) - lo.x()) / cell), 0, nx - 1);
        const int i1 = std::clamp(static_cast<int>((std::max(a.x(), b.x()) - lo.x()) / cell), 0, nx - 1);
        const int j0 = std::clamp(static_cast<int>((std::min(a.y(), b.y()) - lo.y()) / cell), 0, ny - 1);
        const int j1 = std::clamp(static_cast<int>((std::max(a.y(), b.y()) - lo.y()) / cell), 0, ny - 1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) fn(buckets[static_cast<std::size_t>(j) * nx + i]);
    };
    for (std::size_t k = 0; k < bnd.size(); ++k) {
        cell_range(mesh.nodes[bnd[k][0]], mesh.nodes[bnd[k][1]],
                   [&](std::vector<int>& b) { b.push_back(static_cast<int>(k)); });
    }
    auto crosses_boundary = [&](const Vec2& p, const Vec2& q) {
        bool hit = false;
        cell_range(p, q, [&](const std::vector<int>& b) {
            for (int k : b) {
                if (hit) return;
                if (segments_cross(p, q, mesh.nodes[bnd[k][0]], mesh.nodes[bnd[k][1]])) hit = true;
            }
        });
        return hit;
    };

    std::set<std::pair<int, int>> edge_ok, edge_bad;
    auto edge_valid = [&](int a, int b) {
        const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
        if (edge_ok.count(key)) return true;
        if (edge_bad.count(key)) return false;
        const bool ok = !crosses_boundary(lip.vertices[a], lip.vertices[b]);
        (ok ? edge_ok : edge_bad).insert(key);
        return ok;
    };

    for (const auto& t : delaunay(lip.vertices)) {
        LipCell c;
        if (!cell_from_triangle(lip.vertices, t, c)) continue;
        const Vec2 g = (lip.vertices[t[0]] + lip.vertices[t[1]] + lip.vertices[t[2]]) / 3.0;
        if (!locator.inside(g)) continue;
        if (!edge_valid(t[0], t[1]) || !edge_valid(t[1], t[2]) || !edge_valid(t[2], t[0])) continue;
        lip.cells.push_back(c);
    }
    if (lip.cells.empty()) throw ConstructionError("lip-mesh construction discarded every candidate triangle");
    peel_hull_slivers(lip);
    build_adjacency(lip);
    return lip;
}

LipMesh make_lip_mesh(std::vector<Vec2> vertices, const std::vector<std::array<int, 3>>& triangles) {
    LipMesh lip;
    lip.vertices = std::move(vertices);
    const int nv = static_cast<int>(lip.vertices.size());
    for (const auto& t : triangles) {
        for (int v : t) {
            if (v < 0 || v >= nv) throw ConstructionError("lip triangle references invalid vertex");
        }
        LipCell c;
        if (cell_from_triangle(lip.vertices, t, c)) lip.cells.push_back(c);
    }
    if (lip.cells.empty()) throw ConstructionError("lip-mesh has no valid triangle");
    build_adjacency(lip);
    return lip;
}

LipMesh make_lip_chain(std::span<const double> xs) {
    if (xs.size() < 2) throw ConstructionError("lip chain needs at least 2 points");
    LipMesh lip;
    for (double x : xs) lip.vertices.emplace_back(x, 0.0);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double h = xs[i + 1] - xs[i];
        if (!(h > 0)) throw ConstructionError("lip chain abscissae must be strictly increasing");
        LipCell c;
        c.vertices = {static_cast<int>(i), static_cast<int>(i + 1), -1};
        c.arity = 2;
        c.grad_op(0, 0) = -1.0 / h;
        c.grad_op(0, 1) = 1.0 / h;
        lip.cells.push_back(c);
    }
    build_adjacency(lip);
    return lip;
}

std::vector<double> offset_distances(const LipMesh& lip, std::span<const double> offset) {
    const std::size_t n = lip.num_vertices();
    std::vector<double> dist(offset.begin(), offset.end());
    dist.resize(n, kUnreachable);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (std::size_t v = 0; v < n; ++v) {
        if (dist[v] != kUnreachable) heap.emplace(dist[v], static_cast<int>(v));
    }
    while (!heap.empty()) {
        const auto [dv, v] = heap.top();
        heap.pop();
        if (dv > dist[v]) continue;
        for (const auto& e : lip.adjacency[v]) {
            const double cand = dv + e.length;
            if (cand < dist[e.to]) {
                dist[e.to] = cand;
                heap.emplace(cand, e.to);
            }
        }
    }
    return dist;
}

std::vector<double> shortest_path_distances(const LipMesh& lip, std::span<const int> sources) {
    if (sources.empty()) throw DomainError("shortest_path_distances needs at least one source");
    std::vector<double> offset(lip.num_vertices(), kUnreachable);
    for (int s : sources) {
        if (s < 0 || static_cast<std::size_t>(s) >= lip.num_vertices())
            throw DomainError("source vertex out of range");
        offset[s] = 0.0;
    }
    return offset_distances(lip, offset);
}

}  // namespace viscofrac::mesh
