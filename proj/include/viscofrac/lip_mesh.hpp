#pragma once

#include "viscofrac/mesh.hpp"

#include <Eigen/Core>

#include <array>
#include <limits>
#include <span>
#include <vector>

namespace viscofrac::mesh {

/// A constraint cell of the lip-mesh: a triangle (arity 3) or, for 1D chains, a
/// segment (arity 2, unused third slot is -1 and the second gradient row is zero).
struct LipCell {
    std::array<int, 3> vertices{-1, -1, -1};
    int arity = 3;
    /// Maps the cell's vertex values to the constant gradient of their linear interpolant.
    Eigen::Matrix<double, 2, 3> grad_op = Eigen::Matrix<double, 2, 3>::Zero();
};

struct LipEdge {
    int to;
    double length;
};

/// Dual triangulation over base-element centroids, on which the discrete
/// Lipschitz constraints ||B_t d_t|| <= 1/l2 live. Vertex i is the centroid of
/// base triangle i.
struct LipMesh {
    std::vector<Vec2> vertices;
    std::vector<LipCell> cells;
    std::vector<std::vector<LipEdge>> adjacency;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_cells() const { return cells.size(); }
    /// Gradient of the interpolant of `field` (indexed by vertex) on cell c.
    Eigen::Vector2d cell_gradient(std::size_t c, std::span<const double> field) const;
};

/// Delaunay triangulation of the base-element centroids restricted to the domain:
/// candidate triangles are discarded when degenerate, when their centroid lies
/// outside the base mesh, or when one of their edges crosses the base boundary.
/// Throws ConstructionError for fewer than 3 elements or when nothing survives.
LipMesh build_lip_mesh(const BaseMesh& mesh);

/// Lip-mesh from explicit vertices and triangles (degenerate ones rejected).
LipMesh make_lip_mesh(std::vector<Vec2> vertices, const std::vector<std::array<int, 3>>& triangles);

/// 1D chain lip-mesh through points at abscissae xs (strictly increasing).
LipMesh make_lip_chain(std::span<const double> xs);

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Multi-source shortest-path distance (mm) over the lip-mesh edge graph.
/// Vertices not connected to any source get kUnreachable.
std::vector<double> shortest_path_distances(const LipMesh& lip, std::span<const int> sources);

/// Generalised multi-source Dijkstra: result(x) = min_y (offset(y) + dist(x, y)).
/// Entries of `offset` equal to kUnreachable are not sources.
std::vector<double> offset_distances(const LipMesh& lip, std::span<const double> offset);

}  // namespace viscofrac::mesh
