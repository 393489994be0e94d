#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace viscofrac::mesh {

using Vec2 = Eigen::Vector2d;
/// Gradients of the three linear shape functions of a triangle, one per column (1/mm).
using ShapeGrads = Eigen::Matrix<double, 2, 3>;

/// Linear triangular mesh of the 2D domain. Coordinates in mm.
///
/// Triangles are stored counter-clockwise; node sets hold sorted, unique node indices.
/// Construct through make_mesh() or load_msh() so that the derived geometry
/// (areas, shape gradients) is always consistent with the connectivity.
struct BaseMesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::map<std::string, std::vector<int>> node_sets;
    std::vector<double> element_area;
    std::vector<ShapeGrads> shape_grads;

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_elements() const { return triangles.size(); }
    Vec2 centroid(std::size_t e) const;
    double total_area() const;

    /// Throws std::out_of_range with the set name when missing.
    const std::vector<int>& node_set(const std::string& name) const;
    bool has_node_set(const std::string& name) const { return node_sets.count(name) != 0; }
};

/// Builds a mesh from raw connectivity: reorients clockwise triangles, rejects
/// degenerate ones (ConstructionError), validates node sets, computes geometry.
BaseMesh make_mesh(std::vector<Vec2> nodes, std::vector<std::array<int, 3>> triangles,
                   std::map<std::string, std::vector<int>> node_sets = {});

/// Reads a gmsh ASCII 2.2 file. Only 3-node triangles are accepted as 2D elements;
/// lines (type 1) and points (type 15) only populate node sets named after their
/// physical group. Nodes not referenced by any triangle are dropped.
BaseMesh load_msh(const std::filesystem::path& path);
BaseMesh parse_msh(std::istream& in);

/// Point-location helper over a BaseMesh using a uniform bucket grid.
class PointLocator {
public:
    explicit PointLocator(const BaseMesh& mesh);
    /// Index of a triangle containing p (boundary inclusive, relative tolerance), or -1.
    int locate(const Vec2& p) const;
    bool inside(const Vec2& p) const { return locate(p) >= 0; }

private:
    const BaseMesh* mesh_;
    Vec2 origin_;
    double cell_ = 1.0;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> buckets_;
};

/// Edges belonging to exactly one triangle, as node index pairs.
std::vector<std::array<int, 2>> boundary_edges(const BaseMesh& mesh);

}  // namespace viscofrac::mesh
