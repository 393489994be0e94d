#pragma once

#include "viscofrac/lip_mesh.hpp"
#include "viscofrac/mesh.hpp"

#include <filesystem>
#include <random>

namespace testsupport {

using viscofrac::mesh::BaseMesh;

/// Structured rectangle [x0, x0+W] x [y0, y0+H], nx by ny cells, each split
/// into two triangles with alternating diagonals. Node sets: left, right,
/// bottom, top.
BaseMesh rect_mesh(double x0, double y0, double W, double H, int nx, int ny);

/// Tensor-product mesh on the given (strictly increasing) coordinate lines,
/// same splitting and node sets as rect_mesh.
BaseMesh tensor_mesh(const std::vector<double>& xs, const std::vector<double>& ys);

/// Strip [-L, L] x [0, height] with uniform spacing h except for a narrow
/// centre column [-gap/2, gap/2] (gap = 0 puts a node line at x = 0).
BaseMesh centered_strip(double L, double h, double gap, double height, int ny = 1);

/// Single triangle (0,0), (1,0), (0,1) with node sets origin (node 0), xnode (node 1), ynode (node 2).
BaseMesh unit_triangle();

/// Annulus centred at the origin. Node sets: inner, outer.
BaseMesh annulus(double r_in, double r_out, int nr, int nt);

/// Double cantilever beam W x H with a slit from x = 0 to x = notch along y = H/2,
/// uniform cell size h. Node sets: load_top and load_bottom (nodes within a
/// square of half-width pad around (pad_x, H/2 +- arm_offset)), left.
struct DcbParams {
    double W = 30.0;
    double H = 16.0;
    double notch = 8.0;
    double h = 0.5;
    double pad_x = 3.0;
    double arm_offset = 4.0;
    double pad = 1.0;
};
BaseMesh notched_dcb(const DcbParams& p = {});

/// Moves interior nodes of a mesh randomly by up to `amp` times the local cell size
/// (keeping boundary nodes fixed). Works for rect_mesh output.
BaseMesh jitter(const BaseMesh& m, double amp, unsigned seed);

void write_msh(const BaseMesh& mesh, const std::filesystem::path& path);

}  // namespace testsupport
