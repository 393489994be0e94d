#include "viscofrac/config.hpp"
#include "viscofrac/damage_lf.hpp"
#include "viscofrac/error.hpp"
#include "viscofrac/lip_mesh.hpp"
#include "viscofrac/material.hpp"
#include "viscofrac/mesh.hpp"
#include "viscofrac/output.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

namespace {

using namespace viscofrac;

int cmd_run(const std::string& config_path, const std::string& output_dir, int snapshot_every, bool quiet) {
    const auto cfg = io::parse_config(config_path);
    io::RunOutputs out;
    out.output_dir = output_dir.empty() ? cfg.output_dir : std::filesystem::path(output_dir);
    out.snapshot_every = snapshot_every >= 0 ? snapshot_every : cfg.snapshot_every;
    out.quiet = quiet;
    const int steps = io::run_to_directory(cfg, out);
    if (!quiet) std::cerr << fmt::format("done: {} steps written to {}\n", steps, out.output_dir.string());
    return 0;
}

int cmd_calibrate(double Gc, double l1) {
    const auto lp = material::calibrate(Gc, l1);
    std::cout << fmt::format("Yc={:.5g} J/m3 l2={:.5g} mm\n", lp.Yc_J_m3, lp.l2_mm);
    return 0;
}

// Reads "element,d" rows (header optional) into a per-element field.
std::vector<double> read_field(const std::string& path, std::size_t n) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open field file " + path);
    std::vector<double> d(n, 0.0);
    std::vector<char> seen(n, 0);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) throw ParseError("expected element,d", lineno);
        std::size_t e = 0;
        double v = 0.0;
        try {
            e = std::stoul(a);
            v = std::stod(b);
        } catch (const std::exception&) {
            if (lineno == 1) continue;  // header
            throw ParseError("bad field row", lineno);
        }
        if (e >= n) throw ParseError("element index out of range", lineno);
        if (!(v >= 0.0 && v <= 1.0)) throw ParseError("target damage must lie in [0, 1]", lineno);
        d[e] = v;
        seen[e] = 1;
    }
    for (std::size_t e = 0; e < n; ++e) {
        if (!seen[e]) throw ParseError(fmt::format("field file has no value for element {}", e));
    }
    return d;
}

int cmd_project(const std::string& mesh_path, const std::string& field_path, double l2, const std::string& out_path) {
    const auto m = mesh::load_msh(mesh_path);
    const auto lip = mesh::build_lip_mesh(m);
    const auto target = read_field(field_path, m.num_elements());
    const auto bounds = damage_lf::compute_bounds(lip, target, l2);
    const auto d = damage_lf::lipschitz_project(lip, target, l2, m.element_area);

    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::binary | std::ios::trunc);
        if (!file) throw Error("cannot write " + out_path);
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    out << "element,x_mm,y_mm,d_target,lower,upper,d_projected\n";
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        const auto c = m.centroid(e);
        out << fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", e, c.x(), c.y(), target[e],
                           bounds.lower[e], bounds.upper[e], d[e]);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Viscoelastic fracture simulator (phase-field and lip-field damage)"};
    app.require_subcommand(1);

    std::string config_path, output_dir;
    int snapshot_every = -1;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "run a simulation from a configuration file");
    run->add_option("config", config_path, "configuration file")->required();
    run->add_option("--output-dir", output_dir, "output directory (overrides [output] dir)");
    run->add_option("--snapshot-every", snapshot_every, "write a VTK snapshot every N steps (0 = never)");
    run->add_flag("--quiet", quiet, "no progress output");

    double Gc = 0.0, l1 = 0.0;
    auto* cal = app.add_subcommand("calibrate", "lip-field parameters equivalent to a phase-field pair");
    cal->add_option("Gc", Gc, "toughness in J/m2")->required();
    cal->add_option("l1", l1, "phase-field length in mm")->required();

    std::string mesh_path, field_path, out_path;
    double l2 = 0.0;
    auto* proj = app.add_subcommand("project", "Lipschitz projection of an element field");
    proj->add_option("--mesh", mesh_path, "gmsh 2.2 mesh")->required();
    proj->add_option("--field", field_path, "CSV with element,d rows")->required();
    proj->add_option("--l2", l2, "Lipschitz length in mm (slope cap 1/l2)")->required();
    proj->add_option("--out", out_path, "output CSV (default: standard output)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config_path, output_dir, snapshot_every, quiet);
        if (*cal) return cmd_calibrate(Gc, l1);
        if (*proj) return cmd_project(mesh_path, field_path, l2, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
