#pragma once

#include "viscofrac/material.hpp"
#include "viscofrac/mech.hpp"
#include "viscofrac/sim.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace viscofrac::io {

/// Parsed run configuration. Fracture pairs are kept in file units (J/m^2,
/// J/m^3, mm); material.fracture holds the internal-unit copy of both pairs.
struct RunConfig {
    std::filesystem::path mesh_path;
    material::GkvMaterial material;
    double Gc_J_m2 = 0.0;
    double l1_mm = 0.0;
    double Yc_J_m3 = 0.0;
    double l2_mm = 0.0;
    bool gc_correction = true;
    std::optional<double> h_elem;
    std::vector<std::string> pin_damage_sets;
    sim::Regularization regularization = sim::Regularization::PhaseField;
    std::vector<mech::DirichletBC> bcs;
    double dt = 0.0;
    double t_end = 0.0;
    std::filesystem::path output_dir = "output";
    int snapshot_every = 0;
    sim::SolverSettings solver;
    std::string reaction_set;
    int reaction_component = 1;
};

/// Reads an INI-style configuration. Relative mesh and output paths are resolved
/// against the directory of the file. Throws ParseError with a description on
/// missing or unknown keys and invalid values.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {});

/// Loads the mesh and assembles the simulation problem (applies the toughness
/// correction and damage pinning).
sim::Problem make_problem(const RunConfig& cfg);

}  // namespace viscofrac::io
