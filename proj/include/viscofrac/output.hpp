#pragma once

#include "viscofrac/config.hpp"
#include "viscofrac/mesh.hpp"
#include "viscofrac/sim.hpp"

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace viscofrac::io {

inline constexpr const char* kHistoryHeader =
    "step,time_s,u_imposed_mm,reaction_N,fe_mJ,vd_cum_mJ,de_mJ,work_cum_mJ,stagger_iters";

struct HistoryRow {
    int step = 0;
    double time_s = 0.0;
    double u_imposed_mm = 0.0;
    double reaction_N = 0.0;
    double fe_mJ = 0.0;
    double vd_cum_mJ = 0.0;
    double de_mJ = 0.0;
    double work_cum_mJ = 0.0;
    int stagger_iters = 0;
};

HistoryRow history_row(const sim::SimState& s);

/// Streams the force/energy history, one row per accepted step.
class HistoryWriter {
public:
    explicit HistoryWriter(const std::filesystem::path& path);
    void append(const HistoryRow& row);

private:
    std::ofstream out_;
};

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows);
std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path);

/// Per-step solver diagnostics (Newton iterations, phase-field undershoot,
/// lip-field repair rounds).
class DiagnosticsWriter {
public:
    explicit DiagnosticsWriter(const std::filesystem::path& path);
    void append(const sim::SimState& s);

private:
    std::ofstream out_;
};

/// Legacy ASCII VTK snapshot: u at points, d / psi_plus / sigma_yy per cell, and
/// the nodal phase-field damage as d_nodal when present.
void write_vtk_snapshot(const std::filesystem::path& path, const mesh::BaseMesh& mesh, const sim::SimState& s);

struct RunOutputs {
    std::filesystem::path output_dir;
    int snapshot_every = 0;
    bool quiet = true;
};

/// Runs a configuration and writes history.csv, diagnostics.csv and snapshots
/// (snapshot_NNNNN.vtk every `snapshot_every` steps) into the output directory.
/// Returns the number of completed steps.
int run_to_directory(const RunConfig& cfg, const RunOutputs& outputs);

}  // namespace viscofrac::io
