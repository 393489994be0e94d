#include "viscofrac/output.hpp"

#include "viscofrac/error.hpp"

#include <boost/algorithm/string.hpp>

#include <fmt/format.h>

#include <charconv>
#include <iostream>

namespace viscofrac::io {

namespace {

std::ofstream open_for_writing(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::string format_row(const HistoryRow& r) {
    return fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{}\n", r.step, r.time_s, r.u_imposed_mm,
                       r.reaction_N, r.fe_mJ, r.vd_cum_mJ, r.de_mJ, r.work_cum_mJ, r.stagger_iters);
}

template <class T>
T parse_field(const std::string& s, std::size_t line) {
    T x{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("bad CSV value '" + s + "'", line);
    return x;
}

}  // namespace

HistoryRow history_row(const sim::SimState& s) {
    return {s.step,      s.time,          s.u_imposed,        s.reaction,     s.ledger.fe,
            s.ledger.vd_cum, s.ledger.de, s.ledger.work_cum, s.stagger_iters};
}

HistoryWriter::HistoryWriter(const std::filesystem::path& path) : out_(open_for_writing(path)) {
    out_ << kHistoryHeader << '\n';
    out_.flush();
}

void HistoryWriter::append(const HistoryRow& row) {
    out_ << format_row(row);
    out_.flush();
}

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows) {
    HistoryWriter w(path);
    for (const auto& r : rows) w.append(r);
}

std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kHistoryHeader) throw ParseError("unexpected history header", 1);
    std::vector<HistoryRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        boost::algorithm::split(f, line, boost::algorithm::is_any_of(","));
        if (f.size() != 9) throw ParseError("expected 9 columns", lineno);
        HistoryRow r;
        r.step = parse_field<int>(f[0], lineno);
        r.time_s = parse_field<double>(f[1], lineno);
        r.u_imposed_mm = parse_field<double>(f[2], lineno);
        r.reaction_N = parse_field<double>(f[3], lineno);
        r.fe_mJ = parse_field<double>(f[4], lineno);
        r.vd_cum_mJ = parse_field<double>(f[5], lineno);
        r.de_mJ = parse_field<double>(f[6], lineno);
        r.work_cum_mJ = parse_field<double>(f[7], lineno);
        r.stagger_iters = parse_field<int>(f[8], lineno);
        rows.push_back(r);
    }
    return rows;
}

DiagnosticsWriter::DiagnosticsWriter(const std::filesystem::path& path) : out_(open_for_writing(path)) {
    out_ << "step,time_s,newton_iters,min_nodal_d,lf_repair_rounds\n";
}

void DiagnosticsWriter::append(const sim::SimState& s) {
    out_ << fmt::format("{},{:.9g},{},{:.9g},{}\n", s.step, s.time, s.newton_iters, s.min_nodal_damage, s.lf_repairs);
    out_.flush();
}

void write_vtk_snapshot(const std::filesystem::path& path, const mesh::BaseMesh& mesh, const sim::SimState& s) {
    auto out = open_for_writing(path);
    const std::size_t nn = mesh.num_nodes(), ne = mesh.num_elements();
    std::string buf;
    auto w = [&](std::string_view f, const auto&... args) {
        fmt::format_to(std::back_inserter(buf), fmt::runtime(f), args...);
    };
    w("# vtk DataFile Version 3.0\nviscofrac step {} t={:.9g}\nASCII\nDATASET UNSTRUCTURED_GRID\n", s.step, s.time);
    w("POINTS {} double\n", nn);
    for (const auto& p : mesh.nodes) w("{:.9g} {:.9g} 0\n", p.x(), p.y());
    w("CELLS {} {}\n", ne, 4 * ne);
    for (const auto& t : mesh.triangles) w("3 {} {} {}\n", t[0], t[1], t[2]);
    w("CELL_TYPES {}\n", ne);
    for (std::size_t e = 0; e < ne; ++e) w("5\n");
    w("POINT_DATA {}\nVECTORS u double\n", nn);
    for (std::size_t n = 0; n < nn; ++n) w("{:.9g} {:.9g} 0\n", s.mech.u[2 * n], s.mech.u[2 * n + 1]);
    if (s.d_nodal.size() == static_cast<Eigen::Index>(nn)) {
        w("SCALARS d_nodal double 1\nLOOKUP_TABLE default\n");
        for (std::size_t n = 0; n < nn; ++n) w("{:.9g}\n", s.d_nodal[n]);
    }
    w("CELL_DATA {}\n", ne);
    auto scalars = [&](const char* name, auto&& value) {
        w("SCALARS {} double 1\nLOOKUP_TABLE default\n", name);
        for (std::size_t e = 0; e < ne; ++e) w("{:.9g}\n", value(e));
    };
    scalars("d", [&](std::size_t e) { return s.d_elem.size() == ne ? s.d_elem[e] : 0.0; });
    scalars("psi_plus", [&](std::size_t e) { return s.psi_plus.size() == ne ? s.psi_plus[e] : 0.0; });
    scalars("sigma_yy", [&](std::size_t e) { return s.mech.sigma.size() == ne ? s.mech.sigma[e][1] : 0.0; });
    out << buf;
    if (!out) throw Error("failed writing " + path.string());
}

int run_to_directory(const RunConfig& cfg, const RunOutputs& outputs) {
    sim::apply_thread_limit();
    const sim::Simulator simulator(make_problem(cfg));
    std::filesystem::create_directories(outputs.output_dir);
    HistoryWriter history(outputs.output_dir / "history.csv");
    DiagnosticsWriter diagnostics(outputs.output_dir / "diagnostics.csv");
    const sim::TimeGrid grid{cfg.dt, cfg.t_end};
    const int total = grid.num_steps();
    int done = 0;
    sim::run(simulator, grid, [&](const sim::SimState& s) {
        history.append(history_row(s));
        diagnostics.append(s);
        if (outputs.snapshot_every > 0 && s.step % outputs.snapshot_every == 0)
            write_vtk_snapshot(outputs.output_dir / fmt::format("snapshot_{:05d}.vtk", s.step),
                               simulator.problem().mesh, s);
        done = s.step;
        if (!outputs.quiet)
            std::cerr << fmt::format("step {}/{} t={:.4g} s u={:.4g} mm R={:.5g} N stagger={}\n", s.step, total,
                                     s.time, s.u_imposed, s.reaction, s.stagger_iters);
        return true;
    });
    return done;
}

}  // namespace viscofrac::io
