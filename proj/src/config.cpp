#include "viscofrac/config.hpp"

#include "viscofrac/error.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace viscofrac::io {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kSectionKeys = {
    {"mesh", {"path"}},
    {"material", {"E", "tau", "nu", "beta"}},
    {"fracture", {"Gc", "l1", "Yc", "l2", "gc_correction", "h_elem", "pin_damage"}},
    {"model", {"regularization"}},
    {"time", {"dt", "t_end"}},
    {"output", {"dir", "snapshot_every"}},
    {"solver", {"stag_tol", "max_stag", "newton_tol", "newton_max_iter", "lf_active_tol", "dt_halving"}},
    {"reaction", {"set", "component"}},
};
const std::set<std::string> kBcKeys = {"set", "component", "rate", "value"};

std::string strip_comment(std::string v) {
    const auto pos = v.find_first_of(";#");
    if (pos != std::string::npos) v.erase(pos);
    boost::algorithm::trim(v);
    return v;
}

class Section {
public:
    Section(std::string name, const pt::ptree& tree) : name_(std::move(name)), tree_(&tree) {}

    std::optional<std::string> raw(const std::string& key) const {
        for (const auto& [k, v] : *tree_) {
            if (k == key) return strip_comment(v.data());
        }
        return std::nullopt;
    }
    std::string text(const std::string& key) const {
        auto v = raw(key);
        if (!v || v->empty()) throw ParseError("missing key '" + key + "' in [" + name_ + "]");
        return *v;
    }
    double number(const std::string& key) const { return to_number(text(key), key); }
    std::optional<double> opt_number(const std::string& key) const {
        auto v = raw(key);
        if (!v) return std::nullopt;
        return to_number(*v, key);
    }
    int integer(const std::string& key, int fallback) const {
        auto v = raw(key);
        if (!v) return fallback;
        const double x = to_number(*v, key);
        if (x != static_cast<int>(x)) throw ParseError(where(key) + " must be an integer");
        return static_cast<int>(x);
    }
    bool flag(const std::string& key, bool fallback) const {
        auto v = raw(key);
        if (!v) return fallback;
        std::string s = boost::algorithm::to_lower_copy(*v);
        if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
        if (s == "false" || s == "no" || s == "off" || s == "0") return false;
        throw ParseError(where(key) + " must be true or false");
    }
    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : list(key)) out.push_back(to_number(item, key));
        return out;
    }
    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> items;
        auto v = raw(key);
        if (!v || v->empty()) return items;
        boost::algorithm::split(items, *v, boost::algorithm::is_any_of(","));
        for (auto& s : items) boost::algorithm::trim(s);
        return items;
    }
    const std::string& name() const { return name_; }

private:
    std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }
    double to_number(const std::string& s, const std::string& key) const {
        double x = 0.0;
        const auto* end = s.data() + s.size();
        const auto [ptr, ec] = std::from_chars(s.data(), end, x);
        if (ec != std::errc() || ptr != end) throw ParseError(where(key) + ": '" + s + "' is not a number");
        return x;
    }

    std::string name_;
    const pt::ptree* tree_;
};

int parse_component(const std::string& s, const std::string& where) {
    const std::string c = boost::algorithm::to_lower_copy(s);
    if (c == "x" || c == "0") return 0;
    if (c == "y" || c == "1") return 1;
    throw ParseError(where + ": component must be x or y");
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(e.message(), e.line());
    }

    std::map<std::string, Section> sections;
    std::vector<Section> bc_sections;
    for (const auto& [name, child] : tree) {
        if (child.empty() && !child.data().empty())
            throw ParseError("key '" + name + "' outside of any section");
        const bool is_bc = boost::algorithm::starts_with(name, "bc:");
        const std::set<std::string>* allowed = nullptr;
        if (is_bc) {
            allowed = &kBcKeys;
        } else if (auto it = kSectionKeys.find(name); it != kSectionKeys.end()) {
            allowed = &it->second;
        } else {
            throw ParseError("unknown section [" + name + "]");
        }
        for (const auto& [key, _] : child) {
            if (!allowed->count(key)) throw ParseError("unknown key '" + key + "' in [" + name + "]");
        }
        if (is_bc)
            bc_sections.emplace_back(name, child);
        else
            sections.emplace(name, Section(name, child));
    }
    auto section = [&](const std::string& name) -> const Section& {
        auto it = sections.find(name);
        if (it == sections.end()) throw ParseError("missing section [" + name + "]");
        return it->second;
    };
    static const pt::ptree kEmpty;
    auto optional_section = [&](const std::string& name) {
        auto it = sections.find(name);
        return it == sections.end() ? Section(name, kEmpty) : it->second;
    };

    RunConfig cfg;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    cfg.mesh_path = resolve(section("mesh").text("path"));

    const Section& mat = section("material");
    cfg.material.E = mat.numbers("E");
    cfg.material.tau = mat.numbers("tau");
    cfg.material.nu = mat.number("nu");
    cfg.material.beta = mat.integer("beta", 1);
    if (cfg.material.E.empty()) throw ParseError("missing key 'E' in [material]");
    if (cfg.material.tau.size() + 1 != cfg.material.E.size())
        throw ParseError("[material] needs one retardation time per KV unit: len(tau) = " +
                         std::to_string(cfg.material.tau.size()) + " but len(E) - 1 = " +
                         std::to_string(cfg.material.E.size() - 1));
    if (cfg.material.beta != 0 && cfg.material.beta != 1) throw ParseError("[material] beta must be 0 or 1");
    try {
        cfg.material.validate();
    } catch (const DomainError& e) {
        throw ParseError(std::string("[material] ") + e.what());
    }

    const Section& fr = section("fracture");
    const auto Gc = fr.opt_number("Gc"), l1 = fr.opt_number("l1"), Yc = fr.opt_number("Yc"), l2 = fr.opt_number("l2");
    const bool pf_pair = Gc || l1, lf_pair = Yc || l2;
    if (pf_pair && lf_pair) throw ParseError("[fracture] give either (Gc, l1) or (Yc, l2), not both");
    if (!pf_pair && !lf_pair) throw ParseError("[fracture] needs (Gc, l1) or (Yc, l2)");
    try {
        if (pf_pair) {
            if (!Gc || !l1) throw ParseError("[fracture] needs both Gc and l1");
            const auto lp = material::calibrate(*Gc, *l1);
            cfg.Gc_J_m2 = *Gc;
            cfg.l1_mm = *l1;
            cfg.Yc_J_m3 = lp.Yc_J_m3;
            cfg.l2_mm = lp.l2_mm;
        } else {
            if (!Yc || !l2) throw ParseError("[fracture] needs both Yc and l2");
            const auto pp = material::calibrate_inverse(*Yc, *l2);
            cfg.Yc_J_m3 = *Yc;
            cfg.l2_mm = *l2;
            cfg.Gc_J_m2 = pp.Gc_J_m2;
            cfg.l1_mm = pp.l1_mm;
        }
    } catch (const DomainError& e) {
        throw ParseError(std::string("[fracture] ") + e.what());
    }
    cfg.material.fracture = {cfg.Gc_J_m2 * 1e-3, cfg.l1_mm, cfg.Yc_J_m3 * 1e-6, cfg.l2_mm};
    cfg.gc_correction = fr.flag("gc_correction", true);
    cfg.h_elem = fr.opt_number("h_elem");
    if (cfg.h_elem && !(*cfg.h_elem > 0)) throw ParseError("[fracture] h_elem must be positive");
    cfg.pin_damage_sets = fr.list("pin_damage");

    const std::string reg = boost::algorithm::to_lower_copy(section("model").text("regularization"));
    if (reg == "pf")
        cfg.regularization = sim::Regularization::PhaseField;
    else if (reg == "lf")
        cfg.regularization = sim::Regularization::LipField;
    else
        throw ParseError("[model] regularization must be pf or lf");

    for (const auto& bs : bc_sections) {
        mech::DirichletBC bc;
        bc.node_set = bs.text("set");
        bc.component = parse_component(bs.text("component"), "[" + bs.name() + "]");
        bc.rate = bs.opt_number("rate").value_or(0.0);
        bc.value = bs.opt_number("value").value_or(0.0);
        cfg.bcs.push_back(bc);
    }

    const Section& time = section("time");
    cfg.dt = time.number("dt");
    cfg.t_end = time.number("t_end");
    if (!(cfg.dt > 0)) throw ParseError("[time] dt must be positive");
    if (!(cfg.t_end >= 0)) throw ParseError("[time] t_end must be non-negative");

    const Section out = optional_section("output");
    if (auto d = out.raw("dir"); d && !d->empty()) cfg.output_dir = resolve(*d);
    cfg.snapshot_every = out.integer("snapshot_every", 0);
    if (cfg.snapshot_every < 0) throw ParseError("[output] snapshot_every must be non-negative");

    const Section sol = optional_section("solver");
    cfg.solver.stag_tol = sol.opt_number("stag_tol").value_or(cfg.solver.stag_tol);
    cfg.solver.max_stag = sol.integer("max_stag", cfg.solver.max_stag);
    cfg.solver.newton.rel_tol = sol.opt_number("newton_tol").value_or(cfg.solver.newton.rel_tol);
    cfg.solver.newton.max_iter = sol.integer("newton_max_iter", cfg.solver.newton.max_iter);
    cfg.solver.lf_active_tol = sol.opt_number("lf_active_tol").value_or(cfg.solver.lf_active_tol);
    cfg.solver.dt_halving = sol.flag("dt_halving", false);
    if (!(cfg.solver.stag_tol > 0) || cfg.solver.max_stag < 1 || cfg.solver.newton.max_iter < 1)
        throw ParseError("[solver] tolerances and iteration caps must be positive");

    const Section rs = optional_section("reaction");
    if (auto s = rs.raw("set")) cfg.reaction_set = *s;
    if (auto c = rs.raw("component")) cfg.reaction_component = parse_component(*c, "[reaction]");
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open configuration file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.parent_path());
}

sim::Problem make_problem(const RunConfig& cfg) {
    sim::Problem p;
    p.mesh = mesh::load_msh(cfg.mesh_path);
    p.material = cfg.material;
    p.regularization = cfg.regularization;
    p.bcs = cfg.bcs;
    p.solver = cfg.solver;
    p.reaction_set = cfg.reaction_set;
    p.reaction_component = cfg.reaction_component;
    const double Gc = cfg.material.fracture.Gc;
    if (cfg.gc_correction) {
        const double h = cfg.h_elem.value_or(sim::default_element_size(p.mesh));
        p.Gc_eff = material::effective_gc(Gc, h, cfg.l1_mm);
    } else {
        p.Gc_eff = Gc;
    }
    std::set<int> pinned;
    for (const auto& name : cfg.pin_damage_sets) {
        if (!p.mesh.has_node_set(name)) throw ParseError("[fracture] pin_damage: unknown node set '" + name + "'");
        for (int n : p.mesh.node_set(name)) pinned.insert(n);
    }
    p.pinned_nodes.assign(pinned.begin(), pinned.end());
    return p;
}

}  // namespace viscofrac::io
