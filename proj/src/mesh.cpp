#include "viscofrac/mesh.hpp"

#include "viscofrac/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace viscofrac::mesh {

namespace {

double signed_double_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
}

double max_edge_sq(const Vec2& a, const Vec2& b, const Vec2& c) {
    return std::max({(b - a).squaredNorm(), (c - b).squaredNorm(), (a - c).squaredNorm()});
}

// Area below this fraction of the squared longest edge counts as degenerate.
constexpr double kDegenerateRatio = 1e-12;

bool degenerate(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double h2 = max_edge_sq(a, b, c);
    return h2 == 0.0 || std::abs(signed_double_area(a, b, c)) <= kDegenerateRatio * h2;
}

}  // namespace

Vec2 BaseMesh::centroid(std::size_t e) const {
    const auto& t = triangles[e];
    return (nodes[t[0]] + nodes[t[1]] + nodes[t[2]]) / 3.0;
}

double BaseMesh::total_area() const {
    double a = 0.0;
    for (double x : element_area) a += x;
    return a;
}

const std::vector<int>& BaseMesh::node_set(const std::string& name) const {
    auto it = node_sets.find(name);
    if (it == node_sets.end()) throw std::out_of_range("unknown node set '" + name + "'");
    return it->second;
}

BaseMesh make_mesh(std::vector<Vec2> nodes, std::vector<std::array<int, 3>> triangles,
                   std::map<std::string, std::vector<int>> node_sets) {
    BaseMesh m;
    m.nodes = std::move(nodes);
    m.triangles = std::move(triangles);
    const int nn = static_cast<int>(m.nodes.size());

    m.element_area.reserve(m.triangles.size());
    m.shape_grads.reserve(m.triangles.size());
    for (std::size_t e = 0; e < m.triangles.size(); ++e) {
        auto& t = m.triangles[e];
        for (int v : t) {
            if (v < 0 || v >= nn)
                throw ConstructionError("triangle " + std::to_string(e) + " references invalid node " +
                                        std::to_string(v));
        }
        const Vec2 *a = &m.nodes[t[0]], *b = &m.nodes[t[1]], *c = &m.nodes[t[2]];
        if (degenerate(*a, *b, *c))
            throw ConstructionError("degenerate triangle " + std::to_string(e));
        double two_a = signed_double_area(*a, *b, *c);
        if (two_a < 0) {
            std::swap(t[1], t[2]);
            std::swap(b, c);
            two_a = -two_a;
        }
        m.element_area.push_back(0.5 * two_a);
        ShapeGrads g;
        g.col(0) << b->y() - c->y(), c->x() - b->x();
        g.col(1) << c->y() - a->y(), a->x() - c->x();
        g.col(2) << a->y() - b->y(), b->x() - a->x();
        m.shape_grads.push_back(g / two_a);
    }

    for (auto& [name, ids] : node_sets) {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        for (int v : ids) {
            if (v < 0 || v >= nn)
                throw ConstructionError("node set '" + name + "' references invalid node " + std::to_string(v));
        }
    }
    m.node_sets = std::move(node_sets);
    return m;
}

// ---------------------------------------------------------------------------
// MSH 2.2 ASCII

namespace {

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++lineno_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") != std::string::npos) return true;
        }
        return false;
    }

    std::string expect(std::string_view what) {
        std::string line;
        if (!next(line)) throw ParseError("unexpected end of file, expected " + std::string(what), lineno_);
        return line;
    }

    std::size_t line() const { return lineno_; }

private:
    std::istream& in_;
    std::size_t lineno_ = 0;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

long parse_count(const std::string& line, std::size_t lineno) {
    std::istringstream ss(line);
    long n = -1;
    if (!(ss >> n) || n < 0) throw ParseError("invalid count '" + trim(line) + "'", lineno);
    return n;
}

struct RawElement {
    int type;
    int physical;
    std::vector<long> nodes;
    std::size_t line;
};

}  // namespace

BaseMesh parse_msh(std::istream& in) {
    LineReader rd(in);
    std::string line;
    bool have_format = false;
    std::map<std::pair<int, int>, std::string> physical_names;
    std::unordered_map<long, int> node_index;
    std::vector<Vec2> raw_nodes;
    std::vector<RawElement> elements;

    while (rd.next(line)) {
        const std::string section = trim(line);
        if (section == "$MeshFormat") {
            std::istringstream ss(rd.expect("format line"));
            std::string version;
            int file_type = -1, data_size = 0;
            ss >> version >> file_type >> data_size;
            if (version != "2.2") throw ParseError("unsupported MSH version '" + version + "'", rd.line());
            if (file_type != 0) throw ParseError("binary MSH files are not supported", rd.line());
            if (trim(rd.expect("$EndMeshFormat")) != "$EndMeshFormat")
                throw ParseError("expected $EndMeshFormat", rd.line());
            have_format = true;
        } else if (section == "$PhysicalNames") {
            const long n = parse_count(rd.expect("physical name count"), rd.line());
            for (long i = 0; i < n; ++i) {
                const std::string l = rd.expect("physical name");
                std::istringstream ss(l);
                int dim = 0, tag = 0;
                if (!(ss >> dim >> tag)) throw ParseError("invalid physical name entry", rd.line());
                std::string rest;
                std::getline(ss, rest);
                rest = trim(rest);
                if (rest.size() >= 2 && rest.front() == '"' && rest.back() == '"')
                    rest = rest.substr(1, rest.size() - 2);
                physical_names[{dim, tag}] = rest;
            }
            if (trim(rd.expect("$EndPhysicalNames")) != "$EndPhysicalNames")
                throw ParseError("expected $EndPhysicalNames", rd.line());
        } else if (section == "$Nodes") {
            if (!have_format) throw ParseError("$Nodes before $MeshFormat", rd.line());
            const long n = parse_count(rd.expect("node count"), rd.line());
            raw_nodes.reserve(n);
            for (long i = 0; i < n; ++i) {
                std::istringstream ss(rd.expect("node"));
                long id = 0;
                double x = 0, y = 0, z = 0;
                if (!(ss >> id >> x >> y >> z)) throw ParseError("invalid node entry", rd.line());
                if (!node_index.emplace(id, static_cast<int>(raw_nodes.size())).second)
                    throw ParseError("duplicate node id " + std::to_string(id), rd.line());
                raw_nodes.emplace_back(x, y);
            }
            if (trim(rd.expect("$EndNodes")) != "$EndNodes") throw ParseError("expected $EndNodes", rd.line());
        } else if (section == "$Elements") {
            if (!have_format) throw ParseError("$Elements before $MeshFormat", rd.line());
            const long n = parse_count(rd.expect("element count"), rd.line());
            elements.reserve(n);
            for (long i = 0; i < n; ++i) {
                std::istringstream ss(rd.expect("element"));
                long id = 0;
                int type = 0, ntags = 0;
                if (!(ss >> id >> type >> ntags) || ntags < 0)
                    throw ParseError("invalid element entry", rd.line());
                std::vector<long> tags(ntags);
                for (auto& t : tags) {
                    if (!(ss >> t)) throw ParseError("invalid element tags", rd.line());
                }
                int nv = 0;
                switch (type) {
                    case 15: nv = 1; break;
                    case 1: nv = 2; break;
                    case 2: nv = 3; break;
                    default:
                        throw ParseError("unsupported element type " + std::to_string(type), rd.line());
                }
                RawElement el{type, ntags > 0 ? static_cast<int>(tags[0]) : 0, std::vector<long>(nv), rd.line()};
                for (auto& v : el.nodes) {
                    if (!(ss >> v)) throw ParseError("invalid element node list", rd.line());
                }
                elements.push_back(std::move(el));
            }
            if (trim(rd.expect("$EndElements")) != "$EndElements")
                throw ParseError("expected $EndElements", rd.line());
        } else if (!section.empty() && section[0] == '$') {
            // Unknown section: skip to its end marker.
            const std::string end = "$End" + section.substr(1);
            std::string l;
            while (true) {
                if (!rd.next(l)) throw ParseError("unterminated section " + section, rd.line());
                if (trim(l) == end) break;
            }
        } else {
            throw ParseError("unexpected content '" + section + "'", rd.line());
        }
    }
    if (!have_format) throw ParseError("missing $MeshFormat section");

    auto lookup = [&](long id, std::size_t l) {
        auto it = node_index.find(id);
        if (it == node_index.end()) throw ParseError("unknown node id " + std::to_string(id), l);
        return it->second;
    };

    // Compact to the nodes used by triangles, keeping file order.
    std::vector<std::array<int, 3>> tris;
    for (const auto& el : elements) {
        if (el.type != 2) continue;
        std::array<int, 3> t{};
        for (int k = 0; k < 3; ++k) t[k] = lookup(el.nodes[k], el.line);
        if (degenerate(raw_nodes[t[0]], raw_nodes[t[1]], raw_nodes[t[2]]))
            throw ParseError("degenerate (zero-area) triangle", el.line);
        tris.push_back(t);
    }
    std::vector<int> remap(raw_nodes.size(), -1);
    for (const auto& t : tris) {
        for (int v : t) remap[v] = 0;
    }
    std::vector<Vec2> nodes;
    for (std::size_t i = 0; i < raw_nodes.size(); ++i) {
        if (remap[i] < 0) continue;
        remap[i] = static_cast<int>(nodes.size());
        nodes.push_back(raw_nodes[i]);
    }
    for (auto& t : tris) {
        for (auto& v : t) v = remap[v];
    }
    if (tris.empty()) throw ParseError("mesh contains no triangles");

    std::map<std::string, std::vector<int>> sets;
    for (const auto& el : elements) {
        if (el.physical == 0) continue;
        const int dim = el.type == 15 ? 0 : (el.type == 1 ? 1 : 2);
        auto it = physical_names.find({dim, el.physical});
        const std::string name = it != physical_names.end() ? it->second : std::to_string(el.physical);
        auto& ids = sets[name];
        for (long id : el.nodes) {
            const int v = remap[lookup(id, el.line)];
            if (v >= 0) ids.push_back(v);
        }
    }
    return make_mesh(std::move(nodes), std::move(tris), std::move(sets));
}

BaseMesh load_msh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open mesh file '" + path.string() + "'");
    return parse_msh(in);
}

// ---------------------------------------------------------------------------

PointLocator::PointLocator(const BaseMesh& mesh) : mesh_(&mesh) {
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::max());
    Vec2 hi = -lo;
    for (const auto& p : mesh.nodes) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec2 ext = (hi - lo).cwiseMax(1e-12);
    const double n = std::max<double>(1.0, static_cast<double>(mesh.num_elements()));
    cell_ = std::sqrt(ext.x() * ext.y() / n) * 2.0;
    if (!(cell_ > 0)) cell_ = std::max(ext.x(), ext.y());
    origin_ = lo;
    nx_ = std::max(1, static_cast<int>(std::ceil(ext.x() / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil(ext.y() / cell_)));
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& t = mesh.triangles[e];
        Vec2 a = mesh.nodes[t[0]], b = a;
        for (int k = 1; k < 3; ++k) {
            a = a.cwiseMin(mesh.nodes[t[k]]);
            b = b.cwiseMax(mesh.nodes[t[k]]);
        }
        const int i0 = std::clamp(static_cast<int>((a.x() - lo.x()) / cell_), 0, nx_ - 1);
        const int i1 = std::clamp(static_cast<int>((b.x() - lo.x()) / cell_), 0, nx_ - 1);
        const int j0 = std::clamp(static_cast<int>((a.y() - lo.y()) / cell_), 0, ny_ - 1);
        const int j1 = std::clamp(static_cast<int>((b.y() - lo.y()) / cell_), 0, ny_ - 1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(static_cast<int>(e));
    }
}

int PointLocator::locate(const Vec2& p) const {
    const int i = static_cast<int>(std::floor((p.x() - origin_.x()) / cell_));
    const int j = static_cast<int>(std::floor((p.y() - origin_.y()) / cell_));
    if (i < -1 || j < -1 || i > nx_ || j > ny_) return -1;
    const int ic = std::clamp(i, 0, nx_ - 1), jc = std::clamp(j, 0, ny_ - 1);
    for (int e : buckets_[static_cast<std::size_t>(jc) * nx_ + ic]) {
        const auto& t = mesh_->triangles[e];
        const Vec2& a = mesh_->nodes[t[0]];
        const Vec2& b = mesh_->nodes[t[1]];
        const Vec2& c = mesh_->nodes[t[2]];
        const double two_a = signed_double_area(a, b, c);
        const double tol = -1e-12 * two_a;
        if (signed_double_area(a, b, p) >= tol && signed_double_area(b, c, p) >= tol &&
            signed_double_area(c, a, p) >= tol)
            return e;
    }
    return -1;
}

std::vector<std::array<int, 2>> boundary_edges(const BaseMesh& mesh) {
    std::map<std::pair<int, int>, int> count;
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            ++count[{a, b}];
        }
    }
    std::vector<std::array<int, 2>> out;
    for (const auto& [e, c] : count) {
        if (c == 1) out.push_back({e.first, e.second});
    }
    return out;
}

}  // namespace viscofrac::mesh
