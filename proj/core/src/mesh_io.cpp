#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "emshape/mesh.hpp"

namespace emshape {

namespace {

class LineReader {
public:
    explicit LineReader(std::istream& in, std::string label)
        : in_(in), label_(std::move(label)) {}

    /// Next non-empty line with comments stripped, split into tokens.
    bool next(std::vector<std::string>& tokens) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
            tokens.clear();
            std::istringstream ss(line);
            std::string tok;
            while (ss >> tok) tokens.push_back(tok);
            if (!tokens.empty()) return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw MeshError(label_ + ":" + std::to_string(line_no_) + ": " + what);
    }

private:
    std::istream& in_;
    std::string label_;
    int line_no_ = 0;
};

long parse_int(const std::string& tok, LineReader& r) {
    size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(tok, &pos);
    } catch (const std::exception&) {
        r.fail("expected integer, got '" + tok + "'");
    }
    if (pos != tok.size()) r.fail("expected integer, got '" + tok + "'");
    return v;
}

double parse_double(const std::string& tok, LineReader& r) {
    size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        r.fail("expected number, got '" + tok + "'");
    }
    if (pos != tok.size()) r.fail("expected number, got '" + tok + "'");
    return v;
}

}  // namespace

Mesh load_mesh(std::istream& in, const std::string& label) {
    LineReader reader(in, label);
    std::vector<std::string> tok;

    if (!reader.next(tok) || tok.size() != 2 || tok[0] != "emsh" || tok[1] != "1")
        reader.fail("expected header 'emsh 1'");

    Mesh mesh;
    bool saw_antiperiodic_side = false;
    bool saw_periodic_side = false;

    while (reader.next(tok)) {
        const std::string section = tok[0];
        if (tok.size() != 2) reader.fail("expected '<section> <count>'");
        const long count = parse_int(tok[1], reader);
        if (count < 0) reader.fail("negative count");

        if (section == "nodes") {
            mesh.nodes.reserve(count);
            for (long i = 0; i < count; ++i) {
                if (!reader.next(tok)) reader.fail("unexpected end of file in nodes");
                if (tok.size() != 2) reader.fail("expected 'x y'");
                mesh.nodes.push_back({parse_double(tok[0], reader), parse_double(tok[1], reader)});
            }
        } else if (section == "triangles") {
            mesh.triangles.reserve(count);
            for (long i = 0; i < count; ++i) {
                if (!reader.next(tok)) reader.fail("unexpected end of file in triangles");
                if (tok.size() != 4) reader.fail("expected 'i j k region'");
                Triangle t;
                for (int k = 0; k < 3; ++k) t.v[k] = static_cast<int>(parse_int(tok[k], reader));
                t.region = static_cast<int>(parse_int(tok[3], reader));
                mesh.triangles.push_back(t);
            }
        } else if (section == "edges") {
            mesh.boundary_edges.reserve(count);
            for (long i = 0; i < count; ++i) {
                if (!reader.next(tok)) reader.fail("unexpected end of file in edges");
                if (tok.size() != 3) reader.fail("expected 'i j tag'");
                mesh.boundary_edges.push_back({static_cast<int>(parse_int(tok[0], reader)),
                                               static_cast<int>(parse_int(tok[1], reader)),
                                               static_cast<int>(parse_int(tok[2], reader))});
            }
        } else if (section == "regions") {
            for (long i = 0; i < count; ++i) {
                if (!reader.next(tok)) reader.fail("unexpected end of file in regions");
                if (tok.size() < 2) reader.fail("expected 'id role [params]'");
                const int id = static_cast<int>(parse_int(tok[0], reader));
                const std::string& role = tok[1];
                RegionInfo info;
                if (role == "iron_rotor") info.role = RegionRole::IronRotor;
                else if (role == "iron_stator") info.role = RegionRole::IronStator;
                else if (role == "air_rotor") info.role = RegionRole::AirRotor;
                else if (role == "air_stator") info.role = RegionRole::AirStator;
                else if (role == "airgap_rotor") info.role = RegionRole::AirgapRotor;
                else if (role == "airgap_stator") info.role = RegionRole::AirgapStator;
                else if (role == "magnet") {
                    if (tok.size() != 3) reader.fail("magnet region needs an index: 'id magnet k'");
                    info.role = RegionRole::Magnet;
                    info.index = static_cast<int>(parse_int(tok[2], reader));
                } else if (role == "coil") {
                    if (tok.size() != 5)
                        reader.fail("coil region needs 'id coil k phase polarity'");
                    info.role = RegionRole::Coil;
                    info.index = static_cast<int>(parse_int(tok[2], reader));
                    if (tok[3] == "A") info.phase = Phase::A;
                    else if (tok[3] == "B") info.phase = Phase::B;
                    else if (tok[3] == "C") info.phase = Phase::C;
                    else reader.fail("unknown coil phase '" + tok[3] + "'");
                    const long pol = parse_int(tok[4], reader);
                    if (pol != 1 && pol != -1) reader.fail("coil polarity must be +1 or -1");
                    info.polarity = static_cast<int>(pol);
                } else {
                    reader.fail("unknown region role '" + role + "'");
                }
                if (info.role != RegionRole::Magnet && info.role != RegionRole::Coil &&
                    tok.size() != 2)
                    reader.fail("unexpected parameters after role '" + role + "'");
                if (!mesh.region_table.emplace(id, info).second)
                    reader.fail("duplicate region id " + std::to_string(id));
            }
        } else if (section == "boundaries") {
            for (long i = 0; i < count; ++i) {
                if (!reader.next(tok)) reader.fail("unexpected end of file in boundaries");
                if (tok.size() < 2) reader.fail("expected 'tag role'");
                const int tag = static_cast<int>(parse_int(tok[0], reader));
                const std::string& role = tok[1];
                BoundaryRole b;
                bool periodic = false;
                if (role == "outer") b = BoundaryRole::Outer;
                else if (role == "shaft") b = BoundaryRole::Shaft;
                else if (role == "periodic_a") { b = BoundaryRole::PeriodicA; periodic = true; }
                else if (role == "periodic_b") { b = BoundaryRole::PeriodicB; periodic = true; }
                else if (role == "interface_rotor") b = BoundaryRole::InterfaceRotor;
                else if (role == "interface_stator") b = BoundaryRole::InterfaceStator;
                else reader.fail("unknown boundary role '" + role + "'");
                if (periodic) {
                    saw_periodic_side = true;
                    // optional sign parameter: -1 marks an antiperiodic sector
                    if (tok.size() == 3) {
                        const long sign = parse_int(tok[2], reader);
                        if (sign != 1 && sign != -1) reader.fail("periodic sign must be +1 or -1");
                        if (sign == -1) saw_antiperiodic_side = true;
                    } else if (tok.size() != 2) {
                        reader.fail("expected 'tag role [sign]'");
                    }
                } else if (tok.size() != 2) {
                    reader.fail("unexpected parameters after role '" + role + "'");
                }
                if (!mesh.boundary_table.emplace(tag, b).second)
                    reader.fail("duplicate boundary tag " + std::to_string(tag));
            }
        } else {
            reader.fail("unknown section '" + section + "'");
        }
    }

    mesh.symmetry = saw_antiperiodic_side ? Symmetry::Antiperiodic
                    : saw_periodic_side   ? Symmetry::Periodic
                                          : Symmetry::Full;
    mesh.validate();
    return mesh;
}

Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open mesh file '" + path + "'");
    return load_mesh(in, path);
}

void save_mesh(const Mesh& mesh, std::ostream& out) {
    out << "emsh 1\n";
    out << "nodes " << mesh.nodes.size() << "\n";
    char buf[80];
    for (const auto& p : mesh.nodes) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x, p.y);
        out << buf;
    }
    out << "triangles " << mesh.triangles.size() << "\n";
    for (const auto& t : mesh.triangles)
        out << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << t.region << "\n";
    out << "edges " << mesh.boundary_edges.size() << "\n";
    for (const auto& e : mesh.boundary_edges) out << e.a << ' ' << e.b << ' ' << e.tag << "\n";
    out << "regions " << mesh.region_table.size() << "\n";
    for (const auto& [id, info] : mesh.region_table) {
        out << id << ' ' << role_name(info.role);
        if (info.role == RegionRole::Magnet) out << ' ' << info.index;
        if (info.role == RegionRole::Coil) {
            const char* phase = info.phase == Phase::A ? "A" : info.phase == Phase::B ? "B" : "C";
            out << ' ' << info.index << ' ' << phase << ' ' << (info.polarity > 0 ? "+1" : "-1");
        }
        out << "\n";
    }
    out << "boundaries " << mesh.boundary_table.size() << "\n";
    for (const auto& [tag, role] : mesh.boundary_table) {
        out << tag << ' ' << role_name(role);
        if (role == BoundaryRole::PeriodicA || role == BoundaryRole::PeriodicB)
            out << (mesh.symmetry == Symmetry::Antiperiodic ? " -1" : " +1");
        out << "\n";
    }
}

void save_mesh(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot open '" + path + "' for writing");
    save_mesh(mesh, out);
    if (!out) throw MeshError("failed writing mesh to '" + path + "'");
}

}  // namespace emshape
