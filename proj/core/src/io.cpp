#include "emshape/io.hpp"

#include <cstdio>
#include <fstream>

namespace emshape {

std::string format_g17(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void write_vtk(const std::string& path, const Mesh& mesh,
               const std::vector<std::pair<std::string, Vector>>& point_fields,
               const std::vector<std::pair<std::string, std::vector<double>>>& cell_fields) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot open '" + path + "' for writing");

    out << "# vtk DataFile Version 3.0\n";
    out << "emshape field dump\n";
    out << "ASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.nodes.size() << " double\n";
    for (const auto& p : mesh.nodes)
        out << format_g17(p.x) << ' ' << format_g17(p.y) << " 0\n";

    out << "CELLS " << mesh.triangles.size() << ' ' << 4 * mesh.triangles.size() << "\n";
    for (const auto& t : mesh.triangles)
        out << "3 " << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << "\n";
    out << "CELL_TYPES " << mesh.triangles.size() << "\n";
    for (size_t i = 0; i < mesh.triangles.size(); ++i) out << "5\n";

    if (!point_fields.empty()) {
        out << "POINT_DATA " << mesh.nodes.size() << "\n";
        for (const auto& [name, values] : point_fields) {
            out << "SCALARS " << name << " double 1\n";
            out << "LOOKUP_TABLE default\n";
            for (Eigen::Index i = 0; i < values.size(); ++i) out << format_g17(values[i]) << "\n";
        }
    }
    if (!cell_fields.empty()) {
        out << "CELL_DATA " << mesh.triangles.size() << "\n";
        for (const auto& [name, values] : cell_fields) {
            out << "SCALARS " << name << " double 1\n";
            out << "LOOKUP_TABLE default\n";
            for (double v : values) out << format_g17(v) << "\n";
        }
    }
    if (!out) throw MeshError("failed writing VTK file '" + path + "'");
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot open '" + path + "' for writing");
    out << header << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out << ',';
            out << format_g17(row[i]);
        }
        out << "\n";
    }
    if (!out) throw MeshError("failed writing CSV file '" + path + "'");
}

}  // namespace emshape
