#pragma once

#include <string>
#include <utility>
#include <vector>

#include "emshape/assembly.hpp"
#include "emshape/mesh.hpp"

namespace emshape {

/// Doubles formatted at 17 significant digits for reproducible diffs.
std::string format_g17(double value);

/// Legacy ASCII VTK dump of the triangulation with named nodal and
/// elementwise scalar fields.
void write_vtk(const std::string& path, const Mesh& mesh,
               const std::vector<std::pair<std::string, Vector>>& point_fields,
               const std::vector<std::pair<std::string, std::vector<double>>>& cell_fields);

/// CSV with a header row; all numeric cells at 17 significant digits.
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace emshape
