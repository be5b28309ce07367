#include "emshape/materials.hpp"

#include <cmath>
#include <string>

namespace emshape {

ReluctivityEval reluctivity_eval(const ReluctivityModel& model, double b2) {
    if (b2 < 0.0) throw MaterialError("reluctivity evaluated at negative |grad u|^2");
    ReluctivityEval out;
    if (model.kind == ReluctivityModel::Kind::Linear) {
        out.nu = model.nu;
        out.dnu_db2 = 0.0;
        return out;
    }
    double e = model.k2 * b2;
    if (e > model.exp_cap) {
        // clamped: the model is constant beyond the cap, so the consistent
        // derivative is zero
        out.nu = model.k1 * std::exp(model.exp_cap) + model.k3;
        out.dnu_db2 = 0.0;
        out.saturated = true;
        return out;
    }
    const double ex = std::exp(e);
    out.nu = model.k1 * ex + model.k3;
    out.dnu_db2 = model.k1 * model.k2 * ex;
    return out;
}

const MaterialRegion& MaterialTable::at(int region_id) const {
    auto it = regions.find(region_id);
    if (it == regions.end())
        throw MaterialError("no material assigned to region " + std::to_string(region_id));
    return it->second;
}

void MaterialTable::validate_against(const Mesh& mesh) const {
    if (axial_length <= 0.0) throw MaterialError("axial length must be positive");
    for (const auto& [id, info] : mesh.region_table) {
        const MaterialRegion& m = at(id);
        if (info.role == RegionRole::Magnet) {
            if (m.sigma <= 0.0)
                throw MaterialError("magnet region " + std::to_string(id) +
                                    " must have positive conductivity");
        } else {
            if (m.sigma != 0.0)
                throw MaterialError("region " + std::to_string(id) +
                                    " is not a magnet but has nonzero conductivity");
            if (m.magnetization.x != 0.0 || m.magnetization.y != 0.0)
                throw MaterialError("region " + std::to_string(id) +
                                    " is not a magnet but has nonzero magnetization");
        }
        if (info.role == RegionRole::Coil && m.turns > 0.0 && m.slot_area <= 0.0)
            throw MaterialError("coil region " + std::to_string(id) + " has no slot area");
        const auto probe = reluctivity_eval(m.reluctivity, 0.0);
        if (probe.nu <= 0.0)
            throw MaterialError("region " + std::to_string(id) + " has non-positive reluctivity");
    }
}

double source_density(const MaterialTable& table, const DriveSpec& drive, int region_id,
                      int step) {
    const MaterialRegion& m = table.at(region_id);
    if (m.turns <= 0.0 || m.slot_area <= 0.0) return 0.0;
    static constexpr double kPhaseOffset[3] = {0.0, -2.0 * std::numbers::pi / 3.0,
                                               -4.0 * std::numbers::pi / 3.0};
    const double angle = drive.electrical_angle(step) + kPhaseOffset[static_cast<int>(m.phase)];
    return m.polarity * m.turns * drive.peak_current * std::sin(angle) / m.slot_area;
}

Vec2 magnetization_perp(const MaterialTable& table, int region_id) {
    return perp(table.at(region_id).magnetization);
}

int shift_per_step(const Mesh& mesh, const DriveSpec& drive) {
    if (!mesh.has_interface()) return 0;
    const int count = mesh.interface_rings().vertex_count();
    // mechanical rotation per step is (2 pi / p) / N; express it in slots
    const double mech = 2.0 * std::numbers::pi /
                        (static_cast<double>(drive.pole_pairs) * drive.steps_per_period);
    const double slots = count * mech / mesh.sector_angle;
    const double rounded = std::round(slots);
    if (rounded < 1.0 || std::abs(slots - rounded) > 1e-9 * std::max(1.0, rounded))
        throw MaterialError("locked-step shift per step is not a positive whole number of "
                            "interface vertices (" + std::to_string(slots) + ")");
    return static_cast<int>(rounded);
}

}  // namespace emshape
