#include "emshape/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace emshape {

namespace {

struct KeyDefault {
    const char* key;
    const char* value;
};

// every known key with its default; unknown keys are rejected
constexpr std::array kSchema = {
    KeyDefault{"mesh.source", "template"},
    KeyDefault{"mesh.path", ""},
    KeyDefault{"mesh.sector", "full"},
    KeyDefault{"mesh.pole_pairs", "1"},
    KeyDefault{"mesh.shaft_radius", "0.02"},
    KeyDefault{"mesh.rotor_outer_radius", "0.05"},
    KeyDefault{"mesh.stator_inner_radius", "0.055"},
    KeyDefault{"mesh.stator_outer_radius", "0.09"},
    KeyDefault{"mesh.element_size", "0.004"},
    KeyDefault{"mesh.interface_vertices", "0"},
    KeyDefault{"mesh.with_magnets", "true"},
    KeyDefault{"mesh.magnet_inner_frac", "0.55"},
    KeyDefault{"mesh.magnet_outer_frac", "0.75"},
    KeyDefault{"mesh.magnet_angle_frac", "0.45"},
    KeyDefault{"mesh.pocket_angle_frac", "0.12"},
    KeyDefault{"mesh.slots_per_pole_per_phase", "1"},
    KeyDefault{"mesh.slot_depth_frac", "0.45"},
    KeyDefault{"mesh.slot_fill_frac", "0.6"},

    KeyDefault{"materials.iron_model", "brauer"},
    KeyDefault{"materials.iron_nu", "795.7747"},  // nu0 / 1000
    KeyDefault{"materials.brauer_k1", "49.4"},
    KeyDefault{"materials.brauer_k2", "1.46"},
    KeyDefault{"materials.brauer_k3", "520.6"},
    KeyDefault{"materials.brauer_exp_cap", "50"},
    KeyDefault{"materials.magnet_sigma", "625000"},
    KeyDefault{"materials.magnet_remanence", "1.1"},
    KeyDefault{"materials.magnet_direction", "radial_alternating"},
    KeyDefault{"materials.magnet_direction_x", "1"},
    KeyDefault{"materials.magnet_direction_y", "0"},
    KeyDefault{"materials.axial_length", "0.1"},
    KeyDefault{"materials.coil_turns", "100"},
    KeyDefault{"materials.coil_slot_area", "0"},

    KeyDefault{"drive.rpm", "1500"},
    KeyDefault{"drive.steps_per_period", "8"},
    KeyDefault{"drive.peak_current", "10"},
    KeyDefault{"drive.initial_angle", "0"},

    KeyDefault{"cost.lambda1", "1"},
    KeyDefault{"cost.lambda2", "0"},
    KeyDefault{"cost.annulus_inner", "0"},
    KeyDefault{"cost.annulus_outer", "0"},

    KeyDefault{"solver.newton_tol", "1e-8"},
    KeyDefault{"solver.newton_abs_floor", "1e-14"},
    KeyDefault{"solver.newton_max_iter", "50"},
    KeyDefault{"solver.newton_max_halvings", "10"},
    KeyDefault{"solver.linear_tol", "1e-10"},

    KeyDefault{"shapeopt.max_iters", "50"},
    KeyDefault{"shapeopt.step_factor", "0.02"},
    KeyDefault{"shapeopt.quality_floor", "0.05"},
    KeyDefault{"shapeopt.alpha_cr", "1"},
    KeyDefault{"shapeopt.eps0", "1e-6"},
    KeyDefault{"shapeopt.fd_samples", "10"},
    KeyDefault{"shapeopt.fd_eps", "1e-6"},
    KeyDefault{"shapeopt.fd_seed", "12345"},
    KeyDefault{"shapeopt.fd_gate", "1e-5"},

    KeyDefault{"flags.per_component_mean", "true"},
    KeyDefault{"flags.paper_literal_torque_sum", "false"},
    KeyDefault{"flags.include_initial_adjoint", "true"},
    KeyDefault{"flags.magnetostatic_initial", "true"},

    KeyDefault{"output.directory", "out"},
    KeyDefault{"output.write_vtk", "false"},
    KeyDefault{"output.vtk_every", "1"},
};

const char* schema_default(const std::string& key) {
    for (const auto& entry : kSchema)
        if (key == entry.key) return entry.value;
    return nullptr;
}

std::string trim(std::string s) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front())) s.erase(s.begin());
    while (!s.empty() && is_space(s.back())) s.pop_back();
    return s;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

RunConfig RunConfig::parse_string(const std::string& text, const std::string& label) {
    RunConfig config;
    config.hash_ = fnv1a(text);

    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(label + ":" + std::to_string(line_no) + ": malformed section");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(label + ":" + std::to_string(line_no) + ": empty section name");
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(label + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(label + ":" + std::to_string(line_no) + ": empty key or value");
        if (section.empty())
            throw ConfigError(label + ":" + std::to_string(line_no) +
                              ": key outside any [section]");

        const std::string full = section + "." + key;
        if (schema_default(full) == nullptr)
            throw ConfigError(label + ":" + std::to_string(line_no) + ": unknown key '" + full +
                              "'");
        config.values_[full] = value;
    }
    config.validate_keys();
    return config;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path);
}

void RunConfig::validate_keys() const {
    auto positive = [&](const char* key) {
        if (get_double(key) <= 0.0)
            throw ConfigError(std::string(key) + " must be positive");
    };
    positive("solver.newton_tol");
    positive("solver.linear_tol");
    positive("solver.newton_abs_floor");
    positive("shapeopt.step_factor");
    positive("shapeopt.fd_eps");
    if (get_int("drive.steps_per_period") < 1)
        throw ConfigError("drive.steps_per_period must be >= 1");
    if (get_double("cost.lambda1") < 0.0 || get_double("cost.lambda2") < 0.0)
        throw ConfigError("cost weights must be non-negative");
    if (get_int("shapeopt.max_iters") < 0)
        throw ConfigError("shapeopt.max_iters must be >= 0");
}

std::string RunConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    const char* fallback = schema_default(key);
    if (fallback == nullptr) throw ConfigError("unknown configuration key '" + key + "'");
    return fallback;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string raw = get_string(key);
    size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(raw, &pos);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' is not a number: '" + raw + "'");
    }
    if (pos != raw.size()) throw ConfigError("key '" + key + "' is not a number: '" + raw + "'");
    return v;
}

int RunConfig::get_int(const std::string& key) const {
    const std::string raw = get_string(key);
    size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(raw, &pos);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' is not an integer: '" + raw + "'");
    }
    if (pos != raw.size())
        throw ConfigError("key '" + key + "' is not an integer: '" + raw + "'");
    return static_cast<int>(v);
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string raw = get_string(key);
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
    throw ConfigError("key '" + key + "' is not a boolean: '" + raw + "'");
}

Mesh RunConfig::make_mesh() const {
    const std::string source = get_string("mesh.source");
    if (source == "file") {
        const std::string path = get_string("mesh.path");
        if (path.empty()) throw ConfigError("mesh.source = file requires mesh.path");
        return load_mesh(path);
    }
    if (source != "template")
        throw ConfigError("mesh.source must be 'template' or 'file', got '" + source + "'");

    TemplateParams params;
    const std::string sector = get_string("mesh.sector");
    if (sector == "full") params.sector = SectorFraction::Full;
    else if (sector == "quarter") params.sector = SectorFraction::Quarter;
    else if (sector == "eighth") params.sector = SectorFraction::Eighth;
    else throw ConfigError("mesh.sector must be full, quarter or eighth");

    params.pole_pairs = get_int("mesh.pole_pairs");
    params.shaft_radius = get_double("mesh.shaft_radius");
    params.rotor_outer_radius = get_double("mesh.rotor_outer_radius");
    params.stator_inner_radius = get_double("mesh.stator_inner_radius");
    params.stator_outer_radius = get_double("mesh.stator_outer_radius");
    params.element_size = get_double("mesh.element_size");
    params.interface_vertices = get_int("mesh.interface_vertices");
    params.steps_per_period = get_int("drive.steps_per_period");
    params.with_magnets = get_bool("mesh.with_magnets");
    params.magnet_inner_frac = get_double("mesh.magnet_inner_frac");
    params.magnet_outer_frac = get_double("mesh.magnet_outer_frac");
    params.magnet_angle_frac = get_double("mesh.magnet_angle_frac");
    params.pocket_angle_frac = get_double("mesh.pocket_angle_frac");
    params.slots_per_pole_per_phase = get_int("mesh.slots_per_pole_per_phase");
    params.slot_depth_frac = get_double("mesh.slot_depth_frac");
    params.slot_fill_frac = get_double("mesh.slot_fill_frac");
    return generate_template(params);
}

MaterialTable RunConfig::make_materials(const Mesh& mesh) const {
    MaterialTable table;
    table.axial_length = get_double("materials.axial_length");

    ReluctivityModel iron;
    const std::string iron_model = get_string("materials.iron_model");
    if (iron_model == "linear") {
        iron = ReluctivityModel::linear(get_double("materials.iron_nu"));
    } else if (iron_model == "brauer") {
        iron = ReluctivityModel::brauer(
            get_double("materials.brauer_k1"), get_double("materials.brauer_k2"),
            get_double("materials.brauer_k3"), get_double("materials.brauer_exp_cap"));
    } else {
        throw ConfigError("materials.iron_model must be 'linear' or 'brauer'");
    }

    const double sigma = get_double("materials.magnet_sigma");
    const double remanence = get_double("materials.magnet_remanence");
    const std::string direction_mode = get_string("materials.magnet_direction");
    const double turns = get_double("materials.coil_turns");
    const double fixed_slot_area = get_double("materials.coil_slot_area");

    // per-region element areas and centroids for coil slot areas and the
    // radial magnetization directions
    std::map<int, double> region_area;
    std::map<int, Vec2> region_first_moment;
    for (const auto& tri : mesh.triangles) {
        const double area =
            signed_area(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]], mesh.nodes[tri.v[2]]);
        const Vec2 centroid =
            (mesh.nodes[tri.v[0]] + mesh.nodes[tri.v[1]] + mesh.nodes[tri.v[2]]) / 3.0;
        region_area[tri.region] += area;
        region_first_moment[tri.region] += area * centroid;
    }

    for (const auto& [id, info] : mesh.region_table) {
        MaterialRegion m;
        m.reluctivity = ReluctivityModel::linear(kNu0);
        switch (info.role) {
            case RegionRole::IronRotor:
            case RegionRole::IronStator:
                m.reluctivity = iron;
                break;
            case RegionRole::Magnet: {
                m.sigma = sigma;
                Vec2 dir{get_double("materials.magnet_direction_x"),
                         get_double("materials.magnet_direction_y")};
                if (direction_mode == "radial_alternating") {
                    const Vec2 centroid = region_first_moment[id] / region_area[id];
                    dir = centroid / centroid.norm();
                    if (info.index % 2 != 0) dir = -dir;
                } else if (direction_mode != "fixed") {
                    throw ConfigError(
                        "materials.magnet_direction must be radial_alternating or fixed");
                }
                if (dir.norm() == 0.0)
                    throw ConfigError("magnet direction must be a nonzero vector");
                // source magnetization in coercivity units, nu0 * B_r
                m.magnetization = (kNu0 * remanence / dir.norm()) * dir;
                break;
            }
            case RegionRole::Coil: {
                m.turns = turns;
                m.slot_area = fixed_slot_area > 0.0 ? fixed_slot_area : region_area[id];
                m.phase = info.phase;
                m.polarity = info.polarity;
                break;
            }
            default:
                break;
        }
        table.regions[id] = m;
    }
    table.validate_against(mesh);
    return table;
}

DriveSpec RunConfig::make_drive() const {
    DriveSpec drive;
    drive.rpm = get_double("drive.rpm");
    drive.pole_pairs = get_int("mesh.pole_pairs");
    drive.steps_per_period = get_int("drive.steps_per_period");
    drive.peak_current = get_double("drive.peak_current");
    drive.initial_angle = get_double("drive.initial_angle");
    if (drive.rpm <= 0.0) throw ConfigError("drive.rpm must be positive");
    return drive;
}

StateOptions RunConfig::make_state_options() const {
    StateOptions options;
    options.newton.tolerance = get_double("solver.newton_tol");
    options.newton.absolute_floor = get_double("solver.newton_abs_floor");
    options.newton.max_iterations = get_int("solver.newton_max_iter");
    options.newton.max_halvings = get_int("solver.newton_max_halvings");
    options.newton.linear_tol = get_double("solver.linear_tol");
    options.magnetostatic_initial = get_bool("flags.magnetostatic_initial");
    return options;
}

AdjointOptions RunConfig::make_adjoint_options(const Mesh& mesh) const {
    AdjointOptions options;
    options.cost.lambda1 = get_double("cost.lambda1");
    options.cost.lambda2 = get_double("cost.lambda2");
    options.cost.mean_mode =
        get_bool("flags.per_component_mean") ? MeanMode::PerComponent : MeanMode::Global;
    options.cost.literal_torque_sum = get_bool("flags.paper_literal_torque_sum");
    options.include_initial = get_bool("flags.include_initial_adjoint");
    options.initial_is_magnetostatic = get_bool("flags.magnetostatic_initial");
    options.linear_tol = get_double("solver.linear_tol");

    double inner = get_double("cost.annulus_inner");
    double outer = get_double("cost.annulus_outer");
    if (inner == 0.0 && outer == 0.0) {
        // default annulus: the radial envelope of the tagged airgap elements
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& tri : mesh.triangles) {
            const RegionRole role = mesh.region(tri.region).role;
            if (role != RegionRole::AirgapRotor && role != RegionRole::AirgapStator) continue;
            for (int v : tri.v) {
                lo = std::min(lo, mesh.nodes[v].norm());
                hi = std::max(hi, mesh.nodes[v].norm());
            }
        }
        if (hi > 0.0) {
            inner = lo;
            outer = hi;
        }
    }
    options.cost.torque.inner_radius = inner;
    options.cost.torque.outer_radius = outer;
    return options;
}

OptimizeOptions RunConfig::make_optimize_options(const Mesh& mesh) const {
    OptimizeOptions options;
    options.state = make_state_options();
    options.adjoint = make_adjoint_options(mesh);
    options.descent.alpha_cr = get_double("shapeopt.alpha_cr");
    options.descent.eps0 = get_double("shapeopt.eps0");
    options.descent.linear_tol = get_double("solver.linear_tol");
    options.line_search.step_factor = get_double("shapeopt.step_factor");
    options.line_search.quality_floor = get_double("shapeopt.quality_floor");
    options.max_iterations = get_int("shapeopt.max_iters");
    return options;
}

FdCheckOptions RunConfig::make_fd_options() const {
    FdCheckOptions options;
    options.samples = get_int("shapeopt.fd_samples");
    options.eps_rel = get_double("shapeopt.fd_eps");
    options.seed = static_cast<std::uint64_t>(get_int("shapeopt.fd_seed"));
    return options;
}

}  // namespace emshape
