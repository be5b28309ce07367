#pragma once

#include <map>
#include <numbers>
#include <stdexcept>

#include "emshape/geometry.hpp"
#include "emshape/mesh.hpp"

namespace emshape {

class MaterialError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vacuum reluctivity 1/mu0, A/(T.m).
inline constexpr double kNu0 = 1.0 / (4.0e-7 * std::numbers::pi);

/// Reluctivity nu(|grad u|) with an analytic derivative in b^2 = |grad u|^2.
/// The Brauer model nu(b) = k1 exp(k2 b^2) + k3 saturates monotonically;
/// its exponent is clamped at exp_cap to guard against overflow.
struct ReluctivityModel {
    enum class Kind { Linear, Brauer };
    Kind kind = Kind::Linear;
    double nu = kNu0;                    // linear value
    double k1 = 0, k2 = 0, k3 = 0;       // brauer coefficients
    double exp_cap = 50.0;

    static ReluctivityModel linear(double nu_value) {
        ReluctivityModel m;
        m.kind = Kind::Linear;
        m.nu = nu_value;
        return m;
    }
    static ReluctivityModel brauer(double k1, double k2, double k3, double cap = 50.0) {
        ReluctivityModel m;
        m.kind = Kind::Brauer;
        m.k1 = k1;
        m.k2 = k2;
        m.k3 = k3;
        m.exp_cap = cap;
        return m;
    }
};

struct ReluctivityEval {
    double nu = 0.0;
    double dnu_db2 = 0.0;
    bool saturated = false;  // exponent hit the clamp
};

ReluctivityEval reluctivity_eval(const ReluctivityModel& model, double b2);

/// Per-region constitutive data. Coil phase/polarity are copied from the
/// mesh region table when the table is bound so that source evaluation is
/// self-contained.
struct MaterialRegion {
    ReluctivityModel reluctivity;
    double sigma = 0.0;        // S/m, positive only in magnets
    Vec2 magnetization;        // source magnetization vector, zero outside magnets
    double turns = 0.0;        // coil only
    double slot_area = 0.0;    // coil only, fixed at bind time
    Phase phase = Phase::A;
    int polarity = +1;
};

struct MaterialTable {
    std::map<int, MaterialRegion> regions;
    double axial_length = 1.0;  // used for both power and torque

    const MaterialRegion& at(int region_id) const;

    /// Cross-checks against the mesh: sigma > 0 exactly on magnet regions,
    /// magnetization confined to magnets, coil data complete.
    void validate_against(const Mesh& mesh) const;
};

/// Electrical drive: N steps over one electric period at fixed speed.
struct DriveSpec {
    double rpm = 1500.0;
    int pole_pairs = 1;
    int steps_per_period = 1;   // N
    double peak_current = 0.0;  // I_pk per turn, A
    double initial_angle = 0.0; // load angle phi0, rad

    double period() const { return 60.0 / (rpm * pole_pairs); }
    double tau() const { return period() / steps_per_period; }
    double electrical_angle(int step) const {
        return initial_angle + 2.0 * std::numbers::pi * step / steps_per_period;
    }
};

/// Impressed current density f_j in a coil region at time step j; zero for
/// non-coil regions.
double source_density(const MaterialTable& table, const DriveSpec& drive, int region_id, int step);

/// Counterclockwise perpendicular of the region magnetization, (-My, Mx).
Vec2 magnetization_perp(const MaterialTable& table, int region_id);

/// Interface identification shift per time step; throws unless the drive and
/// mesh interface resolve to a whole positive number of vertices.
int shift_per_step(const Mesh& mesh, const DriveSpec& drive);

}  // namespace emshape
