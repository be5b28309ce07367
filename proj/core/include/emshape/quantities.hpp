#pragma once

#include "emshape/state.hpp"

namespace emshape {

/// How the zero-mean correction of the eddy density is grouped: per
/// connected magnet component (current loops close within one segment), or
/// over the whole magnet union.
enum class MeanMode { PerComponent, Global };

/// Elementwise eddy-current density with the zero-mean correction.
struct EddyField {
    std::vector<std::vector<int>> components;  // triangle indices per segment
    std::vector<double> density;               // J_e per mesh triangle, 0 outside magnets
    std::vector<double> corrected;             // J~_e per mesh triangle
    std::vector<double> component_mean;        // J-bar per component (one entry when Global)
};

EddyField eddy_density(const Vector& u_step, const Vector& u_prev, const Mesh& mesh,
                       const MaterialTable& materials, double tau,
                       MeanMode mode = MeanMode::PerComponent);

/// Dissipated power l_z * sum( J~^2 / sigma ) over the magnets at one step.
double power_step(const Vector& u_prev, const Vector& u_step, const Mesh& mesh,
                  const MaterialTable& materials, double tau,
                  MeanMode mode = MeanMode::PerComponent);

double average_power(const StateTrajectory& traj, const Mesh& mesh,
                     const MaterialTable& materials, MeanMode mode = MeanMode::PerComponent);

/// Arkkio annulus for the torque integral: airgap-role elements whose
/// centroid radius falls in [inner_radius, outer_radius].
struct TorqueSpec {
    double inner_radius = 0.0;  // r_r
    double outer_radius = 0.0;  // r_s
};

/// Integrand (grad u)^T Q(x) grad u of the Arkkio torque; exposed for the
/// radial-null tests.
double arkkio_integrand(const Vec2& grad, const Vec2& x);

double torque_step(const Vector& u_step, const Mesh& mesh, const MaterialTable& materials,
                   const TorqueSpec& spec);

/// Mean of T_1..T_N; the bare sum when literal_sum is set.
double average_torque(const StateTrajectory& traj, const Mesh& mesh,
                      const MaterialTable& materials, const TorqueSpec& spec,
                      bool literal_sum = false);

struct CostBreakdown {
    std::vector<double> power_steps;   // P_1..P_N
    std::vector<double> torque_steps;  // T_1..T_N
    double average_power = 0.0;
    double average_torque = 0.0;
    double cost = 0.0;  // lambda1 * P - lambda2 * T
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

struct CostOptions {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    MeanMode mean_mode = MeanMode::PerComponent;
    bool literal_torque_sum = false;
    TorqueSpec torque;
};

CostBreakdown cost(const StateTrajectory& traj, const Mesh& mesh, const MaterialTable& materials,
                   const CostOptions& options);

}  // namespace emshape
