#pragma once

#include <optional>
#include <string>

#include "emshape/config.hpp"

namespace emshape {

// exit codes shared by the CLI and the command implementations
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitGate = 4;

struct AdjointCheckOverrides {
    std::optional<int> samples;
    std::optional<double> eps;
    std::optional<double> gate;
};

/// Forward pipeline: trajectory, steps.csv with per-step power and torque,
/// optional per-step VTK dumps, summary line.
int cmd_solve(const std::string& config_path);

/// Finite-difference oracle for the adjoint shape gradient; writes
/// gradcheck.csv and fails the exit status when the worst relative error
/// exceeds the gate.
int cmd_adjoint_check(const std::string& config_path, const AdjointCheckOverrides& overrides = {});

/// Full shape optimization loop; writes history.csv plus initial and final
/// meshes, reports the termination reason.
int cmd_optimize(const std::string& config_path);

/// Mesh summary: counts, regions, boundaries, quality, interface slots.
int cmd_mesh_info(const std::string& mesh_path);

/// Output directory for a run: EMSHAPE_OUT overrides the configured one.
std::string resolve_output_directory(const RunConfig& config);

}  // namespace emshape
