#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <stdexcept>

#include "emshape/materials.hpp"
#include "emshape/mesh.hpp"

namespace emshape {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual = -1.0)
        : std::runtime_error(what), achieved_residual(residual) {}
    double achieved_residual;
};

/// Barycentric quadrature rules on triangles; weights sum to 1 and are
/// scaled by the element area at evaluation time.
struct Quadrature {
    struct Point {
        double weight;
        std::array<double, 3> bary;
    };
    std::vector<Point> points;

    /// 1-point centroid rule, exact for constants.
    static const Quadrature& centroid();
    /// 3-point edge-midpoint rule, exact up to degree 2. Default.
    static const Quadrature& midpoints();
};

/// Full node index <-> reduced index map: slaves folded into masters with
/// sign, Dirichlet nodes eliminated (value 0).
class DofMap {
public:
    DofMap() = default;
    DofMap(int node_count, const ConstraintMap& constraints);

    int node_count() const { return static_cast<int>(status_.size()); }
    int reduced_count() const { return n_reduced_; }
    bool is_free(int node) const { return status_[node] >= 0; }
    bool is_dirichlet(int node) const { return status_[node] == kDirichlet; }
    int reduced_index(int node) const { return status_[node]; }

    /// Expansion matrix R with x_full = R x_reduced.
    const SparseMatrix& expansion() const { return expansion_; }

    Vector expand(const Vector& reduced) const { return expansion_ * reduced; }
    /// Covector map R^T: correct for loads and residuals.
    Vector reduce(const Vector& full) const { return expansion_.transpose() * full; }
    /// Values at free nodes: correct for states and warm starts.
    Vector restrict_values(const Vector& full) const;
    SparseMatrix reduce_matrix(const SparseMatrix& full) const {
        return expansion_.transpose() * full * expansion_;
    }

private:
    static constexpr int kSlave = -1;
    static constexpr int kDirichlet = -2;
    std::vector<int> status_;  // >= 0 reduced index, else kSlave/kDirichlet
    int n_reduced_ = 0;
    SparseMatrix expansion_;
};

/// Reduced symmetric system ready for the direct solver.
struct SparseSystem {
    SparseMatrix matrix;
    Vector rhs;
    DofMap dofs;
};

/// Residual <A(u), .> and tangent <A'(u)., .> of the nonlinear curl-curl
/// operator, both on full node indices. grad u is elementwise constant for
/// P1, so the nonlinear terms are evaluated exactly.
struct OperatorParts {
    Vector residual;
    SparseMatrix tangent;
    int saturated_elements = 0;  // reluctivity exponent clamp engaged
};
OperatorParts assemble_operator(const Mesh& mesh, const MaterialTable& materials,
                                const Vector& u_full);

/// Consistent P1 mass matrix scaled by sigma/tau; couples only magnet nodes.
SparseMatrix assemble_mass_sigma(const Mesh& mesh, const MaterialTable& materials, double tau);

/// Load F_j(w) = sum_T [ f_j(T) int_T w + int_T Mperp . grad w ].
Vector assemble_load(const Mesh& mesh, const MaterialTable& materials, const DriveSpec& drive,
                     int step);

/// Load for an arbitrary density, integrated with the given rule. Testing
/// seam for manufactured solutions; the production load uses region data.
Vector assemble_load_function(const Mesh& mesh, const std::function<double(Vec2)>& density,
                              const Quadrature& rule = Quadrature::midpoints());

/// Direct sparse solve of the reduced system; returns the full nodal vector
/// with slaves and Dirichlet values filled in. Deterministic; throws
/// SolverError carrying the achieved residual when the relative residual
/// ||b - Ax|| / ||b|| cannot be brought below tol.
Vector reduce_and_solve(const SparseSystem& system, double tol = 1e-10);

}  // namespace emshape
