#include "eit/irgn.hpp"

#include <cmath>
#include <stdexcept>

#include "eit/phantom.hpp"

namespace eit {

namespace {

// delta = (J^T J + a I)^{-1} b via the dual identity
// (J^T J + a I)^{-1} = (1/a) (I - J^T (J J^T + a I)^{-1} J), which only
// factorizes the 208 x 208 Gram matrix.
Eigen::VectorXd regularized_step(const Eigen::MatrixXd& J, const Eigen::MatrixXd& gram,
                                 double alpha, const Eigen::VectorXd& b) {
    Eigen::MatrixXd G = gram;
    G.diagonal().array() += alpha;
    const Eigen::VectorXd w = Eigen::LDLT<Eigen::MatrixXd>(G).solve(J * b);
    return (b - J.transpose() * w) / alpha;
}

}  // namespace

IrgnResult irgn_reconstruct(const MeasurementFrame& frame, const Mesh& mesh,
                            const ElectrodeLayout& layout, const IrgnConfig& config,
                            const MeasurementFrame* background) {
    if (!(config.alpha0_rel > 0.0) || !(config.q > 0.0 && config.q < 1.0) ||
        !(config.box_lo > 0.0) || !(config.box_lo <= config.box_hi) ||
        config.max_iters < 1)
        throw std::invalid_argument("irgn_reconstruct: bad config");

    Eigen::VectorXd d = frame.values;
    if (frame.is_difference) {
        if (background == nullptr)
            throw std::invalid_argument(
                "irgn_reconstruct: difference frame needs the background frame");
        if (background->is_difference || background->values.size() != d.size())
            throw std::invalid_argument("irgn_reconstruct: bad background frame");
        d += background->values;
    }

    const int n_tri = mesh.n_triangles();
    Eigen::VectorXd sigma = Eigen::VectorXd::Constant(n_tri, config.sigma_init);
    const Eigen::VectorXd sigma_ref = sigma;

    IrgnResult result;
    result.field.provenance = Provenance::Irgn;

    auto to_field = [&](const Eigen::VectorXd& s) {
        SigmaField f;
        f.mesh_id = mesh.fingerprint();
        f.values.assign(s.data(), s.data() + s.size());
        return f;
    };

    double alpha0 = 0.0;
    double prev_rel_residual = -1.0;
    const double d_norm = std::max(d.norm(), 1e-300);

    for (int k = 0; k < config.max_iters; ++k) {
        Eigen::MatrixXd J;
        Eigen::VectorXd residual;
        try {
            const SigmaField sf = to_field(sigma);
            const CemSystem system = assemble_cem(mesh, layout, sf);
            const auto solutions = solve_protocol_full(system);
            residual = d - measure_solutions(solutions, layout.M).values;
            J = jacobian_from_solutions(mesh, solutions, layout.M);
        } catch (const std::exception& e) {
            result.aborted = true;
            result.abort_reason = e.what();
            break;
        }

        if (k == 0)
            alpha0 = config.alpha0_rel *
                     std::max((J.transpose() * d).cwiseAbs().maxCoeff(), 1e-300);
        const double alpha = alpha0 * std::pow(config.q, static_cast<double>(k));

        const double rel_residual = residual.norm() / d_norm;
        if (prev_rel_residual >= 0.0 && prev_rel_residual - rel_residual < config.tol)
            break;
        prev_rel_residual = rel_residual;

        IrgnIterate it;
        it.residual_norm = residual.norm();
        it.alpha = alpha;

        const Eigen::VectorXd rhs =
            J.transpose() * residual - alpha * (sigma - sigma_ref);
        const Eigen::MatrixXd gram = J * J.transpose();
        const Eigen::VectorXd delta = regularized_step(J, gram, alpha, rhs);

        // verify the step against the primal normal equations
        const Eigen::VectorXd check = J.transpose() * (J * delta) + alpha * delta - rhs;
        it.normal_eq_error = check.norm() / std::max(rhs.norm(), 1e-300);
        result.history.push_back(it);
        if (it.normal_eq_error > 1e-8)
            throw std::runtime_error("irgn_reconstruct: normal-equations solve check failed");

        sigma = (sigma + delta).cwiseMax(config.box_lo).cwiseMin(config.box_hi);
    }

    result.field.values.assign(sigma.data(), sigma.data() + sigma.size());
    return result;
}

Vec2 perturbation_center_of_mass(const std::vector<double>& values, const Mesh& mesh) {
    if (static_cast<int>(values.size()) != mesh.n_triangles())
        throw std::invalid_argument("perturbation_center_of_mass: size mismatch");
    double wsum = 0.0, cx = 0.0, cy = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const double w = mesh.element_areas[t] * std::max(values[static_cast<std::size_t>(t)] - 1.0, 0.0);
        const Vec2 c = mesh.centroid(t);
        wsum += w;
        cx += w * c.x;
        cy += w * c.y;
    }
    if (wsum <= 0.0)
        throw std::runtime_error("perturbation_center_of_mass: no positive perturbation");
    return {cx / wsum, cy / wsum};
}

}  // namespace eit
