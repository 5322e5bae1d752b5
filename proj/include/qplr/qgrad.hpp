#pragma once

#include <span>
#include <vector>

#include "qplr/vqc.hpp"

namespace qplr::qgrad {

/// Derivatives of the class-probability vector with respect to every
/// trainable angle. Rows index classes; columns index parameters in the
/// circuit's flattened theta order (d_theta) or encoding-angle order
/// (d_phi, Angle encoding only). When num_classes covers all 2^n outcomes
/// the entries are raw Born-probability derivatives; for a smaller class
/// window they are derivatives of the truncate-renormalized distribution.
struct QuantumJacobian {
    int num_classes = 0;
    int num_theta = 0;
    int num_phi = 0;
    std::vector<double> d_theta; // [num_classes][num_theta], row-major
    std::vector<double> d_phi;   // [num_classes][num_phi], row-major

    double theta_entry(int k, int param) const {
        return d_theta[static_cast<std::size_t>(k) * num_theta + param];
    }
    double phi_entry(int k, int param) const {
        return d_phi[static_cast<std::size_t>(k) * num_phi + param];
    }
};

/// num_classes semantics shared by the three Jacobian routines: 0 selects
/// the full 2^n outcome space; 1..2^n selects the truncate-renorm class
/// window and chain-rules the reduction (the shift rule itself is applied
/// only to raw outcome probabilities, where it is exact).

/// Two shifted circuit evaluations per parameter,
/// dP/dtheta = [P(theta + pi/2) - P(theta - pi/2)] / 2.
QuantumJacobian parameter_shift_jacobian(const vqc::CircuitSpec &spec,
                                         const vqc::EncodedInput &enc,
                                         int num_classes = 0);

/// One forward pass plus a reverse sweep carrying a basis-projector
/// observable per tracked outcome. Same values as parameter_shift_jacobian
/// to float precision, at O(gates * 2^n) per tracked outcome.
QuantumJacobian adjoint_jacobian(const vqc::CircuitSpec &spec,
                                 const vqc::EncodedInput &enc,
                                 int num_classes = 0);

/// Central-difference oracle for tests; h must lie in [1e-7, 1e-3].
QuantumJacobian finite_difference_jacobian(const vqc::CircuitSpec &spec,
                                           const vqc::EncodedInput &enc,
                                           double h, int num_classes = 0);

/// Vector-Jacobian product for hybrid training: given the loss gradient w
/// with respect to all 2^n outcome probabilities, returns the loss gradient
/// with respect to theta (and phi for Angle encoding) in one adjoint sweep,
/// O(gates * 2^n) total.
struct QuantumVjp {
    std::vector<double> d_theta; // length spec.num_theta()
    std::vector<double> d_phi;   // length n (Angle) or empty
};

QuantumVjp adjoint_vjp(const vqc::CircuitSpec &spec,
                       const vqc::EncodedInput &enc,
                       std::span<const double> outcome_grad);

} // namespace qplr::qgrad
