#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

namespace qplr::sv {

using cplx = std::complex<double>;

/// Exact n-qubit state. Basis index i encodes the bitstring |i> with qubit 0
/// as the most significant bit, so the pair stride of qubit q is
/// 2^(n-1-q).
struct StateVector {
    int num_qubits = 0;
    std::vector<cplx> amp;

    std::size_t size() const { return amp.size(); }
    double norm_sq() const;
};

/// |0...0> on num_qubits qubits. Guarded to 1..24 qubits (a 24-qubit state is
/// already 256 MiB of amplitudes).
StateVector init_zero(int num_qubits);

/// State with the given (already normalized) amplitudes.
StateVector from_amplitudes(int num_qubits, std::vector<cplx> amplitudes);

enum class GateKind { RY, RZ, RotZYZ, CZ, H };

struct Gate {
    GateKind kind;
    int target = 0;
    int control = -1;               // CZ only
    std::array<double, 3> angle{}; // RY/RZ use angle[0]; RotZYZ uses all three

    static Gate ry(int target, double theta) {
        return {GateKind::RY, target, -1, {theta, 0, 0}};
    }
    static Gate rz(int target, double theta) {
        return {GateKind::RZ, target, -1, {theta, 0, 0}};
    }
    /// ZYZ Euler rotation RZ(omega) RY(theta) RZ(phi).
    static Gate rot(int target, double phi, double theta, double omega) {
        return {GateKind::RotZYZ, target, -1, {phi, theta, omega}};
    }
    static Gate cz(int control, int target) {
        return {GateKind::CZ, target, control, {0, 0, 0}};
    }
    static Gate h(int target) { return {GateKind::H, target, -1, {0, 0, 0}}; }
};

/// 2x2 unitary of a single-qubit gate, row-major. CZ is rejected.
std::array<cplx, 4> gate_matrix(const Gate &g);

/// Apply the gate in place via strided pair updates, O(2^n).
void apply_gate(StateVector &state, const Gate &g);

/// Apply the inverse gate in place.
void apply_gate_adjoint(StateVector &state, const Gate &g);

/// Raw-buffer variants so gradient sweeps can drive gates over amplitude
/// buffers that are not full StateVector objects.
void apply_gate_buf(cplx *amp, int num_qubits, const Gate &g, bool adjoint);

/// Apply the Pauli generator of RY (Pauli-Y) or RZ (Pauli-Z) on the gate's
/// target qubit. Used by the adjoint differentiation sweep.
void apply_pauli_y(cplx *amp, int num_qubits, int target);
void apply_pauli_z(cplx *amp, int num_qubits, int target);

/// Born-rule outcome probabilities |amp_i|^2.
std::vector<double> probabilities(const StateVector &state);

/// Multinomial counts of num_shots projective measurements in the
/// computational basis. Deterministic given the seed.
std::vector<std::uint64_t> sample_shots(const StateVector &state,
                                        std::uint64_t num_shots,
                                        std::uint64_t seed);

} // namespace qplr::sv
