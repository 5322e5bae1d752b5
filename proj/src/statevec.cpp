#include "qplr/statevec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qplr/errors.hpp"
#include "qplr/rng.hpp"

namespace qplr::sv {

namespace {

constexpr int kMaxQubits = 24;

void check_qubit(int q, int num_qubits, const char *what) {
    if (q < 0 || q >= num_qubits) {
        throw ContractViolation(std::string(what) + " qubit index " +
                                std::to_string(q) + " out of range for " +
                                std::to_string(num_qubits) + " qubits");
    }
}

/// Pair stride for a qubit under the qubit-0-is-MSB convention.
inline std::size_t stride_of(int num_qubits, int target) {
    return std::size_t{1} << (num_qubits - 1 - target);
}

/// Apply a 2x2 matrix to the target qubit of a raw amplitude buffer.
void apply_single_qubit(cplx *amp, int num_qubits, int target,
                        const std::array<cplx, 4> &m) {
    const std::size_t size = std::size_t{1} << num_qubits;
    const std::size_t stride = stride_of(num_qubits, target);
    for (std::size_t block = 0; block < size; block += 2 * stride) {
        for (std::size_t i = block; i < block + stride; ++i) {
            const cplx v0 = amp[i];
            const cplx v1 = amp[i + stride];
            amp[i] = m[0] * v0 + m[1] * v1;
            amp[i + stride] = m[2] * v0 + m[3] * v1;
        }
    }
}

/// RY has a real matrix; keep the hot path free of complex multiplies.
void apply_ry(cplx *amp, int num_qubits, int target, double theta) {
    const double c = std::cos(theta / 2);
    const double s = std::sin(theta / 2);
    const std::size_t size = std::size_t{1} << num_qubits;
    const std::size_t stride = stride_of(num_qubits, target);
    for (std::size_t block = 0; block < size; block += 2 * stride) {
        for (std::size_t i = block; i < block + stride; ++i) {
            const cplx v0 = amp[i];
            const cplx v1 = amp[i + stride];
            amp[i] = c * v0 - s * v1;
            amp[i + stride] = s * v0 + c * v1;
        }
    }
}

void apply_rz(cplx *amp, int num_qubits, int target, double theta) {
    const cplx p0 = std::polar(1.0, -theta / 2);
    const cplx p1 = std::polar(1.0, theta / 2);
    const std::size_t size = std::size_t{1} << num_qubits;
    const std::size_t stride = stride_of(num_qubits, target);
    for (std::size_t block = 0; block < size; block += 2 * stride) {
        for (std::size_t i = block; i < block + stride; ++i) {
            amp[i] *= p0;
            amp[i + stride] *= p1;
        }
    }
}

void apply_cz(cplx *amp, int num_qubits, int control, int target) {
    const std::size_t size = std::size_t{1} << num_qubits;
    const std::size_t mc = stride_of(num_qubits, control);
    const std::size_t mt = stride_of(num_qubits, target);
    for (std::size_t i = 0; i < size; ++i) {
        if ((i & mc) && (i & mt)) {
            amp[i] = -amp[i];
        }
    }
}

} // namespace

double StateVector::norm_sq() const {
    double s = 0.0;
    for (const cplx &a : amp) {
        s += std::norm(a);
    }
    return s;
}

StateVector init_zero(int num_qubits) {
    if (num_qubits < 1 || num_qubits > kMaxQubits) {
        throw ConfigError("qubit count " + std::to_string(num_qubits) +
                          " outside supported range [1, " +
                          std::to_string(kMaxQubits) + "]");
    }
    StateVector st;
    st.num_qubits = num_qubits;
    st.amp.assign(std::size_t{1} << num_qubits, cplx{0.0, 0.0});
    st.amp[0] = cplx{1.0, 0.0};
    return st;
}

StateVector from_amplitudes(int num_qubits, std::vector<cplx> amplitudes) {
    if (num_qubits < 1 || num_qubits > kMaxQubits) {
        throw ConfigError("qubit count " + std::to_string(num_qubits) +
                          " outside supported range [1, " +
                          std::to_string(kMaxQubits) + "]");
    }
    if (amplitudes.size() != (std::size_t{1} << num_qubits)) {
        throw ContractViolation("amplitude array length " +
                                std::to_string(amplitudes.size()) +
                                " does not match 2^" +
                                std::to_string(num_qubits));
    }
    StateVector st;
    st.num_qubits = num_qubits;
    st.amp = std::move(amplitudes);
    return st;
}

std::array<cplx, 4> gate_matrix(const Gate &g) {
    switch (g.kind) {
    case GateKind::RY: {
        const double c = std::cos(g.angle[0] / 2);
        const double s = std::sin(g.angle[0] / 2);
        return {cplx{c, 0}, cplx{-s, 0}, cplx{s, 0}, cplx{c, 0}};
    }
    case GateKind::RZ: {
        return {std::polar(1.0, -g.angle[0] / 2), cplx{0, 0}, cplx{0, 0},
                std::polar(1.0, g.angle[0] / 2)};
    }
    case GateKind::RotZYZ: {
        // RZ(omega) RY(theta) RZ(phi)
        const double phi = g.angle[0];
        const double theta = g.angle[1];
        const double omega = g.angle[2];
        const double c = std::cos(theta / 2);
        const double s = std::sin(theta / 2);
        return {std::polar(c, -(phi + omega) / 2),
                -std::polar(s, (phi - omega) / 2),
                std::polar(s, -(phi - omega) / 2),
                std::polar(c, (phi + omega) / 2)};
    }
    case GateKind::H: {
        const double r = 1.0 / std::sqrt(2.0);
        return {cplx{r, 0}, cplx{r, 0}, cplx{r, 0}, cplx{-r, 0}};
    }
    case GateKind::CZ:
        throw ContractViolation("CZ has no single-qubit matrix");
    }
    throw ContractViolation("unknown gate kind");
}

void apply_gate_buf(cplx *amp, int num_qubits, const Gate &g, bool adjoint) {
    check_qubit(g.target, num_qubits, "target");
    switch (g.kind) {
    case GateKind::RY:
        apply_ry(amp, num_qubits, g.target,
                 adjoint ? -g.angle[0] : g.angle[0]);
        return;
    case GateKind::RZ:
        apply_rz(amp, num_qubits, g.target,
                 adjoint ? -g.angle[0] : g.angle[0]);
        return;
    case GateKind::RotZYZ: {
        Gate inv = g;
        if (adjoint) {
            // (RZ(w) RY(t) RZ(p))^-1 = RZ(-p) RY(-t) RZ(-w)
            inv.angle = {-g.angle[2], -g.angle[1], -g.angle[0]};
        }
        apply_single_qubit(amp, num_qubits, g.target, gate_matrix(inv));
        return;
    }
    case GateKind::H:
        apply_single_qubit(amp, num_qubits, g.target, gate_matrix(g));
        return;
    case GateKind::CZ:
        check_qubit(g.control, num_qubits, "control");
        if (g.control == g.target) {
            throw ContractViolation("CZ control equals target");
        }
        apply_cz(amp, num_qubits, g.control, g.target); // self-inverse
        return;
    }
    throw ContractViolation("unknown gate kind");
}

void apply_gate(StateVector &state, const Gate &g) {
    apply_gate_buf(state.amp.data(), state.num_qubits, g, false);
}

void apply_gate_adjoint(StateVector &state, const Gate &g) {
    apply_gate_buf(state.amp.data(), state.num_qubits, g, true);
}

void apply_pauli_y(cplx *amp, int num_qubits, int target) {
    check_qubit(target, num_qubits, "target");
    const std::size_t size = std::size_t{1} << num_qubits;
    const std::size_t stride = stride_of(num_qubits, target);
    const cplx i{0.0, 1.0};
    for (std::size_t block = 0; block < size; block += 2 * stride) {
        for (std::size_t k = block; k < block + stride; ++k) {
            const cplx v0 = amp[k];
            const cplx v1 = amp[k + stride];
            amp[k] = -i * v1;
            amp[k + stride] = i * v0;
        }
    }
}

void apply_pauli_z(cplx *amp, int num_qubits, int target) {
    check_qubit(target, num_qubits, "target");
    const std::size_t size = std::size_t{1} << num_qubits;
    const std::size_t stride = stride_of(num_qubits, target);
    for (std::size_t block = 0; block < size; block += 2 * stride) {
        for (std::size_t k = block; k < block + stride; ++k) {
            amp[k + stride] = -amp[k + stride];
        }
    }
}

std::vector<double> probabilities(const StateVector &state) {
    std::vector<double> p(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        p[i] = std::norm(state.amp[i]);
    }
    return p;
}

std::vector<std::uint64_t> sample_shots(const StateVector &state,
                                        std::uint64_t num_shots,
                                        std::uint64_t seed) {
    if (num_shots < 1) {
        throw ContractViolation("num_shots must be >= 1");
    }
    const std::vector<double> p = probabilities(state);
    std::vector<double> cdf(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        cdf[i] = acc;
    }
    cdf.back() = std::max(cdf.back(), 1.0); // absorb rounding in the tail

    std::vector<std::uint64_t> counts(p.size(), 0);
    rng::Stream stream(seed);
    for (std::uint64_t s = 0; s < num_shots; ++s) {
        const double u = stream.next_unit();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t idx =
            std::min<std::size_t>(it - cdf.begin(), p.size() - 1);
        ++counts[idx];
    }
    return counts;
}

} // namespace qplr::sv
