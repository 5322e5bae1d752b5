#include "qplr/qgrad.hpp"

#include <cmath>
#include <cstring>

#include "qplr/errors.hpp"

namespace qplr::qgrad {

namespace {

constexpr double kHalfPi = 1.57079632679489661923;

std::vector<double> run_ops(const vqc::CircuitSpec &spec,
                            const vqc::EncodedInput &enc,
                            const std::vector<vqc::CircuitOp> &ops) {
    sv::StateVector state = vqc::initial_state(spec, enc);
    for (const vqc::CircuitOp &op : ops) sv::apply_gate(state, op.gate);
    return sv::probabilities(state);
}

/// Raw outcome probabilities with one parameter's angle displaced. Works on
/// the compiled op list so shifted encoding angles may leave [0, pi].
std::vector<double> run_displaced(const vqc::CircuitSpec &spec,
                                  const vqc::EncodedInput &enc,
                                  std::vector<vqc::CircuitOp> ops,
                                  vqc::ParamRef::Kind kind, int index,
                                  double delta) {
    bool found = false;
    for (vqc::CircuitOp &op : ops) {
        if (op.ref.kind == kind && op.ref.index == index) {
            op.gate.angle[0] += delta;
            found = true;
        }
    }
    if (!found) throw ContractViolation("displaced parameter not in circuit");
    return run_ops(spec, enc, ops);
}

struct ParamLayout {
    int num_theta = 0;
    int num_phi = 0;
};

ParamLayout layout_of(const vqc::CircuitSpec &spec) {
    ParamLayout layout;
    layout.num_theta = static_cast<int>(spec.num_theta());
    layout.num_phi =
        spec.encoding == vqc::Encoding::Angle ? spec.num_qubits : 0;
    return layout;
}

/// Chain rule through truncate-renorm: P_k = p_k / S with S the mass on the
/// first K outcomes, so dP_k = (dp_k - P_k * sum_{j<K} dp_j) / S.
void reduce_column(std::span<const double> raw_col,
                   std::span<const double> raw_probs, int num_classes,
                   double mass, double *out, int stride) {
    double window_sum = 0.0;
    for (int k = 0; k < num_classes; ++k) window_sum += raw_col[k];
    for (int k = 0; k < num_classes; ++k) {
        const double class_p = raw_probs[k] / mass;
        out[static_cast<std::size_t>(k) * stride] =
            (raw_col[k] - class_p * window_sum) / mass;
    }
}

/// Shared assembly for the two-evaluation methods: fills a QuantumJacobian
/// from a per-parameter evaluator yielding the raw 2^n derivative column.
template <typename ColumnFn>
QuantumJacobian assemble(const vqc::CircuitSpec &spec,
                         const vqc::EncodedInput &enc, int num_classes,
                         ColumnFn &&column_of) {
    spec.validate();
    const std::size_t dim = spec.dim();
    if (num_classes < 0 || static_cast<std::size_t>(num_classes) > dim)
        throw ConfigError("num_classes must be in [0, 2^n]");
    const bool reduce = num_classes != 0 &&
                        static_cast<std::size_t>(num_classes) < dim;
    const int rows = num_classes == 0 ? static_cast<int>(dim) : num_classes;

    const ParamLayout layout = layout_of(spec);
    QuantumJacobian jac;
    jac.num_classes = rows;
    jac.num_theta = layout.num_theta;
    jac.num_phi = layout.num_phi;
    jac.d_theta.assign(static_cast<std::size_t>(rows) * layout.num_theta, 0.0);
    jac.d_phi.assign(static_cast<std::size_t>(rows) * layout.num_phi, 0.0);

    double mass = 1.0;
    std::vector<double> raw_probs;
    if (reduce) {
        raw_probs = vqc::forward(spec, enc);
        mass = 0.0;
        for (int k = 0; k < num_classes; ++k) mass += raw_probs[k];
        if (mass <= 0.0)
            throw DegenerateInputError(
                "no probability mass on the class window");
    }

    auto emit = [&](vqc::ParamRef::Kind kind, int param, double *dst,
                    int stride) {
        const std::vector<double> col = column_of(kind, param);
        if (reduce) {
            reduce_column(col, raw_probs, num_classes, mass, dst, stride);
        } else {
            for (int k = 0; k < rows; ++k)
                dst[static_cast<std::size_t>(k) * stride] = col[k];
        }
    };

    for (int p = 0; p < layout.num_theta; ++p)
        emit(vqc::ParamRef::Kind::Theta, p, jac.d_theta.data() + p,
             layout.num_theta);
    for (int p = 0; p < layout.num_phi; ++p)
        emit(vqc::ParamRef::Kind::Phi, p, jac.d_phi.data() + p,
             layout.num_phi);
    return jac;
}

/// Where one adjoint-sweep column's derivatives land: row `row` of two
/// row-major blocks, one per parameter family.
struct GradSink {
    double *theta = nullptr;
    double *phi = nullptr;
    int theta_stride = 0;
    int phi_stride = 0;
    int row = 0;

    void add(vqc::ParamRef ref, double value) const {
        if (ref.kind == vqc::ParamRef::Kind::Theta) {
            theta[static_cast<std::size_t>(row) * theta_stride + ref.index] +=
                value;
        } else if (phi != nullptr) {
            phi[static_cast<std::size_t>(row) * phi_stride + ref.index] +=
                value;
        }
    }
};

/// Reverse sweep shared by adjoint_jacobian and adjoint_vjp. phi rewinds the
/// forward state gate by gate; each obs column back-propagates a weighted
/// projector through the same gates. For U = exp(-i angle G / 2) the
/// derivative of an outcome probability is Im <obs_col | G | state>, the
/// -i/2 prefactor being absorbed by taking the imaginary part.
void adjoint_sweep(const vqc::CircuitSpec &spec, const vqc::EncodedInput &enc,
                   std::vector<std::vector<sv::cplx>> &obs_cols,
                   const std::vector<GradSink> &sinks) {
    const std::vector<vqc::CircuitOp> ops = vqc::compile(spec, enc);
    sv::StateVector state = vqc::initial_state(spec, enc);
    for (const vqc::CircuitOp &op : ops) sv::apply_gate(state, op.gate);

    const int n = spec.num_qubits;
    const std::size_t dim = state.size();
    std::vector<sv::cplx> mu(dim);

    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        const vqc::CircuitOp &op = *it;
        if (op.ref.kind != vqc::ParamRef::Kind::None) {
            std::memcpy(mu.data(), state.amp.data(), dim * sizeof(sv::cplx));
            if (op.gate.kind == sv::GateKind::RY)
                sv::apply_pauli_y(mu.data(), n, op.gate.target);
            else if (op.gate.kind == sv::GateKind::RZ)
                sv::apply_pauli_z(mu.data(), n, op.gate.target);
            else
                throw ContractViolation(
                    "adjoint sweep hit a non-shiftable parameterized gate");

            for (std::size_t c = 0; c < obs_cols.size(); ++c) {
                double im = 0.0;
                const sv::cplx *col = obs_cols[c].data();
                for (std::size_t x = 0; x < dim; ++x)
                    im += (std::conj(col[x]) * mu[x]).imag();
                sinks[c].add(op.ref, im);
            }
        }
        sv::apply_gate_adjoint(state, op.gate);
        for (auto &col : obs_cols)
            sv::apply_gate_buf(col.data(), n, op.gate, /*adjoint=*/true);
    }
}

} // namespace

QuantumJacobian parameter_shift_jacobian(const vqc::CircuitSpec &spec,
                                         const vqc::EncodedInput &enc,
                                         int num_classes) {
    const std::vector<vqc::CircuitOp> ops = vqc::compile(spec, enc);
    return assemble(spec, enc, num_classes,
                    [&](vqc::ParamRef::Kind kind, int param) {
                        std::vector<double> plus = run_displaced(
                            spec, enc, ops, kind, param, kHalfPi);
                        const std::vector<double> minus = run_displaced(
                            spec, enc, ops, kind, param, -kHalfPi);
                        for (std::size_t i = 0; i < plus.size(); ++i)
                            plus[i] = 0.5 * (plus[i] - minus[i]);
                        return plus;
                    });
}

QuantumJacobian finite_difference_jacobian(const vqc::CircuitSpec &spec,
                                           const vqc::EncodedInput &enc,
                                           double h, int num_classes) {
    if (!(h >= 1e-7 && h <= 1e-3))
        throw ConfigError("finite-difference step must be in [1e-7, 1e-3]");
    const std::vector<vqc::CircuitOp> ops = vqc::compile(spec, enc);
    return assemble(spec, enc, num_classes,
                    [&](vqc::ParamRef::Kind kind, int param) {
                        std::vector<double> plus =
                            run_displaced(spec, enc, ops, kind, param, h);
                        const std::vector<double> minus =
                            run_displaced(spec, enc, ops, kind, param, -h);
                        for (std::size_t i = 0; i < plus.size(); ++i)
                            plus[i] = (plus[i] - minus[i]) / (2.0 * h);
                        return plus;
                    });
}

QuantumJacobian adjoint_jacobian(const vqc::CircuitSpec &spec,
                                 const vqc::EncodedInput &enc,
                                 int num_classes) {
    spec.validate();
    const std::size_t dim = spec.dim();
    if (num_classes < 0 || static_cast<std::size_t>(num_classes) > dim)
        throw ConfigError("num_classes must be in [0, 2^n]");
    const bool reduce = num_classes != 0 &&
                        static_cast<std::size_t>(num_classes) < dim;
    const std::size_t tracked = num_classes == 0
                                    ? dim
                                    : static_cast<std::size_t>(num_classes);

    const ParamLayout layout = layout_of(spec);
    QuantumJacobian jac;
    jac.num_classes = static_cast<int>(tracked);
    jac.num_theta = layout.num_theta;
    jac.num_phi = layout.num_phi;
    jac.d_theta.assign(tracked * layout.num_theta, 0.0);
    jac.d_phi.assign(tracked * layout.num_phi, 0.0);

    const sv::StateVector final_state = vqc::run(spec, enc);
    // Column y starts as amp_y |y>: back-propagating it yields the raw
    // derivative of |<y|psi>|^2 for that outcome.
    std::vector<std::vector<sv::cplx>> obs_cols(tracked);
    std::vector<GradSink> sinks(tracked);
    for (std::size_t y = 0; y < tracked; ++y) {
        obs_cols[y].assign(dim, sv::cplx{0.0, 0.0});
        obs_cols[y][y] = final_state.amp[y];
        sinks[y] = GradSink{jac.d_theta.data(),
                            jac.d_phi.empty() ? nullptr : jac.d_phi.data(),
                            layout.num_theta, layout.num_phi,
                            static_cast<int>(y)};
    }
    adjoint_sweep(spec, enc, obs_cols, sinks);

    if (reduce) {
        const std::vector<double> raw_probs = sv::probabilities(final_state);
        double mass = 0.0;
        for (int k = 0; k < num_classes; ++k) mass += raw_probs[k];
        if (mass <= 0.0)
            throw DegenerateInputError(
                "no probability mass on the class window");
        auto reduce_block = [&](std::vector<double> &block, int cols) {
            std::vector<double> col(tracked);
            for (int p = 0; p < cols; ++p) {
                for (std::size_t k = 0; k < tracked; ++k)
                    col[k] = block[k * cols + p];
                reduce_column(col, raw_probs, num_classes, mass,
                              block.data() + p, cols);
            }
        };
        reduce_block(jac.d_theta, jac.num_theta);
        reduce_block(jac.d_phi, jac.num_phi);
    }
    return jac;
}

QuantumVjp adjoint_vjp(const vqc::CircuitSpec &spec,
                       const vqc::EncodedInput &enc,
                       std::span<const double> outcome_grad) {
    spec.validate();
    const std::size_t dim = spec.dim();
    if (outcome_grad.size() != dim)
        throw ContractViolation("outcome_grad length must be 2^n");

    const ParamLayout layout = layout_of(spec);
    QuantumVjp vjp;
    vjp.d_theta.assign(layout.num_theta, 0.0);
    vjp.d_phi.assign(layout.num_phi, 0.0);
    if (layout.num_theta == 0 && layout.num_phi == 0) return vjp;

    const sv::StateVector final_state = vqc::run(spec, enc);
    // Single combined column sum_y w_y amp_y |y> computes the full
    // weighted-derivative sum in one sweep.
    std::vector<std::vector<sv::cplx>> obs_cols(1);
    obs_cols[0].assign(dim, sv::cplx{0.0, 0.0});
    for (std::size_t y = 0; y < dim; ++y)
        obs_cols[0][y] = outcome_grad[y] * final_state.amp[y];

    std::vector<GradSink> sinks(1);
    sinks[0] = GradSink{vjp.d_theta.data(),
                        vjp.d_phi.empty() ? nullptr : vjp.d_phi.data(),
                        layout.num_theta, layout.num_phi, 0};
    adjoint_sweep(spec, enc, obs_cols, sinks);
    return vjp;
}

} // namespace qplr::qgrad
