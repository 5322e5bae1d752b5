#include "qplr/vqc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "qplr/errors.hpp"
#include "qplr/rng.hpp"

namespace qplr::vqc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kAngleSlack = 1e-9; // tolerate squash_to_angle rounding

} // namespace

std::string to_string(Encoding e) {
    return e == Encoding::Angle ? "angle" : "amplitude";
}
std::string to_string(Entanglement e) {
    switch (e) {
    case Entanglement::Linear: return "linear";
    case Entanglement::Ring: return "ring";
    case Entanglement::Full: return "full";
    }
    return "ring";
}
std::string to_string(Reduction r) {
    return r == Reduction::TruncateRenorm ? "truncate_renorm" : "post_network";
}
std::string to_string(Rotation r) {
    return r == Rotation::Ry ? "ry" : "rot_zyz";
}

Encoding encoding_from_string(const std::string &s) {
    if (s == "angle") return Encoding::Angle;
    if (s == "amplitude") return Encoding::Amplitude;
    throw ConfigError("unknown encoding: " + s);
}
Entanglement entanglement_from_string(const std::string &s) {
    if (s == "linear") return Entanglement::Linear;
    if (s == "ring") return Entanglement::Ring;
    if (s == "full") return Entanglement::Full;
    throw ConfigError("unknown entanglement: " + s);
}
Reduction reduction_from_string(const std::string &s) {
    if (s == "truncate_renorm") return Reduction::TruncateRenorm;
    if (s == "post_network") return Reduction::PostNetwork;
    throw ConfigError("unknown reduction: " + s);
}
Rotation rotation_from_string(const std::string &s) {
    if (s == "ry") return Rotation::Ry;
    if (s == "rot_zyz") return Rotation::RotZyz;
    throw ConfigError("unknown rotation: " + s);
}

double &CircuitSpec::theta_at(int layer, int qubit, int angle) {
    const std::size_t idx =
        (static_cast<std::size_t>(layer) * num_qubits + qubit) *
            angles_per_rotation() +
        angle;
    return theta.at(idx);
}

double CircuitSpec::theta_at(int layer, int qubit, int angle) const {
    const std::size_t idx =
        (static_cast<std::size_t>(layer) * num_qubits + qubit) *
            angles_per_rotation() +
        angle;
    return theta.at(idx);
}

void CircuitSpec::validate() const {
    if (num_qubits < 1 || num_qubits > 24)
        throw ConfigError("num_qubits must be in [1, 24], got " +
                          std::to_string(num_qubits));
    if (num_layers < 0)
        throw ConfigError("num_layers must be >= 0, got " +
                          std::to_string(num_layers));
    if (theta.size() != num_theta())
        throw ConfigError("theta has " + std::to_string(theta.size()) +
                          " entries, circuit needs " +
                          std::to_string(num_theta()));
    for (double t : theta)
        if (!std::isfinite(t))
            throw ConfigError("theta contains a non-finite value");
}

nlohmann::json CircuitSpec::to_json() const {
    // theta serializes as nested [layer][qubit] (scalar per qubit for RY,
    // a 3-array per qubit for ZYZ rotations).
    nlohmann::json layers = nlohmann::json::array();
    const int per_rot = angles_per_rotation();
    for (int l = 0; l < num_layers; ++l) {
        nlohmann::json row = nlohmann::json::array();
        for (int q = 0; q < num_qubits; ++q) {
            if (per_rot == 1) {
                row.push_back(theta_at(l, q));
            } else {
                row.push_back(nlohmann::json::array(
                    {theta_at(l, q, 0), theta_at(l, q, 1), theta_at(l, q, 2)}));
            }
        }
        layers.push_back(std::move(row));
    }
    return nlohmann::json{{"n", num_qubits},
                          {"encoding", to_string(encoding)},
                          {"layers", num_layers},
                          {"entanglement", to_string(entanglement)},
                          {"theta", layers},
                          {"reduction", to_string(reduction)},
                          {"rotation", to_string(rotation)}};
}

CircuitSpec CircuitSpec::from_json(const nlohmann::json &j) {
    CircuitSpec spec;
    try {
        spec.num_qubits = j.at("n").get<int>();
        spec.encoding = encoding_from_string(j.at("encoding").get<std::string>());
        spec.num_layers = j.at("layers").get<int>();
        spec.entanglement =
            entanglement_from_string(j.at("entanglement").get<std::string>());
        spec.reduction =
            reduction_from_string(j.at("reduction").get<std::string>());
        if (j.contains("rotation"))
            spec.rotation =
                rotation_from_string(j.at("rotation").get<std::string>());
        const auto &layers = j.at("theta");
        for (const auto &row : layers) {
            for (const auto &entry : row) {
                if (entry.is_array()) {
                    for (const auto &v : entry)
                        spec.theta.push_back(v.get<double>());
                } else {
                    spec.theta.push_back(entry.get<double>());
                }
            }
        }
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed circuit spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::string CircuitSpec::content_hash() const {
    const std::string canon = to_json().dump();
    const std::uint64_t h = rng::fnv1a64(canon.data(), canon.size());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::vector<std::pair<int, int>> entanglement_edges(Entanglement topology,
                                                    int n) {
    if (n < 2) throw ConfigError("entanglement_edges needs n >= 2");
    std::vector<std::pair<int, int>> edges;
    switch (topology) {
    case Entanglement::Linear:
        for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
        break;
    case Entanglement::Ring:
        for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
        edges.emplace_back(n - 1, 0);
        break;
    case Entanglement::Full:
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
        break;
    }
    return edges;
}

std::uint64_t nontrivial_entangled_subset_count(int n) {
    if (n < 0 || n > 63)
        throw ConfigError("subset count needs n in [0, 63]");
    return (std::uint64_t{1} << n) - static_cast<std::uint64_t>(n) - 1;
}

double squash_to_angle(double z) {
    return kPi / (1.0 + std::exp(-z));
}

EncodedInput encode(std::span<const double> input, const CircuitSpec &spec) {
    spec.validate();
    EncodedInput enc;
    enc.kind = spec.encoding;
    if (spec.encoding == Encoding::Angle) {
        if (input.size() != static_cast<std::size_t>(spec.num_qubits))
            throw ConfigError("angle encoding needs exactly " +
                              std::to_string(spec.num_qubits) +
                              " angles, got " + std::to_string(input.size()));
        for (double a : input) {
            if (!std::isfinite(a) || a < -kAngleSlack || a > kPi + kAngleSlack)
                throw ConfigError("encoding angle out of [0, pi]: " +
                                  std::to_string(a));
        }
        enc.angles.assign(input.begin(), input.end());
    } else {
        const std::size_t dim = spec.dim();
        if (input.empty() || input.size() > dim)
            throw ConfigError("amplitude encoding needs 1.." +
                              std::to_string(dim) + " values, got " +
                              std::to_string(input.size()));
        double norm_sq = 0.0;
        for (double v : input) {
            if (!std::isfinite(v))
                throw ConfigError("amplitude input contains a non-finite value");
            norm_sq += v * v;
        }
        if (norm_sq <= 0.0)
            throw DegenerateInputError("amplitude input is all-zero");
        const double inv = 1.0 / std::sqrt(norm_sq);
        enc.amplitudes.assign(dim, 0.0);
        for (std::size_t i = 0; i < input.size(); ++i)
            enc.amplitudes[i] = input[i] * inv;
    }
    return enc;
}

std::vector<CircuitOp> compile(const CircuitSpec &spec,
                               const EncodedInput &enc) {
    spec.validate();
    if (enc.kind != spec.encoding)
        throw ContractViolation("encoded input kind does not match circuit");
    std::vector<CircuitOp> ops;
    const int n = spec.num_qubits;

    if (spec.encoding == Encoding::Angle) {
        if (enc.angles.size() != static_cast<std::size_t>(n))
            throw ContractViolation("encoded angle count mismatch");
        for (int q = 0; q < n; ++q)
            ops.push_back({sv::Gate::ry(q, enc.angles[q]),
                           {ParamRef::Kind::Phi, q}});
    }

    const std::vector<std::pair<int, int>> edges =
        n >= 2 ? entanglement_edges(spec.entanglement, n)
               : std::vector<std::pair<int, int>>{};
    const int per_rot = spec.angles_per_rotation();
    for (int layer = 0; layer < spec.num_layers; ++layer) {
        for (int q = 0; q < n; ++q) {
            const int base = (layer * n + q) * per_rot;
            if (spec.rotation == Rotation::Ry) {
                ops.push_back({sv::Gate::ry(q, spec.theta[base]),
                               {ParamRef::Kind::Theta, base}});
            } else {
                // RotZYZ(phi, theta, omega) = RZ(omega) RY(theta) RZ(phi):
                // emit as single-angle gates so each is shift-differentiable.
                ops.push_back({sv::Gate::rz(q, spec.theta[base]),
                               {ParamRef::Kind::Theta, base}});
                ops.push_back({sv::Gate::ry(q, spec.theta[base + 1]),
                               {ParamRef::Kind::Theta, base + 1}});
                ops.push_back({sv::Gate::rz(q, spec.theta[base + 2]),
                               {ParamRef::Kind::Theta, base + 2}});
            }
        }
        for (auto [c, t] : edges)
            ops.push_back({sv::Gate::cz(c, t), {ParamRef::Kind::None, -1}});
    }
    return ops;
}

sv::StateVector initial_state(const CircuitSpec &spec,
                              const EncodedInput &enc) {
    if (spec.encoding == Encoding::Amplitude) {
        std::vector<sv::cplx> amps(enc.amplitudes.size());
        for (std::size_t i = 0; i < amps.size(); ++i)
            amps[i] = enc.amplitudes[i];
        return sv::from_amplitudes(spec.num_qubits, std::move(amps));
    }
    return sv::init_zero(spec.num_qubits);
}

sv::StateVector run(const CircuitSpec &spec, const EncodedInput &enc) {
    sv::StateVector state = initial_state(spec, enc);
    for (const CircuitOp &op : compile(spec, enc))
        sv::apply_gate(state, op.gate);
    return state;
}

std::vector<double> forward(const CircuitSpec &spec, const EncodedInput &enc) {
    return sv::probabilities(run(spec, enc));
}

ClassDistribution reduce_to_classes(std::span<const double> dist,
                                    int num_classes, Reduction mode) {
    if (num_classes < 1 ||
        static_cast<std::size_t>(num_classes) > dist.size())
        throw ConfigError("num_classes must be in [1, outcome count]");
    ClassDistribution out;
    out.probs.assign(dist.begin(), dist.begin() + num_classes);
    out.retained_mass =
        std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
    // PostNetwork callers consume the raw slice and its mass; only the
    // truncate path renormalizes here.
    if (mode == Reduction::TruncateRenorm) {
        if (out.retained_mass <= 0.0)
            throw DegenerateInputError(
                "no probability mass on the first " +
                std::to_string(num_classes) + " outcomes");
        for (double &p : out.probs) p /= out.retained_mass;
    }
    return out;
}

std::vector<double> measure_label_distribution(const CircuitSpec &spec,
                                               const EncodedInput &enc,
                                               int num_classes,
                                               std::uint64_t num_shots,
                                               std::uint64_t seed) {
    if (num_shots == 0) throw ConfigError("num_shots must be positive");
    const sv::StateVector state = run(spec, enc);
    const std::vector<std::uint64_t> counts =
        sv::sample_shots(state, num_shots, seed);
    if (num_classes < 1 ||
        static_cast<std::size_t>(num_classes) > counts.size())
        throw ConfigError("num_classes must be in [1, outcome count]");
    std::uint64_t kept = 0;
    for (int k = 0; k < num_classes; ++k) kept += counts[k];
    if (kept == 0)
        throw DegenerateInputError(
            "no shots landed on the first " + std::to_string(num_classes) +
            " outcomes");
    std::vector<double> probs(num_classes, 0.0);
    for (int k = 0; k < num_classes; ++k)
        probs[k] = static_cast<double>(counts[k]) / static_cast<double>(kept);
    return probs;
}

} // namespace qplr::vqc
