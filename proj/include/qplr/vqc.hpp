#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qplr/statevec.hpp"

namespace qplr::vqc {

enum class Encoding { Angle, Amplitude };
enum class Entanglement { Linear, Ring, Full };
enum class Reduction { TruncateRenorm, PostNetwork };
/// Variational rotation family: one RY per qubit per layer (default), or a
/// full three-angle ZYZ Euler rotation for configuration sweeps.
enum class Rotation { Ry, RotZyz };

std::string to_string(Encoding e);
std::string to_string(Entanglement e);
std::string to_string(Reduction r);
std::string to_string(Rotation r);
Encoding encoding_from_string(const std::string &s);
Entanglement entanglement_from_string(const std::string &s);
Reduction reduction_from_string(const std::string &s);
Rotation rotation_from_string(const std::string &s);

/// Full description of the variational circuit: encoding, layer structure,
/// entanglement topology and the trainable angles theta.
struct CircuitSpec {
    int num_qubits = 0;
    Encoding encoding = Encoding::Angle;
    int num_layers = 0;
    Entanglement entanglement = Entanglement::Ring;
    Reduction reduction = Reduction::PostNetwork;
    Rotation rotation = Rotation::Ry;
    /// Flattened [layer][qubit][angle], radians.
    std::vector<double> theta;

    int angles_per_rotation() const { return rotation == Rotation::Ry ? 1 : 3; }
    std::size_t num_theta() const {
        return static_cast<std::size_t>(num_layers) * num_qubits *
               angles_per_rotation();
    }
    double &theta_at(int layer, int qubit, int angle = 0);
    double theta_at(int layer, int qubit, int angle = 0) const;

    void validate() const;
    std::size_t dim() const { return std::size_t{1} << num_qubits; }

    nlohmann::json to_json() const;
    static CircuitSpec from_json(const nlohmann::json &j);
    /// FNV-1a over the canonical JSON serialization, 16 hex chars.
    std::string content_hash() const;
};

/// CZ edge list for a topology. Linear: (0,1)..(n-2,n-1); Ring adds
/// (n-1,0); Full: all i<j in lexicographic order.
std::vector<std::pair<int, int>> entanglement_edges(Entanglement topology,
                                                    int n);

/// Count of non-trivial entangled qubit subsets, 2^n - n - 1 (subsets of
/// size >= 2). n=10 gives 1013.
std::uint64_t nontrivial_entangled_subset_count(int n);

/// Map an unbounded pre-network output into the [0, pi] encoding range.
double squash_to_angle(double z);

struct EncodedInput {
    Encoding kind = Encoding::Angle;
    std::vector<double> angles;     // Angle: length n, each in [0, pi]
    std::vector<double> amplitudes; // Amplitude: length 2^n, unit L2 norm
};

/// Validate and package a classical input for the circuit. Angle inputs are
/// the pre-network outputs already squashed into [0, pi]; amplitude inputs
/// are zero-padded to 2^n and L2-normalized.
EncodedInput encode(std::span<const double> input, const CircuitSpec &spec);

/// Which trainable parameter a compiled gate's angle came from.
struct ParamRef {
    enum class Kind { None, Theta, Phi };
    Kind kind = Kind::None;
    int index = -1; // flattened theta index, or encoding-angle index
};

struct CircuitOp {
    sv::Gate gate;
    ParamRef ref;
};

/// Flatten the circuit to a gate sequence with parameter provenance.
/// Amplitude encoding contributes no gates (the run starts from the encoded
/// state); three-angle rotations are emitted as RZ/RY/RZ so every trainable
/// gate is a single-angle rotation.
std::vector<CircuitOp> compile(const CircuitSpec &spec,
                               const EncodedInput &enc);

/// Starting state for a compiled circuit (|0...0> or the encoded amplitudes).
sv::StateVector initial_state(const CircuitSpec &spec, const EncodedInput &enc);

/// Final state U(theta) V(x) |0...0>.
sv::StateVector run(const CircuitSpec &spec, const EncodedInput &enc);

/// Exact Born-rule outcome distribution of length 2^n.
std::vector<double> forward(const CircuitSpec &spec, const EncodedInput &enc);

/// Class distribution produced from the 2^n outcome distribution.
/// retained_mass is the probability mass on outcomes 0..K-1 before
/// renormalization.
struct ClassDistribution {
    std::vector<double> probs;
    double retained_mass = 0.0;
};

ClassDistribution reduce_to_classes(std::span<const double> dist,
                                    int num_classes, Reduction mode);

/// Shot-sampled class distribution: counts over 2^n outcomes reduced to the
/// first num_classes and renormalized.
std::vector<double> measure_label_distribution(const CircuitSpec &spec,
                                               const EncodedInput &enc,
                                               int num_classes,
                                               std::uint64_t num_shots,
                                               std::uint64_t seed);

} // namespace qplr::vqc
