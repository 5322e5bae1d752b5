#include <doctest.h>

#include <cmath>
#include <vector>

#include "qplr/errors.hpp"
#include "qplr/qgrad.hpp"
#include "qplr/rng.hpp"
#include "qplr/vqc.hpp"

using namespace qplr;
using qgrad::QuantumJacobian;
using vqc::CircuitSpec;
using vqc::EncodedInput;

namespace {

constexpr double kPi = 3.14159265358979323846;

CircuitSpec random_spec(rng::Stream &stream, int n, int layers,
                        vqc::Rotation rot = vqc::Rotation::Ry) {
    CircuitSpec spec;
    spec.num_qubits = n;
    spec.num_layers = layers;
    spec.encoding = vqc::Encoding::Angle;
    spec.entanglement = static_cast<vqc::Entanglement>(stream.next_below(3));
    spec.rotation = rot;
    spec.theta.resize(spec.num_theta());
    for (double &t : spec.theta) t = stream.next_uniform(-kPi, kPi);
    return spec;
}

EncodedInput random_angles(rng::Stream &stream, const CircuitSpec &spec) {
    std::vector<double> raw(spec.num_qubits);
    for (double &a : raw) a = stream.next_uniform(0.1, kPi - 0.1);
    return vqc::encode(raw, spec);
}

double max_abs_diff(const std::vector<double> &a,
                    const std::vector<double> &b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

} // namespace

TEST_CASE("single-qubit RY derivative matches the analytic formula") {
    CircuitSpec spec;
    spec.num_qubits = 1;
    spec.num_layers = 1;
    spec.theta = {kPi / 2.0};
    const EncodedInput enc = vqc::encode(std::vector<double>{0.0}, spec);

    const QuantumJacobian jac = qgrad::parameter_shift_jacobian(spec, enc);
    REQUIRE(jac.num_classes == 2);
    REQUIRE(jac.num_theta == 1);
    // P(1) = sin^2(theta/2), dP(1)/dtheta = sin(theta)/2.
    CHECK(jac.theta_entry(1, 0) ==
          doctest::Approx(0.5 * std::sin(kPi / 2.0)).epsilon(1e-12));
    CHECK(jac.theta_entry(0, 0) ==
          doctest::Approx(-0.5 * std::sin(kPi / 2.0)).epsilon(1e-12));
}

TEST_CASE("jacobian rows sum to zero over classes") {
    rng::Stream stream(53);
    const CircuitSpec spec = random_spec(stream, 4, 2);
    const EncodedInput enc = random_angles(stream, spec);
    for (int num_classes : {0, 10}) {
        const QuantumJacobian jac =
            qgrad::parameter_shift_jacobian(spec, enc, num_classes);
        for (int p = 0; p < jac.num_theta; ++p) {
            double sum = 0.0;
            for (int k = 0; k < jac.num_classes; ++k)
                sum += jac.theta_entry(k, p);
            CHECK(std::abs(sum) < 1e-8);
        }
        for (int p = 0; p < jac.num_phi; ++p) {
            double sum = 0.0;
            for (int k = 0; k < jac.num_classes; ++k)
                sum += jac.phi_entry(k, p);
            CHECK(std::abs(sum) < 1e-8);
        }
    }
}

TEST_CASE("parameter shift matches central finite differences") {
    rng::Stream stream(59);
    const CircuitSpec spec = random_spec(stream, 4, 2);
    const EncodedInput enc = random_angles(stream, spec);
    const QuantumJacobian shift = qgrad::parameter_shift_jacobian(spec, enc);
    const QuantumJacobian fd =
        qgrad::finite_difference_jacobian(spec, enc, 1e-5);
    CHECK(max_abs_diff(shift.d_theta, fd.d_theta) < 1e-6);
    CHECK(max_abs_diff(shift.d_phi, fd.d_phi) < 1e-6);
}

TEST_CASE("finite differences converge at second order") {
    rng::Stream stream(61);
    const CircuitSpec spec = random_spec(stream, 3, 2);
    const EncodedInput enc = random_angles(stream, spec);
    const QuantumJacobian exact = qgrad::parameter_shift_jacobian(spec, enc);
    const QuantumJacobian coarse =
        qgrad::finite_difference_jacobian(spec, enc, 1e-3);
    const QuantumJacobian fine =
        qgrad::finite_difference_jacobian(spec, enc, 1e-5);
    const double err_coarse = max_abs_diff(exact.d_theta, coarse.d_theta);
    const double err_fine = max_abs_diff(exact.d_theta, fine.d_theta);
    // Central differences are O(h^2): a 100x smaller h should cut the error
    // by far more than 100x (allow slack for float round-off).
    CHECK(err_fine < err_coarse / 100.0);

    const QuantumJacobian again =
        qgrad::finite_difference_jacobian(spec, enc, 1e-5);
    CHECK(fine.d_theta == again.d_theta);

    CHECK_THROWS_AS(qgrad::finite_difference_jacobian(spec, enc, 1e-8),
                    ConfigError);
    CHECK_THROWS_AS(qgrad::finite_difference_jacobian(spec, enc, 1e-2),
                    ConfigError);
}

TEST_CASE("adjoint agrees with parameter shift on 100 random specs") {
    rng::Stream stream(67);
    for (int trial = 0; trial < 100; ++trial) {
        const int layers = 1 + static_cast<int>(stream.next_below(3));
        const CircuitSpec spec = random_spec(stream, 4, layers);
        const EncodedInput enc = random_angles(stream, spec);
        const QuantumJacobian shift =
            qgrad::parameter_shift_jacobian(spec, enc);
        const QuantumJacobian adj = qgrad::adjoint_jacobian(spec, enc);
        CHECK(max_abs_diff(shift.d_theta, adj.d_theta) < 1e-10);
        CHECK(max_abs_diff(shift.d_phi, adj.d_phi) < 1e-10);
    }
}

TEST_CASE("adjoint handles the three-angle rotation variant") {
    rng::Stream stream(71);
    const CircuitSpec spec =
        random_spec(stream, 3, 2, vqc::Rotation::RotZyz);
    REQUIRE(spec.num_theta() == 3u * 3 * 2);
    const EncodedInput enc = random_angles(stream, spec);
    const QuantumJacobian shift = qgrad::parameter_shift_jacobian(spec, enc);
    const QuantumJacobian adj = qgrad::adjoint_jacobian(spec, enc);
    const QuantumJacobian fd =
        qgrad::finite_difference_jacobian(spec, enc, 1e-5);
    CHECK(max_abs_diff(shift.d_theta, adj.d_theta) < 1e-10);
    CHECK(max_abs_diff(shift.d_theta, fd.d_theta) < 1e-6);
}

TEST_CASE("zero-layer circuit differentiates only encoding angles") {
    rng::Stream stream(73);
    const CircuitSpec spec = random_spec(stream, 4, 0);
    const EncodedInput enc = random_angles(stream, spec);
    const QuantumJacobian adj = qgrad::adjoint_jacobian(spec, enc);
    CHECK(adj.d_theta.empty());
    REQUIRE(adj.num_phi == 4);
    const QuantumJacobian shift = qgrad::parameter_shift_jacobian(spec, enc);
    CHECK(max_abs_diff(shift.d_phi, adj.d_phi) < 1e-10);
}

TEST_CASE("all-zero angles sit at a stationary point of P(0)") {
    CircuitSpec spec;
    spec.num_qubits = 4;
    spec.num_layers = 2;
    spec.entanglement = vqc::Entanglement::Ring;
    spec.theta.assign(spec.num_theta(), 0.0);
    const EncodedInput enc = vqc::encode(std::vector<double>(4, 0.0), spec);

    const auto probs = vqc::forward(spec, enc);
    CHECK(probs[0] == doctest::Approx(1.0).epsilon(1e-12));

    const QuantumJacobian adj = qgrad::adjoint_jacobian(spec, enc);
    for (int p = 0; p < adj.num_theta; ++p)
        CHECK(std::abs(adj.theta_entry(0, p)) < 1e-12);
    for (int p = 0; p < adj.num_phi; ++p)
        CHECK(std::abs(adj.phi_entry(0, p)) < 1e-12);
}

TEST_CASE("class-reduced jacobian matches direct differences of the "
          "reduced distribution") {
    rng::Stream stream(79);
    const CircuitSpec spec = random_spec(stream, 4, 2);
    const EncodedInput enc = random_angles(stream, spec);
    const int K = 10;
    const QuantumJacobian shift =
        qgrad::parameter_shift_jacobian(spec, enc, K);
    const QuantumJacobian adj = qgrad::adjoint_jacobian(spec, enc, K);
    CHECK(max_abs_diff(shift.d_theta, adj.d_theta) < 1e-10);

    // Independent oracle: finite differences computed on the reduced
    // distribution itself, not chain-ruled from raw outcomes.
    const double h = 1e-5;
    for (int p = 0; p < shift.num_theta; ++p) {
        CircuitSpec plus = spec, minus = spec;
        plus.theta[p] += h;
        minus.theta[p] -= h;
        const auto dist_plus = vqc::reduce_to_classes(
            vqc::forward(plus, enc), K, vqc::Reduction::TruncateRenorm);
        const auto dist_minus = vqc::reduce_to_classes(
            vqc::forward(minus, enc), K, vqc::Reduction::TruncateRenorm);
        for (int k = 0; k < K; ++k) {
            const double fd =
                (dist_plus.probs[k] - dist_minus.probs[k]) / (2.0 * h);
            CHECK(shift.theta_entry(k, p) == doctest::Approx(fd).epsilon(1e-4));
            CHECK(std::abs(shift.theta_entry(k, p) - fd) < 1e-6);
        }
    }
}

TEST_CASE("assembled cross-entropy gradient matches scalar finite "
          "differences") {
    rng::Stream stream(83);
    const CircuitSpec spec = random_spec(stream, 4, 2);
    const EncodedInput enc = random_angles(stream, spec);
    const int K = 10;

    std::vector<double> target(K, 0.0);
    target[static_cast<std::size_t>(stream.next_below(K))] = 1.0;

    auto loss_of = [&](const CircuitSpec &s) {
        const auto dist = vqc::reduce_to_classes(
            vqc::forward(s, enc), K, vqc::Reduction::TruncateRenorm);
        double loss = 0.0;
        for (int k = 0; k < K; ++k)
            if (target[k] > 0.0) loss -= target[k] * std::log(dist.probs[k]);
        return loss;
    };

    const auto dist = vqc::reduce_to_classes(
        vqc::forward(spec, enc), K, vqc::Reduction::TruncateRenorm);
    const QuantumJacobian jac = qgrad::adjoint_jacobian(spec, enc, K);

    const double h = 1e-5;
    for (int p = 0; p < jac.num_theta; ++p) {
        double grad = 0.0;
        for (int k = 0; k < K; ++k)
            if (target[k] > 0.0)
                grad -= target[k] / dist.probs[k] * jac.theta_entry(k, p);
        CircuitSpec plus = spec, minus = spec;
        plus.theta[p] += h;
        minus.theta[p] -= h;
        const double fd = (loss_of(plus) - loss_of(minus)) / (2.0 * h);
        const double scale = std::max(1.0, std::abs(fd));
        CHECK(std::abs(grad - fd) / scale < 1e-5);
    }
}

TEST_CASE("adjoint VJP equals the weighted jacobian contraction") {
    rng::Stream stream(89);
    for (int trial = 0; trial < 10; ++trial) {
        const CircuitSpec spec = random_spec(stream, 4, 2);
        const EncodedInput enc = random_angles(stream, spec);
        const std::size_t dim = spec.dim();
        std::vector<double> w(dim);
        for (double &x : w) x = stream.next_normal();

        const qgrad::QuantumVjp vjp = qgrad::adjoint_vjp(spec, enc, w);
        const QuantumJacobian jac = qgrad::adjoint_jacobian(spec, enc);
        REQUIRE(vjp.d_theta.size() == static_cast<std::size_t>(jac.num_theta));

        for (int p = 0; p < jac.num_theta; ++p) {
            double want = 0.0;
            for (std::size_t y = 0; y < dim; ++y)
                want += w[y] * jac.theta_entry(static_cast<int>(y), p);
            CHECK(vjp.d_theta[p] == doctest::Approx(want).epsilon(1e-9));
        }
        for (int p = 0; p < jac.num_phi; ++p) {
            double want = 0.0;
            for (std::size_t y = 0; y < dim; ++y)
                want += w[y] * jac.phi_entry(static_cast<int>(y), p);
            CHECK(vjp.d_phi[p] == doctest::Approx(want).epsilon(1e-9));
        }
    }
}

TEST_CASE("amplitude-encoded circuits have no encoding gradient") {
    rng::Stream stream(97);
    CircuitSpec spec = random_spec(stream, 3, 2);
    spec.encoding = vqc::Encoding::Amplitude;
    std::vector<double> raw(8);
    for (double &v : raw) v = stream.next_uniform(0.1, 1.0);
    const EncodedInput enc = vqc::encode(raw, spec);

    const QuantumJacobian adj = qgrad::adjoint_jacobian(spec, enc);
    CHECK(adj.num_phi == 0);
    CHECK(adj.d_phi.empty());
    const QuantumJacobian shift = qgrad::parameter_shift_jacobian(spec, enc);
    CHECK(max_abs_diff(shift.d_theta, adj.d_theta) < 1e-10);
}
