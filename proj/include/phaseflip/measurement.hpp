#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "phaseflip/fock.hpp"
#include "phaseflip/pulse.hpp"
#include "phaseflip/rng.hpp"

namespace phaseflip::measurement {

struct VerificationOutcome {
    enum class Kind { state_fidelity, photon_number };
    bool passed = false;
    int pulse_index = -1;
    Kind kind = Kind::state_fidelity;
};

/// Binary discrimination at a given error probability: returns true_bit
/// with probability 1 - error_prob, the flipped bit otherwise.
inline int discriminate(int true_bit, double error_prob, RngStream& rng) {
    if (true_bit != 0 && true_bit != 1) throw std::invalid_argument("discriminate: bit must be 0 or 1");
    if (!(error_prob >= 0.0 && error_prob <= 0.5)) throw std::invalid_argument("discriminate: error_prob must be in [0, 0.5]");
    return rng.bernoulli(error_prob) ? 1 - true_bit : true_bit;
}

/// Probability that the optimal two-state measurement for the basis pair
/// {Psi(0), Psi(pi)} reads bit 1 when the incoming state sits at phase
/// offset `delta` from the bit-0 state:
///
///   P(1 | delta) = (1 - [F(delta) - F(delta - pi)] / sqrt(1 - F(pi))) / 2
///
/// with F the coherent-state fidelity at intensity mean_n. At delta = 0 or
/// pi this reduces exactly to the Helstrom error for fidelity F(pi); in
/// between it interpolates the readout of mis-phased (tampered or
/// wrong-basis) pulses.
inline double basis_readout_one_prob(double mean_n, double delta) {
    if (!(mean_n > 0.0)) throw std::invalid_argument("basis_readout_one_prob: mean_n must be positive");
    // expm1 keeps the 0/0 limit stable as mean_n -> 0 (ratio -> 0, P -> 1/2)
    const double num = std::expm1(fock::log_fidelity(mean_n, delta)) -
                       std::expm1(fock::log_fidelity(mean_n, delta - std::numbers::pi));
    const double den = std::sqrt(-std::expm1(-4.0 * mean_n));
    return std::clamp(0.5 * (1.0 - num / den), 0.0, 1.0);
}

/// Measure a pulse at offset delta from the bit-0 phase of its basis.
inline int read_bit_in_basis(double mean_n, double delta, RngStream& rng) {
    return rng.bernoulli(basis_readout_one_prob(mean_n, delta)) ? 1 : 0;
}

namespace detail {

// Inverse transform by sequential search; exact and O(mean_n).
inline long poisson_small(double mean_n, RngStream& rng) {
    const double u = rng.uniform();
    double p = std::exp(-mean_n);
    double cum = p;
    long k = 0;
    while (u >= cum) {
        ++k;
        p *= mean_n / static_cast<double>(k);
        cum += p;
        if (k > 10'000) break; // cum has saturated within double precision
    }
    return k;
}

// Hoermann's PTRS transformed rejection, the standard sampler for large
// means. Consumes a variable but deterministic number of uniforms.
inline long poisson_ptrs(double mean_n, RngStream& rng) {
    const double slam = std::sqrt(mean_n);
    const double loglam = std::log(mean_n);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + mean_n + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        const double k = kf;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * loglam - mean_n - std::lgamma(k + 1.0)) {
            return static_cast<long>(kf);
        }
    }
}

} // namespace detail

/// One photon-counting measurement: a Poisson(mean_n) draw.
inline long sample_photon_count(double mean_n, RngStream& rng) {
    if (!(mean_n > 0.0)) throw std::invalid_argument("sample_photon_count: mean_n must be positive");
    return mean_n < 30.0 ? detail::poisson_small(mean_n, rng) : detail::poisson_ptrs(mean_n, rng);
}

/// P(X <= k) for X ~ Poisson(mean), exact for any mean via the regularized
/// incomplete gamma function.
inline double poisson_cdf(long k, double mean) {
    if (k < 0) return 0.0;
    return boost::math::gamma_q(static_cast<double>(k) + 1.0, mean);
}

/// Two-sided p-value for observing `total` under X ~ Poisson(null_mean).
inline double poisson_two_sided_p(long total, double null_mean) {
    const double p_lo = poisson_cdf(total, null_mean);
    const double p_hi = 1.0 - poisson_cdf(total - 1, null_mean);
    return std::min(1.0, 2.0 * std::min(p_lo, p_hi));
}

/// Projective verification of one pulse against the pure state expected at
/// `expected_phase`: passes with probability equal to the state fidelity.
/// An untampered pulse (exact phase) always passes. This is the strongest
/// test quantum mechanics allows the verifier, so the detection rates built
/// on it are upper bounds for any real measurement.
inline VerificationOutcome verify_pulse(double expected_phase, const CoherentPulse& pulse,
                                        RngStream& rng) {
    const double f = fock::fidelity(pulse.mean_n_true, pulse.phase_true - expected_phase);
    return {rng.bernoulli(f), pulse.index, VerificationOutcome::Kind::state_fidelity};
}

/// Aggregate intensity check: two-sided test of the summed counts against
/// a Poisson null with the expected mean per pulse. Passes iff the p-value
/// is at least `significance`.
inline VerificationOutcome photon_number_test(std::span<const long> counts, double expected_mean,
                                              double significance, double* p_value_out = nullptr) {
    if (counts.empty()) throw std::invalid_argument("photon_number_test: counts must be nonempty");
    if (!(expected_mean > 0.0)) throw std::invalid_argument("photon_number_test: expected_mean must be positive");
    if (!(significance > 0.0 && significance < 1.0)) throw std::invalid_argument("photon_number_test: significance must be in (0,1)");
    long total = 0;
    for (long c : counts) {
        if (c < 0) throw std::invalid_argument("photon_number_test: negative count");
        total += c;
    }
    const double p = poisson_two_sided_p(total, expected_mean * static_cast<double>(counts.size()));
    if (p_value_out) *p_value_out = p;
    return {p >= significance, -1, VerificationOutcome::Kind::photon_number};
}

} // namespace phaseflip::measurement
