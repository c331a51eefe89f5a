#pragma once

#include <cstdio>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phaseflip/adversary.hpp"
#include "phaseflip/fock.hpp"
#include "phaseflip/measurement.hpp"
#include "phaseflip/pulse.hpp"
#include "phaseflip/rng.hpp"

namespace phaseflip::protocol {

/// Bit strings are vectors of 0/1; masked positions carry kMasked. The
/// same convention covers basis-index lists (k'), where values are in
/// 0..2M-1 or kMasked.
using IntString = std::vector<int>;
inline constexpr int kMasked = -1;

struct ProtocolConfig {
    int K = 0;               // initial number of pulses, divisible by 4
    int M = 0;               // 2M bases
    double mean_n = 0.0;     // |alpha|^2 at the source
    double theta_ref = 0.0;  // phase of the reference amplitude alpha
    std::uint64_t seed = 0;
    double significance = 0.01;
    /// Known per-leg channel attenuation both parties anticipate: a pulse
    /// arrives at Bob with mean_n * T and back at Alice with mean_n * T^2.
    double expected_transmittance = 1.0;
    /// Fidelity-test failures tolerated before aborting (0 = zero tolerance).
    int max_fidelity_failures = 0;

    void validate() const {
        if (K < 4 || K % 4 != 0) throw std::invalid_argument("ProtocolConfig: K must be a positive multiple of 4");
        if (M < 1) throw std::invalid_argument("ProtocolConfig: M must be >= 1");
        if (!(mean_n > 0.0)) throw std::invalid_argument("ProtocolConfig: mean_n must be positive");
        if (!(significance > 0.0 && significance < 1.0)) throw std::invalid_argument("ProtocolConfig: significance must be in (0,1)");
        if (!(expected_transmittance > 0.0 && expected_transmittance <= 1.0)) throw std::invalid_argument("ProtocolConfig: transmittance must be in (0,1]");
        if (max_fidelity_failures < 0) throw std::invalid_argument("ProtocolConfig: max_fidelity_failures must be >= 0");
    }

    /// The security criterion wants mean_n << M; flag configs outside it.
    bool security_advisory() const { return mean_n >= static_cast<double>(M); }

    double mean_n_at_bob() const { return mean_n * expected_transmittance; }
    double mean_n_at_alice() const { return mean_n * expected_transmittance * expected_transmittance; }
};

enum class Outcome { completed, aborted_step_2c, aborted_step_3a };

inline std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::completed: return "completed";
        case Outcome::aborted_step_2c: return "aborted-at-step-2c";
        case Outcome::aborted_step_3a: return "aborted-at-step-3a";
    }
    return "?";
}

struct TranscriptEvent {
    std::string step;
    std::string direction; // "A->B" / "B->A" for channel traffic, "A"/"B"/"-" for local notes
    std::string type;      // "classical", "quantum", or a local record type
    std::string payload;
};

namespace detail {

inline std::string render_bits(const IntString& bits) {
    std::string s;
    s.reserve(bits.size());
    for (int b : bits) s += (b == kMasked) ? '-' : static_cast<char>('0' + b);
    return s;
}

inline std::string render_ints(const IntString& vals) {
    std::string s;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) s += ',';
        s += (vals[i] == kMasked) ? "-" : std::to_string(vals[i]);
    }
    return s;
}

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// Ordered record of one protocol run: every classical message, every
/// quantum transmission, and the outcome. Keys are stored as local
/// (off-channel) records; only `direction` containing "->" ever traversed
/// the public channel.
struct ProtocolTranscript {
    std::vector<TranscriptEvent> events;
    Outcome outcome = Outcome::completed;
    std::optional<IntString> alice_key;
    std::optional<IntString> bob_key;
    // Scalar verification summaries for cross-run aggregation.
    int bob_tested = 0;
    int bob_fidelity_failures = 0;
    int alice_tested = 0;
    int alice_fidelity_failures = 0;

    void add(std::string step, std::string direction, std::string type, std::string payload) {
        events.push_back({std::move(step), std::move(direction), std::move(type), std::move(payload)});
    }

    /// Line-delimited `step|direction|type|payload`, bit-exact for a fixed
    /// (config, adversary, seed).
    std::string serialize() const {
        std::string s;
        for (const auto& e : events) {
            s += e.step + "|" + e.direction + "|" + e.type + "|" + e.payload + "\n";
        }
        s += "end|-|outcome|" + to_string(outcome) + "\n";
        return s;
    }
};

struct PreparedBatch {
    std::vector<int> bases;            // k_1..k_K, each in 0..2M-1
    std::vector<CoherentPulse> pulses; // encoding bit 0 in basis k_j
};

/// Step 1: Alice draws k uniformly and prepares |Psi(phi_{k_j})> per pulse.
inline PreparedBatch alice_prepare(const ProtocolConfig& config, RngStream& rng) {
    config.validate();
    const fock::PhaseGrid grid(config.M);
    PreparedBatch batch;
    batch.bases.resize(config.K);
    batch.pulses.resize(config.K);
    for (int j = 0; j < config.K; ++j) {
        const int k = static_cast<int>(rng.uniform_below(grid.num_phases()));
        batch.bases[j] = k;
        batch.pulses[j] = {j, config.mean_n, grid.angle(k), Provenance::honest};
    }
    return batch;
}

/// Exact-weight random bit string: `weight` ones among `size` positions,
/// uniform over all arrangements.
inline IntString random_fixed_weight(int size, int weight, RngStream& rng) {
    if (weight < 0 || weight > size) throw std::invalid_argument("random_fixed_weight: weight out of range");
    IntString v(size, 0);
    for (int i = 0; i < weight; ++i) v[i] = 1;
    rng.shuffle(v);
    return v;
}

struct Disclosure {
    IntString v;       // weight K/2; v_j = 1 means the pulse stays in play
    IntString k_prime; // k_j where v_j = 0, kMasked elsewhere
};

/// Step 2b: Alice discloses the bases of a random half of the batch.
inline Disclosure alice_disclose(const std::vector<int>& k, RngStream& rng) {
    const int K = static_cast<int>(k.size());
    if (K < 2 || K % 2 != 0) throw std::invalid_argument("alice_disclose: |k| must be even and positive");
    Disclosure d;
    d.v = random_fixed_weight(K, K / 2, rng);
    d.k_prime.resize(K);
    for (int j = 0; j < K; ++j) d.k_prime[j] = (d.v[j] == 0) ? k[j] : kMasked;
    return d;
}

struct VerifyResult {
    bool proceed = false;
    int tested = 0;
    int fidelity_failures = 0;
    double photon_p_value = 0.0;
    std::vector<measurement::VerificationOutcome> outcomes;
};

namespace detail {

inline VerifyResult verify_batch(const std::vector<const CoherentPulse*>& pulses,
                                 const std::vector<double>& expected_phases,
                                 double expected_mean, const ProtocolConfig& config,
                                 RngStream& rng) {
    VerifyResult res;
    res.tested = static_cast<int>(pulses.size());
    res.outcomes.reserve(pulses.size());
    for (std::size_t i = 0; i < pulses.size(); ++i) {
        auto o = measurement::verify_pulse(expected_phases[i], *pulses[i], rng);
        if (!o.passed) ++res.fidelity_failures;
        res.outcomes.push_back(o);
    }
    std::vector<long> counts;
    counts.reserve(pulses.size());
    for (const CoherentPulse* p : pulses) {
        counts.push_back(measurement::sample_photon_count(p->mean_n_true, rng));
    }
    const auto photon = measurement::photon_number_test(counts, expected_mean,
                                                        config.significance, &res.photon_p_value);
    res.outcomes.push_back(photon);
    res.proceed = (res.fidelity_failures <= config.max_fidelity_failures) && photon.passed;
    return res;
}

} // namespace detail

/// Step 2c: Bob tests every disclosed pulse against the announced basis
/// phase and the batch against the expected photon number.
inline VerifyResult bob_verify(const std::vector<CoherentPulse>& pulses, const IntString& v,
                               const IntString& k_prime, const ProtocolConfig& config,
                               RngStream& rng) {
    const int K = static_cast<int>(pulses.size());
    if (static_cast<int>(v.size()) != K || static_cast<int>(k_prime.size()) != K) {
        throw std::invalid_argument("bob_verify: v, k', and pulse batch must have equal length");
    }
    const fock::PhaseGrid grid(config.M);
    std::vector<const CoherentPulse*> disclosed;
    std::vector<double> expected;
    for (int j = 0; j < K; ++j) {
        if (v[j] != 0) continue;
        if (k_prime[j] == kMasked) throw std::invalid_argument("bob_verify: disclosed position carries the masked sentinel");
        disclosed.push_back(&pulses[j]);
        expected.push_back(grid.angle(k_prime[j]));
    }
    if (disclosed.empty()) throw std::invalid_argument("bob_verify: no disclosed pulses to test");
    return detail::verify_batch(disclosed, expected, config.mean_n_at_bob(), config, rng);
}

/// Step 2d: Bob encrypts his key by rotating pulse j by r_j * pi.
inline std::vector<CoherentPulse> bob_encode(std::vector<CoherentPulse> kept, const IntString& r) {
    if (kept.size() != r.size()) throw std::invalid_argument("bob_encode: |r| must match the kept batch");
    for (std::size_t j = 0; j < kept.size(); ++j) {
        if (r[j] != 0 && r[j] != 1) throw std::invalid_argument("bob_encode: r must be a 0/1 string");
        if (r[j] == 1) kept[j].phase_true = fock::wrap_angle(kept[j].phase_true + std::numbers::pi);
    }
    return kept;
}

struct BobDisclosure {
    IntString w;         // weight K/4 over the K/2 kept positions
    IntString r_prime;   // r_j where w_j = 0, kMasked elsewhere
    IntString final_key; // r_j where w_j = 1, order preserved, length K/4
};

/// Step 2f: Bob discloses half of r and keeps the rest as the key.
inline BobDisclosure bob_disclose(const IntString& r, RngStream& rng) {
    const int n = static_cast<int>(r.size());
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("bob_disclose: |r| must be even and positive");
    BobDisclosure d;
    d.w = random_fixed_weight(n, n / 2, rng);
    d.r_prime.resize(n);
    for (int j = 0; j < n; ++j) {
        d.r_prime[j] = (d.w[j] == 0) ? r[j] : kMasked;
        if (d.w[j] == 1) d.final_key.push_back(r[j]);
    }
    return d;
}

/// Step 3a: Alice tests the disclosed half of the returned batch against
/// phi_{k_j} + r'_j * pi, using her own record of k. `kept_indices` are the
/// original positions that survived Step 2 (v_j = 1), in order.
inline VerifyResult alice_verify(const std::vector<CoherentPulse>& returned,
                                 const std::vector<int>& k, const std::vector<int>& kept_indices,
                                 const IntString& w, const IntString& r_prime,
                                 const ProtocolConfig& config, RngStream& rng) {
    const int n = static_cast<int>(returned.size());
    if (static_cast<int>(kept_indices.size()) != n || static_cast<int>(w.size()) != n ||
        static_cast<int>(r_prime.size()) != n) {
        throw std::invalid_argument("alice_verify: batch, index map, w, and r' must have equal length");
    }
    const fock::PhaseGrid grid(config.M);
    std::vector<const CoherentPulse*> disclosed;
    std::vector<double> expected;
    for (int j = 0; j < n; ++j) {
        if (w[j] != 0) continue;
        if (r_prime[j] == kMasked) throw std::invalid_argument("alice_verify: disclosed position carries the masked sentinel");
        const int orig = kept_indices[j];
        if (orig < 0 || orig >= static_cast<int>(k.size())) throw std::invalid_argument("alice_verify: index map outside original batch");
        disclosed.push_back(&returned[j]);
        expected.push_back(fock::wrap_angle(grid.angle(k[orig]) + r_prime[j] * std::numbers::pi));
    }
    if (disclosed.empty()) throw std::invalid_argument("alice_verify: no disclosed pulses to test");
    return detail::verify_batch(disclosed, expected, config.mean_n_at_alice(), config, rng);
}

/// Step 3b: rotate each key pulse back by its basis phase and read the bit
/// in the computational basis.
inline IntString alice_decode(const std::vector<CoherentPulse>& key_pulses,
                              const std::vector<int>& key_bases, const ProtocolConfig& config,
                              RngStream& rng) {
    if (key_pulses.size() != key_bases.size()) {
        throw std::invalid_argument("alice_decode: pulses and bases must have equal length");
    }
    const fock::PhaseGrid grid(config.M);
    IntString bits;
    bits.reserve(key_pulses.size());
    for (std::size_t j = 0; j < key_pulses.size(); ++j) {
        const double delta = key_pulses[j].phase_true - grid.angle(key_bases[j]);
        bits.push_back(measurement::read_bit_in_basis(key_pulses[j].mean_n_true, delta, rng));
    }
    return bits;
}

namespace detail {

/// Known channel loss: each traversal scales the intensity by T.
inline void channel_leg(std::vector<CoherentPulse>& pulses, double transmittance) {
    if (transmittance == 1.0) return;
    for (auto& p : pulses) p.mean_n_true *= transmittance;
}

} // namespace detail

/// Execute Protocol 1 end to end, routing both quantum transmissions
/// through `strategy`. Aborts are outcomes, not errors.
inline ProtocolTranscript run_protocol(const ProtocolConfig& config,
                                       adversary::AdversaryStrategy& strategy, RngStream& rng) {
    config.validate();
    RngStream alice_rng = rng.substream("alice");
    RngStream bob_rng = rng.substream("bob");
    RngStream eve_rng = rng.substream("eve");
    const fock::PhaseGrid grid(config.M);

    ProtocolTranscript t;
    t.add("setup", "-", "config",
          "K=" + std::to_string(config.K) + " M=" + std::to_string(config.M) +
              " mean_n=" + detail::fmt_double(config.mean_n) +
              " theta_ref=" + detail::fmt_double(config.theta_ref) +
              " significance=" + detail::fmt_double(config.significance) +
              " transmittance=" + detail::fmt_double(config.expected_transmittance) +
              " seed=" + std::to_string(config.seed));
    if (config.security_advisory()) {
        t.add("setup", "-", "advisory", "mean_n >= M violates the security regime mean_n << M");
    }

    // Step 1: prepare and send through channel + adversary.
    PreparedBatch prepared = alice_prepare(config, alice_rng);
    std::vector<CoherentPulse> in_flight = prepared.pulses;
    detail::channel_leg(in_flight, config.expected_transmittance);
    in_flight = strategy.on_forward(std::move(in_flight), eve_rng);
    t.add("1b", "A->B", "quantum", "pulses=" + std::to_string(in_flight.size()));

    // Step 2a: receipt acknowledgment.
    t.add("2a", "B->A", "classical", "ack");

    // Step 2b: Alice discloses half the bases.
    Disclosure disc = alice_disclose(prepared.bases, alice_rng);
    t.add("2b", "A->B", "classical", "v=" + detail::render_bits(disc.v));
    t.add("2b", "A->B", "classical", "kprime=" + detail::render_ints(disc.k_prime));

    // Step 2c: Bob verifies the disclosed pulses.
    VerifyResult bob_check = bob_verify(in_flight, disc.v, disc.k_prime, config, bob_rng);
    t.bob_tested = bob_check.tested;
    t.bob_fidelity_failures = bob_check.fidelity_failures;
    t.add("2c", "B", "local",
          std::string("verify=") + (bob_check.proceed ? "proceed" : "abort") +
              " tested=" + std::to_string(bob_check.tested) +
              " fidelity_failures=" + std::to_string(bob_check.fidelity_failures) +
              " photon_p=" + detail::fmt_double(bob_check.photon_p_value));
    if (!bob_check.proceed) {
        t.add("2c", "B->A", "classical", "abort");
        t.outcome = Outcome::aborted_step_2c;
        return t;
    }

    // Step 2d: disclosed positions are consumed; Bob keeps v_j = 1 and
    // encodes his key on them.
    std::vector<CoherentPulse> kept;
    std::vector<int> kept_indices;
    for (int j = 0; j < config.K; ++j) {
        if (disc.v[j] == 1) {
            kept.push_back(in_flight[j]);
            kept_indices.push_back(j);
        }
    }
    IntString r(kept.size());
    for (auto& bit : r) bit = static_cast<int>(bob_rng.uniform_below(2));
    std::vector<CoherentPulse> encoded = bob_encode(std::move(kept), r);

    // Step 2e: return transmission.
    detail::channel_leg(encoded, config.expected_transmittance);
    std::vector<CoherentPulse> returned = strategy.on_return(std::move(encoded), eve_rng);
    t.add("2e", "B->A", "quantum", "pulses=" + std::to_string(returned.size()));

    // Step 2f: Bob discloses half of r; the rest is his key.
    BobDisclosure bd = bob_disclose(r, bob_rng);
    t.add("2f", "B->A", "classical", "w=" + detail::render_bits(bd.w));
    t.add("2f", "B->A", "classical", "rprime=" + detail::render_bits(bd.r_prime));
    t.bob_key = bd.final_key;
    t.add("2f", "B", "local", "key=" + detail::render_bits(bd.final_key));

    // Step 3a: Alice verifies the disclosed half of the returned batch.
    VerifyResult alice_check =
        alice_verify(returned, prepared.bases, kept_indices, bd.w, bd.r_prime, config, alice_rng);
    t.alice_tested = alice_check.tested;
    t.alice_fidelity_failures = alice_check.fidelity_failures;
    t.add("3a", "A", "local",
          std::string("verify=") + (alice_check.proceed ? "proceed" : "abort") +
              " tested=" + std::to_string(alice_check.tested) +
              " fidelity_failures=" + std::to_string(alice_check.fidelity_failures) +
              " photon_p=" + detail::fmt_double(alice_check.photon_p_value));
    if (!alice_check.proceed) {
        t.add("3a", "A->B", "classical", "abort");
        t.outcome = Outcome::aborted_step_3a;
        return t;
    }

    // Step 3b: Alice decodes the undisclosed positions.
    std::vector<CoherentPulse> key_pulses;
    std::vector<int> key_bases;
    for (std::size_t j = 0; j < returned.size(); ++j) {
        if (bd.w[j] == 1) {
            key_pulses.push_back(returned[j]);
            key_bases.push_back(prepared.bases[kept_indices[j]]);
        }
    }
    t.alice_key = alice_decode(key_pulses, key_bases, config, alice_rng);
    t.add("3b", "A", "local", "key=" + detail::render_bits(*t.alice_key));
    t.outcome = Outcome::completed;
    return t;
}

/// Convenience overload: honest channel, no adversary hook installed.
inline ProtocolTranscript run_protocol(const ProtocolConfig& config, RngStream& rng) {
    adversary::NoAttack none;
    return run_protocol(config, none, rng);
}

} // namespace phaseflip::protocol
