#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "phaseflip/ensemble.hpp"
#include "phaseflip/fock.hpp"
#include "phaseflip/measurement.hpp"
#include "phaseflip/pulse.hpp"
#include "phaseflip/rng.hpp"

namespace phaseflip::adversary {

/// Behavioral contract for an eavesdropper sitting on the quantum channel.
/// Pulses carry their original batch index, which is public timing
/// information, so strategies align forward and return batches by index.
/// A strategy instance holds per-run memory and must not be shared between
/// concurrent protocol runs.
class AdversaryStrategy {
public:
    virtual ~AdversaryStrategy() = default;
    virtual std::string name() const = 0;

    /// Intercept the batch en route Alice -> Bob.
    virtual std::vector<CoherentPulse> on_forward(std::vector<CoherentPulse> pulses,
                                                  RngStream& rng) {
        (void)rng;
        return pulses;
    }

    /// Intercept the batch en route Bob -> Alice.
    virtual std::vector<CoherentPulse> on_return(std::vector<CoherentPulse> pulses,
                                                 RngStream& rng) {
        (void)rng;
        return pulses;
    }
};

/// Pass-through; transcripts are identical to running with no hook at all.
class NoAttack final : public AdversaryStrategy {
public:
    std::string name() const override { return "none"; }
};

/// Full man-in-the-middle: store Alice's batch, hand Bob freshly prepared
/// pulses at uniformly random phases, decode his phase flips from the
/// returned batch (exact, since the substituted phases are her own), then
/// re-encode the key onto the stored originals and forward those to Alice.
class FullMitm final : public AdversaryStrategy {
public:
    explicit FullMitm(int M, bool continuous_phase = false)
        : grid_(M), continuous_phase_(continuous_phase) {}

    std::string name() const override { return "full-mitm"; }

    std::vector<CoherentPulse> on_forward(std::vector<CoherentPulse> pulses,
                                          RngStream& rng) override {
        stored_ = pulses;
        own_phase_.assign(pulses.size(), 0.0);
        std::vector<CoherentPulse> out = std::move(pulses);
        for (auto& p : out) {
            const double phase =
                continuous_phase_
                    ? rng.uniform() * fock::kTwoPi
                    : grid_.angle(static_cast<int>(rng.uniform_below(grid_.num_phases())));
            own_phase_[p.index] = phase;
            p.phase_true = phase; // intensity-honest substitution
            p.provenance = Provenance::substituted;
        }
        return out;
    }

    std::vector<CoherentPulse> on_return(std::vector<CoherentPulse> pulses,
                                         RngStream& rng) override {
        (void)rng;
        if (stored_.empty()) throw std::logic_error("FullMitm: no stored forward batch");
        decoded_flips_.clear();
        std::vector<CoherentPulse> out;
        out.reserve(pulses.size());
        for (const auto& p : pulses) {
            if (p.index < 0 || p.index >= static_cast<int>(stored_.size())) {
                throw std::logic_error("FullMitm: returned pulse index outside stored batch");
            }
            // Bob applied 0 or pi on top of her own phase; recover the flip.
            const double delta = fock::wrap_angle(p.phase_true - own_phase_[p.index]);
            const int flip = (std::abs(delta - std::numbers::pi) < 0.5 * std::numbers::pi) ? 1 : 0;
            decoded_flips_.push_back(flip);
            CoherentPulse fwd = stored_[p.index];
            fwd.phase_true = fock::wrap_angle(fwd.phase_true + flip * std::numbers::pi);
            out.push_back(fwd);
        }
        return out;
    }

    /// Key bits recovered on the return leg, in returned-batch order.
    const std::vector<int>& decoded_flips() const { return decoded_flips_; }

private:
    fock::PhaseGrid grid_;
    bool continuous_phase_;
    std::vector<CoherentPulse> stored_;
    std::vector<double> own_phase_;
    std::vector<int> decoded_flips_;
};

/// Measure each forward pulse in a uniformly random grid basis and resend
/// the inferred basis state at full intensity. The return leg is left
/// untouched by default.
class InterceptResend final : public AdversaryStrategy {
public:
    explicit InterceptResend(int M) : grid_(M) {}

    std::string name() const override { return "intercept-resend"; }

    std::vector<CoherentPulse> on_forward(std::vector<CoherentPulse> pulses,
                                          RngStream& rng) override {
        for (auto& p : pulses) {
            const int basis = static_cast<int>(rng.uniform_below(grid_.num_phases()));
            const int bit = measurement::read_bit_in_basis(
                p.mean_n_true, p.phase_true - grid_.angle(basis), rng);
            p.phase_true = grid_.bit_phase(basis, bit);
            p.provenance = Provenance::measured_resent;
        }
        return pulses;
    }

private:
    fock::PhaseGrid grid_;
};

/// Tap a 1-T fraction of every forward pulse's intensity and keep it for
/// offline analysis; phases are untouched.
class BeamSplit final : public AdversaryStrategy {
public:
    explicit BeamSplit(double transmittance) : t_(transmittance) {
        if (!(t_ > 0.0 && t_ < 1.0)) {
            throw std::invalid_argument("BeamSplit: transmittance must be in (0,1); T = 1 is `none`");
        }
    }

    std::string name() const override { return "beam-split"; }
    double transmittance() const { return t_; }

    std::vector<CoherentPulse> on_forward(std::vector<CoherentPulse> pulses,
                                          RngStream& rng) override {
        (void)rng;
        tapped_.clear();
        tapped_.reserve(pulses.size());
        for (auto& p : pulses) {
            CoherentPulse tap = p;
            tap.mean_n_true = (1.0 - t_) * p.mean_n_true; // |sqrt(1-T) alpha|^2
            tapped_.push_back(tap);
            p.mean_n_true *= t_;
            p.provenance = Provenance::attenuated;
        }
        return pulses;
    }

    const std::vector<CoherentPulse>& tapped_pulses() const { return tapped_; }

private:
    double t_;
    std::vector<CoherentPulse> tapped_;
};

/// Probability that one disclosed pulse substituted at a uniformly random
/// grid phase passes the fidelity verification:
///
///   (1/2M) sum_{k=0}^{2M-1} exp(-4 mean_n sin^2(k pi / (2M)))
inline double expected_mitm_pass_prob(double mean_n, int M) {
    if (!(mean_n > 0.0)) throw std::invalid_argument("expected_mitm_pass_prob: mean_n must be positive");
    if (M < 1) throw std::invalid_argument("expected_mitm_pass_prob: M must be >= 1");
    const int n = 2 * M;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        sum += fock::fidelity(mean_n, k * std::numbers::pi / M);
    }
    return sum / n;
}

/// Mesoscopic approximation for the intercept-resend analogue: the resent
/// state lands on the grid phase nearest Alice's, so the verification
/// offset is uniform over the M centered grid steps.
inline double expected_resend_pass_prob(double mean_n, int M) {
    if (!(mean_n > 0.0)) throw std::invalid_argument("expected_resend_pass_prob: mean_n must be positive");
    if (M < 1) throw std::invalid_argument("expected_resend_pass_prob: M must be >= 1");
    double sum = 0.0;
    for (int u = 0; u < M; ++u) {
        const int centered = u <= M / 2 ? u : u - M;
        sum += fock::fidelity(mean_n, centered * std::numbers::pi / M);
    }
    return sum / M;
}

/// What a K-pulse session leaks to the strongest passive eavesdropper, and
/// how a full MITM fares against the verification round.
struct LeakageReport {
    double holevo_bound_bits = 0.0;       // K * S(rho) in bits
    double basis_entropy_bits = 0.0;      // K * log2(2M), k uniform over 2M values
    double basis_entropy_stated_bits = 0.0; // K * log2(M), basis-pair count
    double mitm_per_pulse_pass = 0.0;
    double mitm_overall_pass = 0.0;       // per-pulse^(K/2)
};

inline LeakageReport holevo_leak(double mean_n, int M, int K,
                                 double eps_tail = fock::kDefaultTailEps) {
    if (K < 0) throw std::invalid_argument("holevo_leak: K must be nonnegative");
    if (K == 0) return {};
    const fock::Amplitude alpha = fock::Amplitude::from_mean_photons(mean_n);
    const int dim = fock::truncation_dim(mean_n, eps_tail) + 1;
    const double s_nats =
        ensemble::von_neumann_entropy(ensemble::rho_closed(alpha, M, dim, eps_tail));
    LeakageReport r;
    r.holevo_bound_bits = K * (s_nats / std::numbers::ln2);
    r.basis_entropy_bits = K * std::log2(2.0 * M);
    r.basis_entropy_stated_bits = K * std::log2(static_cast<double>(M));
    r.mitm_per_pulse_pass = expected_mitm_pass_prob(mean_n, M);
    r.mitm_overall_pass = std::pow(r.mitm_per_pulse_pass, K / 2);
    return r;
}

} // namespace phaseflip::adversary
