#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace phaseflip::fock {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Default bound on the Poisson mass discarded by Fock-space truncation.
inline constexpr double kDefaultTailEps = 1e-12;

/// Reduce an angle into [0, 2*pi).
inline double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a;
}

/// Complex amplitude of a coherent state, stored as (modulus, phase).
/// The mean photon number of |alpha> is modulus^2.
class Amplitude {
public:
    Amplitude(double modulus, double phase) : modulus_(modulus), phase_(wrap_angle(phase)) {
        if (!(modulus > 0.0)) throw std::invalid_argument("Amplitude: modulus must be positive");
    }

    static Amplitude from_mean_photons(double mean_n, double phase = 0.0) {
        if (!(mean_n > 0.0)) throw std::invalid_argument("Amplitude: mean photon number must be positive");
        return Amplitude(std::sqrt(mean_n), phase);
    }

    double modulus() const { return modulus_; }
    double phase() const { return phase_; }
    double mean_photons() const { return modulus_ * modulus_; }

    std::complex<double> value() const {
        return std::polar(modulus_, phase_);
    }

private:
    double modulus_;
    double phase_;
};

/// Number-basis expansion c_0..c_{dim-1} of a state on the truncated space.
struct FockVector {
    std::vector<std::complex<double>> coeffs;

    int dim() const { return static_cast<int>(coeffs.size()); }

    double norm_sq() const {
        double s = 0.0;
        for (const auto& c : coeffs) s += std::norm(c);
        return s;
    }

    /// Probability mass lost to truncation, 1 - sum |c_n|^2.
    double tail_mass() const { return 1.0 - norm_sq(); }
};

/// Smallest N such that the Poisson(mean_n) mass above N is < eps_tail.
/// A vector for |alpha|^2 = mean_n then needs dim = N + 1 entries.
inline int truncation_dim(double mean_n, double eps_tail) {
    if (!(mean_n > 0.0)) throw std::invalid_argument("truncation_dim: mean_n must be positive");
    if (!(eps_tail > 0.0 && eps_tail < 1.0)) throw std::invalid_argument("truncation_dim: eps_tail must be in (0,1)");
    // Long-double accumulation keeps 1 - cdf meaningful down to ~1e-18.
    long double p = std::exp(-static_cast<long double>(mean_n));
    long double cdf = p;
    int n = 0;
    while (1.0L - cdf >= static_cast<long double>(eps_tail)) {
        ++n;
        p *= static_cast<long double>(mean_n) / n;
        cdf += p;
        if (n > 50'000'000) throw std::runtime_error("truncation_dim: did not converge");
    }
    return n;
}

/// Coefficients of |alpha> on the first dim Fock levels:
/// c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!).
///
/// n! overflows double at n = 171 while |alpha|^2 = 200 needs n > 300, so
/// magnitudes are assembled in the log domain via lgamma.
inline FockVector coherent_vector(const Amplitude& alpha, int dim,
                                  double eps_tail = kDefaultTailEps) {
    if (dim < 1) throw std::invalid_argument("coherent_vector: dim must be >= 1");
    const double mean_n = alpha.mean_photons();
    const double log_mod = std::log(alpha.modulus());
    FockVector v;
    v.coeffs.resize(dim);
    for (int n = 0; n < dim; ++n) {
        const double log_mag = -0.5 * mean_n + n * log_mod - 0.5 * std::lgamma(n + 1.0);
        const double ph = wrap_angle(n * alpha.phase());
        v.coeffs[n] = std::polar(std::exp(log_mag), ph);
    }
    // Small slack over eps_tail absorbs roundoff in the norm accumulation.
    if (v.tail_mass() > eps_tail + 1e-13) {
        throw std::domain_error("coherent_vector: truncation dim too small for requested tail bound");
    }
    return v;
}

/// Phase rotation R(phi)|alpha> = |exp(-i phi) alpha>: the modulus is
/// unchanged and the amplitude phase decreases by phi (mod 2*pi).
inline Amplitude rotate(const Amplitude& alpha, double phi) {
    return Amplitude(alpha.modulus(), alpha.phase() - phi);
}

/// log |<Psi(phi)|Psi(phi')>|^2 = -4 |alpha|^2 sin^2(dphi/2).
inline double log_fidelity(double alpha_mag_sq, double dphi) {
    const double s = std::sin(0.5 * dphi);
    return -4.0 * alpha_mag_sq * s * s;
}

/// Squared overlap of two coherent states of equal intensity whose phases
/// differ by dphi. Exact closed form; symmetric and 2*pi-periodic in dphi.
inline double fidelity(double alpha_mag_sq, double dphi) {
    if (!(alpha_mag_sq > 0.0)) throw std::invalid_argument("fidelity: alpha_mag_sq must be positive");
    return std::exp(log_fidelity(alpha_mag_sq, dphi));
}

/// Helstrom bound: minimum error probability for discriminating two equally
/// likely pure states with squared overlap `fidelity`.
inline double helstrom_error(double fidelity) {
    if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw std::invalid_argument("helstrom_error: fidelity must be in [0,1]");
    return 0.5 * (1.0 - std::sqrt(1.0 - fidelity));
}

/// The 2M protocol phases phi_k = k*pi/M, k = 0..2M-1, and the basis
/// bookkeeping on top of them. Basis B_k pairs phi_k (bit 0) with
/// phi_k + pi (bit 1); B_{k+M mod 2M} holds the same two states with the
/// bit labels swapped. Indices are the canonical currency; angles are
/// derived, never stored, so basis arithmetic stays exact.
class PhaseGrid {
public:
    explicit PhaseGrid(int m) : m_(m) {
        if (m < 1) throw std::invalid_argument("PhaseGrid: M must be >= 1");
    }

    int m() const { return m_; }
    int num_phases() const { return 2 * m_; }
    double spacing() const { return std::numbers::pi / m_; }

    /// phi_k for k reduced mod 2M.
    double angle(int k) const {
        int r = k % (2 * m_);
        if (r < 0) r += 2 * m_;
        return wrap_angle(r * spacing());
    }

    /// Index of the basis containing the same states with swapped bits.
    int conjugate_basis(int k) const { return (k % (2 * m_) + m_ + 2 * m_) % (2 * m_); }

    /// Phase encoding `bit` in basis k: phi_k + bit*pi.
    double bit_phase(int k, int bit) const {
        return wrap_angle(angle(k) + bit * std::numbers::pi);
    }

private:
    int m_;
};

} // namespace phaseflip::fock
