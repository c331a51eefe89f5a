#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "phaseflip/fock.hpp"

namespace phaseflip::ensemble {

/// Eigenvalues of a density matrix above -kPsdEps are truncation noise and
/// get clamped; anything more negative is a genuinely invalid matrix.
inline constexpr double kPsdEps = 1e-10;

inline constexpr int kDefaultMCap = 1 << 16;
inline constexpr double kDefaultPlateauTol = 1e-4;

/// Hermitian matrix on the truncated Fock space. Hermiticity is exact by
/// construction (builders fill the upper triangle and mirror conjugates);
/// the constructor rejects anything else.
class DensityMatrix {
public:
    explicit DensityMatrix(Eigen::MatrixXcd entries) : m_(std::move(entries)) {
        if (m_.rows() != m_.cols() || m_.rows() < 1) {
            throw std::invalid_argument("DensityMatrix: matrix must be square and nonempty");
        }
        for (Eigen::Index i = 0; i < m_.rows(); ++i) {
            for (Eigen::Index j = i; j < m_.cols(); ++j) {
                if (m_(i, j) != std::conj(m_(j, i))) {
                    throw std::invalid_argument("DensityMatrix: matrix is not exactly Hermitian");
                }
            }
        }
    }

    int dim() const { return static_cast<int>(m_.rows()); }
    std::complex<double> entry(int n, int n_prime) const { return m_(n, n_prime); }
    double trace() const { return m_.trace().real(); }
    const Eigen::MatrixXcd& matrix() const { return m_; }

private:
    Eigen::MatrixXcd m_;
};

/// Phase sum J(n, n'; M) = sum_{k=0}^{2M-1} exp(i k (n'-n) pi / M), the
/// factor the grid average imprints on the (n, n') matrix element of rho.
///
/// The step is pi/M because the ensemble angles are phi_k = k*pi/M. The
/// geometric sum then collapses to a Kronecker comb:
///
///   J = 2M  if (n' - n) mod 2M == 0,   J = 0 otherwise,
///
/// since q = exp(i (n'-n) pi / M) always satisfies q^{2M} = 1. So the only
/// coherences that survive the 2M-phase average sit at index differences
/// that are multiples of 2M; everything else, odd or even, cancels.
inline std::complex<double> j_factor(int n, int n_prime, int M) {
    if (M < 1) throw std::invalid_argument("j_factor: M must be >= 1");
    if (n < 0 || n_prime < 0) throw std::invalid_argument("j_factor: indices must be nonnegative");
    const int delta = n_prime - n;
    const int period = 2 * M;
    return (delta % period == 0) ? std::complex<double>(period, 0.0)
                                 : std::complex<double>(0.0, 0.0);
}

namespace detail {

inline void check_trace(const DensityMatrix& rho, double eps_tail) {
    const double tr = rho.trace();
    if (tr < 1.0 - 10.0 * eps_tail || tr > 1.0 + 1e-12) {
        throw std::domain_error("density matrix trace outside [1 - 10*eps_tail, 1]");
    }
}

} // namespace detail

/// Ground-truth construction of rho = (1/2M) sum_k |Psi(phi_k)><Psi(phi_k)|
/// as an explicit average of 2M rank-1 projectors. Quadratic in dim and
/// linear in M; used as the oracle the closed form is checked against.
inline DensityMatrix rho_direct(const fock::Amplitude& alpha, int M, int dim,
                                double eps_tail = fock::kDefaultTailEps) {
    if (M < 1) throw std::invalid_argument("rho_direct: M must be >= 1");
    const fock::PhaseGrid grid(M);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (int k = 0; k < 2 * M; ++k) {
        const fock::FockVector v =
            fock::coherent_vector(fock::rotate(alpha, grid.angle(k)), dim, eps_tail);
        for (int i = 0; i < dim; ++i) {
            for (int j = i; j < dim; ++j) {
                m(i, j) += v.coeffs[i] * std::conj(v.coeffs[j]);
            }
        }
    }
    const double w = 1.0 / (2.0 * M);
    for (int i = 0; i < dim; ++i) {
        for (int j = i; j < dim; ++j) {
            m(i, j) *= w;
            m(j, i) = std::conj(m(i, j));
        }
    }
    DensityMatrix rho(std::move(m));
    detail::check_trace(rho, eps_tail);
    return rho;
}

/// Closed-form assembly of the same matrix from j_factor:
///
///   rho_{n,n'} = exp(-|a|^2) a^n conj(a)^{n'} / sqrt(n! n'!) * J(n,n';M)/(2M)
///
/// i.e. the Poisson diagonal plus coherences only where n' - n is a
/// multiple of 2M. Magnitudes are assembled in the log domain.
inline DensityMatrix rho_closed(const fock::Amplitude& alpha, int M, int dim,
                                double eps_tail = fock::kDefaultTailEps) {
    if (M < 1) throw std::invalid_argument("rho_closed: M must be >= 1");
    if (dim < 1) throw std::invalid_argument("rho_closed: dim must be >= 1");
    const double mean_n = alpha.mean_photons();
    const double log_mean = std::log(mean_n);
    const double theta = alpha.phase();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (int n = 0; n < dim; ++n) {
        for (int np = n; np < dim; np += 1) {
            if ((np - n) % (2 * M) != 0) continue;
            const double log_mag = -mean_n + 0.5 * (n + np) * log_mean -
                                   0.5 * std::lgamma(n + 1.0) - 0.5 * std::lgamma(np + 1.0);
            // alpha^n conj(alpha)^{n'} carries phase theta*(n - n')
            m(n, np) = std::polar(std::exp(log_mag), fock::wrap_angle(theta * (n - np)));
            m(np, n) = std::conj(m(n, np));
        }
    }
    DensityMatrix rho(std::move(m));
    detail::check_trace(rho, eps_tail);
    return rho;
}

/// von Neumann entropy S = -sum lambda_i ln lambda_i in nats, from a full
/// Hermitian eigendecomposition. Eigenvalues below eps_psd are dropped;
/// eigenvalues below -eps_psd signal an invalid density matrix.
inline double von_neumann_entropy(const DensityMatrix& rho, double eps_psd = kPsdEps) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho.matrix(),
                                                           Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("von_neumann_entropy: eigensolver failed");
    }
    const Eigen::VectorXd& ev = solver.eigenvalues();
    double s = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        const double lam = ev[i];
        if (lam < -eps_psd) {
            throw std::domain_error("von_neumann_entropy: eigenvalue below -eps_psd, not a density matrix");
        }
        if (lam > eps_psd) s -= lam * std::log(lam);
    }
    return s;
}

/// Shannon entropy (nats) of the Poisson(mean_n) photon-number distribution
/// truncated at dim, with the tail folded into one outcome. Dominates the
/// von Neumann entropy of rho for every M: dephasing in the number basis
/// only increases entropy.
inline double poisson_entropy_bound(double mean_n, int dim) {
    if (!(mean_n > 0.0)) throw std::invalid_argument("poisson_entropy_bound: mean_n must be positive");
    if (dim < 1) throw std::invalid_argument("poisson_entropy_bound: dim must be >= 1");
    const double log_mean = std::log(mean_n);
    long double total = 0.0L;
    double h = 0.0;
    for (int n = 0; n < dim; ++n) {
        const double log_p = -mean_n + n * log_mean - std::lgamma(n + 1.0);
        const double p = std::exp(log_p);
        total += static_cast<long double>(p);
        h -= p * log_p;
    }
    const double tail = std::max(0.0, static_cast<double>(1.0L - total));
    if (tail > 0.0) h -= tail * std::log(tail);
    return h;
}

/// One row of the security scan behind the S(rho)-vs-M curve.
///
/// The per-pulse basis choice k is uniform over 2M values, so its true
/// entropy is log2(2M) bits; `shannon_basis_entropy_bits` additionally
/// records log2(M), the basis-pair count, and the criterion margin divides
/// by that conservative denominator. Security wants margin << 1.
struct EntropyReport {
    int M = 0;
    double mean_n = 0.0;
    double entropy_nats = 0.0;
    double entropy_bits = 0.0;
    double log2_2M = 0.0;
    double shannon_basis_entropy_bits = 0.0;
    double margin = 0.0;
    double poisson_bound_nats = 0.0;
};

inline EntropyReport make_entropy_report(const fock::Amplitude& alpha, int M, int dim,
                                         double bound_nats,
                                         double eps_tail = fock::kDefaultTailEps) {
    const double s_nats = von_neumann_entropy(rho_closed(alpha, M, dim, eps_tail));
    if (s_nats > bound_nats + 1e-6) {
        throw std::domain_error("entropy exceeds the photon-number dephasing bound");
    }
    EntropyReport r;
    r.M = M;
    r.mean_n = alpha.mean_photons();
    r.entropy_nats = s_nats;
    r.entropy_bits = s_nats / std::numbers::ln2;
    r.log2_2M = std::log2(2.0 * M);
    r.shannon_basis_entropy_bits = std::log2(static_cast<double>(M));
    r.margin = r.entropy_bits / r.shannon_basis_entropy_bits; // +inf at M = 1
    r.poisson_bound_nats = bound_nats;
    return r;
}

/// Evaluate S(rho) for each M in ascending M_values at fixed alpha.
inline std::vector<EntropyReport> entropy_scan(const fock::Amplitude& alpha,
                                               const std::vector<int>& M_values,
                                               double eps_tail = fock::kDefaultTailEps) {
    if (M_values.empty()) throw std::invalid_argument("entropy_scan: M_values must be nonempty");
    for (std::size_t i = 1; i < M_values.size(); ++i) {
        if (M_values[i] < M_values[i - 1]) {
            throw std::invalid_argument("entropy_scan: M_values must be sorted ascending");
        }
    }
    const int dim = fock::truncation_dim(alpha.mean_photons(), eps_tail) + 1;
    const double bound = poisson_entropy_bound(alpha.mean_photons(), dim);
    std::vector<EntropyReport> out;
    out.reserve(M_values.size());
    for (int M : M_values) {
        out.push_back(make_entropy_report(alpha, M, dim, bound, eps_tail));
    }
    return out;
}

struct SmaxPoint {
    double mean_n = 0.0;
    double s_max_nats = 0.0;
    int m_at_plateau = 0;
    double poisson_bound_nats = 0.0;
};

/// Saturation entropy S_max(rho) per intensity: M doubles from 1 until two
/// successive entropies differ by less than plateau_tol.
inline std::vector<SmaxPoint> smax_scan(const std::vector<double>& mean_n_values,
                                        double plateau_tol = kDefaultPlateauTol,
                                        int m_cap = kDefaultMCap,
                                        double eps_tail = fock::kDefaultTailEps) {
    if (mean_n_values.empty()) throw std::invalid_argument("smax_scan: mean_n_values must be nonempty");
    if (!(plateau_tol > 0.0)) throw std::invalid_argument("smax_scan: plateau_tol must be positive");
    std::vector<SmaxPoint> out;
    out.reserve(mean_n_values.size());
    for (double mean_n : mean_n_values) {
        const fock::Amplitude alpha = fock::Amplitude::from_mean_photons(mean_n);
        const int dim = fock::truncation_dim(mean_n, eps_tail) + 1;
        const double bound = poisson_entropy_bound(mean_n, dim);
        double prev = von_neumann_entropy(rho_closed(alpha, 1, dim, eps_tail));
        int M = 1;
        for (;;) {
            if (M >= m_cap) {
                throw std::runtime_error("smax_scan: no plateau below the M cap");
            }
            M *= 2;
            const double cur = von_neumann_entropy(rho_closed(alpha, M, dim, eps_tail));
            if (std::abs(cur - prev) < plateau_tol) {
                if (cur > bound + 1e-6) {
                    throw std::domain_error("entropy exceeds the photon-number dephasing bound");
                }
                out.push_back({mean_n, cur, M, bound});
                break;
            }
            prev = cur;
        }
    }
    return out;
}

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// CSV with the documented scan header, one row per report.
inline std::string to_csv(const std::vector<EntropyReport>& reports) {
    std::string s = "mean_n,M,entropy_nats,entropy_bits,log2_2M,margin,poisson_bound_nats\n";
    for (const auto& r : reports) {
        s += detail::fmt_double(r.mean_n) + "," + std::to_string(r.M) + "," +
             detail::fmt_double(r.entropy_nats) + "," + detail::fmt_double(r.entropy_bits) + "," +
             detail::fmt_double(r.log2_2M) + "," + detail::fmt_double(r.margin) + "," +
             detail::fmt_double(r.poisson_bound_nats) + "\n";
    }
    return s;
}

inline std::string to_csv(const std::vector<SmaxPoint>& points) {
    std::string s = "mean_n,ln_mean_n,S_max_nats,poisson_bound_nats,M_at_plateau\n";
    for (const auto& p : points) {
        s += detail::fmt_double(p.mean_n) + "," + detail::fmt_double(std::log(p.mean_n)) + "," +
             detail::fmt_double(p.s_max_nats) + "," + detail::fmt_double(p.poisson_bound_nats) +
             "," + std::to_string(p.m_at_plateau) + "\n";
    }
    return s;
}

} // namespace phaseflip::ensemble
