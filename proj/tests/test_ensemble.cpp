#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "phaseflip/ensemble.hpp"
#include "phaseflip/fock.hpp"

using namespace phaseflip;
using Catch::Approx;

namespace {

// Brute-force geometric sum sum_{k=0}^{2M-1} exp(i k (np-n) step); evaluated
// under both candidate phase steps to adjudicate the printed-formula
// ambiguity against rho_direct.
std::complex<double> brute_phase_sum(int n, int np, int M, double step) {
    std::complex<double> s = 0.0;
    for (int k = 0; k < 2 * M; ++k) {
        s += std::exp(std::complex<double>(0.0, k * (np - n) * step));
    }
    return s;
}

// The closed form as literally printed (Poisson diagonal plus odd
// off-diagonals from the pi/(2M) step). Kept here only to demonstrate that
// it does NOT reproduce the projector average.
Eigen::MatrixXcd rho_printed_variant(const fock::Amplitude& alpha, int M, int dim) {
    const double mean_n = alpha.mean_photons();
    const double log_mean = std::log(mean_n);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (int n = 0; n < dim; ++n) {
        for (int np = n; np < dim; ++np) {
            const int delta = np - n;
            if (delta != 0 && delta % 2 == 0) continue;
            const double log_mag = -mean_n + 0.5 * (n + np) * log_mean -
                                   0.5 * std::lgamma(n + 1.0) - 0.5 * std::lgamma(np + 1.0);
            std::complex<double> j = 2.0 * M;
            if (delta != 0) {
                j = -2.0 / (std::exp(std::complex<double>(0.0, delta * std::numbers::pi / (2.0 * M))) - 1.0);
            }
            m(n, np) = std::polar(std::exp(log_mag), fock::wrap_angle(alpha.phase() * (n - np))) * j /
                       (2.0 * M);
            m(np, n) = std::conj(m(n, np));
        }
    }
    return m;
}

double poisson_pmf(double mean_n, int n) {
    return std::exp(-mean_n + n * std::log(mean_n) - std::lgamma(n + 1.0));
}

double max_abs_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("j_factor equals the literal pi/M geometric sum") {
    const double pi = std::numbers::pi;
    CHECK(ensemble::j_factor(3, 3, 5) == std::complex<double>(10.0, 0.0));
    CHECK(ensemble::j_factor(0, 2, 4) == std::complex<double>(0.0, 0.0));

    // For (n=0, n'=1, M=2) the pi/M sum is 1 + i - 1 - i = 0; the pi/(2M)
    // variant is -2/(e^{i pi/4} - 1) != 0. The pi/M step is the one that
    // reproduces rho_direct (checked below), so j_factor returns 0 here.
    CHECK(ensemble::j_factor(0, 1, 2) == std::complex<double>(0.0, 0.0));
    CHECK(std::abs(brute_phase_sum(0, 1, 2, pi / 2.0)) < 1e-12);
    const auto paper_step = brute_phase_sum(0, 1, 2, pi / 4.0);
    const auto paper_closed = -2.0 / (std::exp(std::complex<double>(0.0, pi / 4.0)) - 1.0);
    CHECK(std::abs(paper_step - paper_closed) < 1e-12);
    CHECK(std::abs(paper_step) > 1.0);

    SECTION("agrees with the brute-force sum everywhere") {
        for (int M : {1, 2, 3, 8}) {
            for (int n = 0; n < 10; ++n) {
                for (int np = 0; np < 10; ++np) {
                    const auto brute = brute_phase_sum(n, np, M, pi / M);
                    CHECK(std::abs(ensemble::j_factor(n, np, M) - brute) < 1e-10 * 2 * M);
                }
            }
        }
    }
    SECTION("coherences survive at multiples of 2M") {
        CHECK(ensemble::j_factor(0, 4, 2) == std::complex<double>(4.0, 0.0));
        CHECK(ensemble::j_factor(1, 9, 2) == std::complex<double>(4.0, 0.0));
        CHECK(ensemble::j_factor(0, 6, 2) == std::complex<double>(0.0, 0.0));
    }
}

TEST_CASE("rho_direct structure") {
    SECTION("M=1 is the two-projector mixture with even/odd coherence structure") {
        const auto alpha = fock::Amplitude::from_mean_photons(4.0, 0.0);
        const int dim = fock::truncation_dim(4.0, 1e-12) + 1;
        const auto rho = ensemble::rho_direct(alpha, 1, dim);
        for (int n = 0; n + 2 < dim; ++n) {
            CHECK(rho.entry(n, n).real() == Approx(poisson_pmf(4.0, n)).epsilon(1e-10));
            // even coherences present, odd coherences cancelled
            CHECK(std::abs(rho.entry(n, n + 2)) > 0.0);
            CHECK(std::abs(rho.entry(n, n + 1)) < 1e-14);
        }
    }
    SECTION("trace stays within the truncation budget") {
        const auto alpha = fock::Amplitude::from_mean_photons(1.0, 0.0);
        const int dim = fock::truncation_dim(1.0, 1e-12) + 1;
        const auto rho = ensemble::rho_direct(alpha, 8, dim);
        CHECK(rho.trace() <= 1.0);
        CHECK(rho.trace() >= 1.0 - 1e-11);
    }
    SECTION("Poisson diagonal for every M") {
        for (int M : {1, 2, 8}) {
            const auto alpha = fock::Amplitude::from_mean_photons(10.0, 0.7);
            const int dim = fock::truncation_dim(10.0, 1e-12) + 1;
            const auto rho = ensemble::rho_direct(alpha, M, dim);
            for (int n = 0; n < dim; n += 5) {
                CHECK(rho.entry(n, n).real() == Approx(poisson_pmf(10.0, n)).margin(1e-13));
                CHECK(rho.entry(n, n).imag() == 0.0);
            }
        }
    }
}

TEST_CASE("rho_closed reproduces rho_direct; the printed variant does not") {
    SECTION("oracle equivalence on a unit grid") {
        for (double mean_n : {1.0, 10.0}) {
            for (int M : {1, 2, 8, 16}) {
                const auto alpha = fock::Amplitude::from_mean_photons(mean_n, 0.7);
                const int dim = fock::truncation_dim(mean_n, 1e-12) + 1;
                const auto direct = ensemble::rho_direct(alpha, M, dim);
                const auto closed = ensemble::rho_closed(alpha, M, dim);
                CHECK(max_abs_diff(direct.matrix(), closed.matrix()) < 1e-10 * 2 * M);
            }
        }
    }
    SECTION("the pi/(2M)-step closed form is not the ensemble matrix") {
        const auto alpha = fock::Amplitude::from_mean_photons(10.0, 0.0);
        const int dim = fock::truncation_dim(10.0, 1e-12) + 1;
        const auto direct = ensemble::rho_direct(alpha, 16, dim);
        CHECK(max_abs_diff(direct.matrix(), rho_printed_variant(alpha, 16, dim)) > 1e-3);
    }
    SECTION("even off-diagonals below the 2M period vanish exactly") {
        const auto alpha = fock::Amplitude::from_mean_photons(10.0, 0.3);
        const int dim = fock::truncation_dim(10.0, 1e-12) + 1;
        const auto rho = ensemble::rho_closed(alpha, 8, dim);
        for (int n = 0; n + 14 < dim; n += 3) {
            CHECK(rho.entry(n, n + 2) == std::complex<double>(0.0, 0.0));
            CHECK(rho.entry(n, n + 14) == std::complex<double>(0.0, 0.0));
            CHECK(std::abs(rho.entry(n, n + 16)) > 0.0); // delta = 2M
        }
    }
    SECTION("off-diagonal mass decays to zero as M grows") {
        const auto alpha = fock::Amplitude::from_mean_photons(10.0, 0.0);
        const int dim = fock::truncation_dim(10.0, 1e-12) + 1;
        double prev = 1e300;
        for (int M : {1, 2, 4, 8, 16, 32}) {
            const auto rho = ensemble::rho_closed(alpha, M, dim);
            double off = 0.0;
            for (int i = 0; i < dim; ++i) {
                for (int j = i + 1; j < dim; ++j) off = std::max(off, std::abs(rho.entry(i, j)));
            }
            CHECK(off <= prev + 1e-15);
            prev = off;
            if (2 * M >= dim) CHECK(off == 0.0); // coherences fall outside the truncated space
        }
    }
}

TEST_CASE("von Neumann entropy") {
    SECTION("pure state has zero entropy") {
        const auto alpha = fock::Amplitude::from_mean_photons(5.0, 0.2);
        const int dim = fock::truncation_dim(5.0, 1e-12) + 1;
        const auto v = fock::coherent_vector(alpha, dim);
        Eigen::MatrixXcd m(dim, dim);
        for (int i = 0; i < dim; ++i) {
            for (int j = i; j < dim; ++j) {
                m(i, j) = v.coeffs[i] * std::conj(v.coeffs[j]);
                m(j, i) = std::conj(m(i, j));
            }
        }
        CHECK(ensemble::von_neumann_entropy(ensemble::DensityMatrix(m)) == Approx(0.0).margin(1e-9));
    }
    SECTION("equal mixture of quasi-orthogonal states gives ln 2") {
        const auto alpha = fock::Amplitude::from_mean_photons(200.0, 0.0);
        const int dim = fock::truncation_dim(200.0, 1e-12) + 1;
        const double s = ensemble::von_neumann_entropy(ensemble::rho_direct(alpha, 1, dim));
        CHECK(s == Approx(std::numbers::ln2).margin(1e-6));
    }
    SECTION("two-state Gram oracle at moderate overlap") {
        // eigenvalues of (|a><a| + |-a><-a|)/2 are (1 +- |<a|-a>|)/2
        const double mean_n = 2.0;
        const double overlap = std::exp(-2.0 * mean_n);
        const double e1 = 0.5 * (1.0 + overlap);
        const double e2 = 0.5 * (1.0 - overlap);
        const double expected = -(e1 * std::log(e1) + e2 * std::log(e2));
        const auto alpha = fock::Amplitude::from_mean_photons(mean_n, 0.0);
        const int dim = fock::truncation_dim(mean_n, 1e-12) + 1;
        const double s = ensemble::von_neumann_entropy(ensemble::rho_direct(alpha, 1, dim));
        CHECK(s == Approx(expected).margin(1e-9));
    }
    SECTION("maximally mixed 2x2") {
        Eigen::MatrixXcd m = 0.5 * Eigen::MatrixXcd::Identity(2, 2);
        CHECK(ensemble::von_neumann_entropy(ensemble::DensityMatrix(m)) ==
              Approx(std::numbers::ln2).epsilon(1e-12));
    }
    SECTION("rejects spectra with genuinely negative eigenvalues") {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
        m(0, 0) = 1.5;
        m(1, 1) = -0.5;
        CHECK_THROWS_AS(ensemble::von_neumann_entropy(ensemble::DensityMatrix(m)), std::domain_error);
    }
    SECTION("deterministic for a fixed input") {
        const auto alpha = fock::Amplitude::from_mean_photons(10.0, 0.0);
        const int dim = fock::truncation_dim(10.0, 1e-12) + 1;
        const auto rho = ensemble::rho_closed(alpha, 4, dim);
        CHECK(ensemble::von_neumann_entropy(rho) == ensemble::von_neumann_entropy(rho));
    }
}

TEST_CASE("entropy does not depend on the reference phase") {
    const int dim = fock::truncation_dim(10.0, 1e-12) + 1;
    const double s0 = ensemble::von_neumann_entropy(
        ensemble::rho_closed(fock::Amplitude::from_mean_photons(10.0, 0.0), 4, dim));
    for (double theta : {0.4, 1.234, 3.9}) {
        const double s = ensemble::von_neumann_entropy(
            ensemble::rho_closed(fock::Amplitude::from_mean_photons(10.0, theta), 4, dim));
        CHECK(s == Approx(s0).margin(1e-9));
        const double sd = ensemble::von_neumann_entropy(
            ensemble::rho_direct(fock::Amplitude::from_mean_photons(10.0, theta), 4, dim));
        CHECK(sd == Approx(s0).margin(1e-9));
    }
}

TEST_CASE("poisson_entropy_bound") {
    SECTION("deterministic vacuum limit") {
        CHECK(ensemble::poisson_entropy_bound(1e-9, 4) < 1e-6);
    }
    SECTION("Gaussian asymptote at mean_n = 200") {
        const int dim = fock::truncation_dim(200.0, 1e-12) + 1;
        const double h = ensemble::poisson_entropy_bound(200.0, dim);
        const double asym = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * 200.0);
        CHECK(std::abs(h - asym) / asym < 0.02);
    }
    SECTION("dominates the von Neumann entropy") {
        for (double mean_n : {1.0, 10.0, 50.0}) {
            const int dim = fock::truncation_dim(mean_n, 1e-12) + 1;
            const double bound = ensemble::poisson_entropy_bound(mean_n, dim);
            for (int M : {1, 2, 8, 32}) {
                const auto alpha = fock::Amplitude::from_mean_photons(mean_n, 0.0);
                const double s = ensemble::von_neumann_entropy(ensemble::rho_closed(alpha, M, dim));
                CHECK(s <= bound + 1e-6);
            }
        }
    }
}

TEST_CASE("entropy_scan") {
    const auto alpha = fock::Amplitude::from_mean_photons(10.0, 0.0);
    const std::vector<int> Ms{1, 2, 4, 8, 16, 32, 64};
    const auto reports = ensemble::entropy_scan(alpha, Ms);
    REQUIRE(reports.size() == Ms.size());
    CHECK(reports.front().entropy_nats == Approx(std::numbers::ln2).margin(2e-2));
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        CHECK(r.M == Ms[i]);
        CHECK(r.entropy_bits == Approx(r.entropy_nats / std::numbers::ln2).epsilon(1e-14));
        CHECK(r.log2_2M == Approx(std::log2(2.0 * r.M)).epsilon(1e-14));
        CHECK(r.shannon_basis_entropy_bits == Approx(std::log2(static_cast<double>(r.M))).margin(1e-14));
        CHECK(r.entropy_nats <= r.poisson_bound_nats + 1e-6);
        if (i > 0) CHECK(r.entropy_nats >= reports[i - 1].entropy_nats - 1e-9);
        if (r.M > 1) CHECK(r.margin == Approx(r.entropy_bits / std::log2(double(r.M))).epsilon(1e-14));
    }
    CHECK(std::isinf(reports.front().margin)); // margin divides by log2(1) at M = 1

    CHECK_THROWS_AS(ensemble::entropy_scan(alpha, {4, 2}), std::invalid_argument);
    CHECK_THROWS_AS(ensemble::entropy_scan(alpha, {}), std::invalid_argument);
}

TEST_CASE("smax_scan finds plateaus") {
    const auto points = ensemble::smax_scan({8.0, 16.0}, 1e-4);
    REQUIRE(points.size() == 2);
    CHECK(points[0].s_max_nats < points[1].s_max_nats);
    for (const auto& p : points) {
        CHECK(p.s_max_nats <= p.poisson_bound_nats + 1e-6);
        CHECK(p.m_at_plateau >= 2);
        CHECK(p.m_at_plateau <= ensemble::kDefaultMCap);
    }
    SECTION("non-convergence is an error") {
        CHECK_THROWS_AS(ensemble::smax_scan({8.0}, 1e-18, 4), std::runtime_error);
    }
}

TEST_CASE("density matrix construction guards") {
    Eigen::MatrixXcd bad(2, 2);
    bad << 1.0, std::complex<double>(0.0, 0.5), std::complex<double>(0.0, 0.5), 0.0;
    CHECK_THROWS_AS(ensemble::DensityMatrix(bad), std::invalid_argument);
    CHECK_THROWS_AS(ensemble::rho_closed(fock::Amplitude(1.0, 0.0), 0, 4), std::invalid_argument);
}

TEST_CASE("scan CSV serialization carries the documented headers") {
    const auto alpha = fock::Amplitude::from_mean_photons(8.0, 0.0);
    const auto csv = ensemble::to_csv(ensemble::entropy_scan(alpha, {1, 2}));
    CHECK(csv.rfind("mean_n,M,entropy_nats,entropy_bits,log2_2M,margin,poisson_bound_nats\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    const auto csv2 = ensemble::to_csv(ensemble::smax_scan({8.0}, 1e-3));
    CHECK(csv2.rfind("mean_n,ln_mean_n,S_max_nats,poisson_bound_nats,M_at_plateau\n", 0) == 0);
    CHECK(std::count(csv2.begin(), csv2.end(), '\n') == 2);
}
