#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "phaseflip/measurement.hpp"

using namespace phaseflip;
using Catch::Approx;

namespace {

// Independent oracle: Poisson CDF by long-double term summation.
long double poisson_cdf_sum(long k, double mean) {
    if (k < 0) return 0.0L;
    long double p = std::exp(-static_cast<long double>(mean));
    long double cdf = p;
    for (long n = 1; n <= k; ++n) {
        p *= static_cast<long double>(mean) / n;
        cdf += p;
    }
    return cdf;
}

double three_sigma(double p, double n) { return 3.0 * std::sqrt(p * (1.0 - p) / n); }

} // namespace

TEST_CASE("discriminate") {
    SECTION("perfect discrimination never flips") {
        RngStream rng(7, "disc-perfect");
        for (int i = 0; i < 10'000; ++i) {
            CHECK(measurement::discriminate(i & 1, 0.0, rng) == (i & 1));
        }
    }
    SECTION("coin-flip limit") {
        RngStream rng(7, "disc-coin");
        const int n = 100'000;
        int flips = 0;
        for (int i = 0; i < n; ++i) {
            if (measurement::discriminate(0, 0.5, rng) == 1) ++flips;
        }
        CHECK(std::abs(flips / double(n) - 0.5) < three_sigma(0.5, n));
    }
    SECTION("matches the Helstrom error for F = e^-4") {
        const double err = fock::helstrom_error(std::exp(-4.0));
        RngStream rng(11, "disc-helstrom");
        const int n = 200'000;
        int flips = 0;
        for (int i = 0; i < n; ++i) {
            if (measurement::discriminate(1, err, rng) == 0) ++flips;
        }
        CHECK(std::abs(flips / double(n) - err) < three_sigma(err, n));
    }
    SECTION("argument guards") {
        RngStream rng(1, "g");
        CHECK_THROWS_AS(measurement::discriminate(2, 0.1, rng), std::invalid_argument);
        CHECK_THROWS_AS(measurement::discriminate(0, 0.6, rng), std::invalid_argument);
    }
}

TEST_CASE("basis readout probability") {
    const double pi = std::numbers::pi;
    SECTION("reduces to the Helstrom error at the basis states") {
        for (double mean_n : {0.5, 2.0, 100.0}) {
            const double hel = fock::helstrom_error(fock::fidelity(mean_n, pi));
            CHECK(measurement::basis_readout_one_prob(mean_n, 0.0) == Approx(hel).margin(1e-12));
            CHECK(measurement::basis_readout_one_prob(mean_n, pi) == Approx(1.0 - hel).margin(1e-12));
        }
    }
    SECTION("equidistant state is a coin flip") {
        CHECK(measurement::basis_readout_one_prob(3.0, pi / 2) == Approx(0.5).margin(1e-9));
    }
    SECTION("vacuum limit carries no information") {
        CHECK(measurement::basis_readout_one_prob(1e-12, 0.7) == Approx(0.5).margin(1e-5));
    }
    SECTION("mesoscopic slightly-off-basis readout") {
        // one grid step off at M = 64: error ~ (1 - F(pi/64))/2
        const double p1 = measurement::basis_readout_one_prob(100.0, pi / 64);
        CHECK(p1 == Approx(0.5 * (1.0 - fock::fidelity(100.0, pi / 64))).margin(1e-6));
    }
}

TEST_CASE("sample_photon_count statistics") {
    SECTION("mesoscopic mean and variance") {
        RngStream rng(3, "poisson-100");
        const int n = 100'000;
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = static_cast<double>(measurement::sample_photon_count(100.0, rng));
            sum += x;
            sumsq += x * x;
        }
        const double mean = sum / n;
        const double var = sumsq / n - mean * mean;
        CHECK(std::abs(mean - 100.0) < 3.0 * std::sqrt(100.0 / n));
        CHECK(std::abs(var - mean) / mean < 0.05); // Poisson equidispersion
    }
    SECTION("small-mean sampler agrees with the exact CDF") {
        RngStream rng(5, "poisson-5");
        const int n = 100'000;
        std::vector<int> counts(40, 0);
        for (int i = 0; i < n; ++i) {
            const long x = measurement::sample_photon_count(5.0, rng);
            if (x < 40) ++counts[x];
        }
        double cum = 0.0;
        for (long k = 0; k < 12; ++k) {
            cum += counts[k] / double(n);
            const double expected = static_cast<double>(poisson_cdf_sum(k, 5.0));
            CHECK(std::abs(cum - expected) < three_sigma(expected, n) + 1e-9);
        }
    }
    SECTION("large-mean sampler agrees with the exact CDF at quantiles") {
        RngStream rng(6, "poisson-200");
        const int n = 50'000;
        int below_200 = 0, below_180 = 0;
        for (int i = 0; i < n; ++i) {
            const long x = measurement::sample_photon_count(200.0, rng);
            if (x <= 200) ++below_200;
            if (x <= 180) ++below_180;
        }
        const double p200 = measurement::poisson_cdf(200, 200.0);
        const double p180 = measurement::poisson_cdf(180, 200.0);
        CHECK(std::abs(below_200 / double(n) - p200) < three_sigma(p200, n));
        CHECK(std::abs(below_180 / double(n) - p180) < three_sigma(p180, n));
    }
    SECTION("near-vacuum draws are almost surely zero") {
        RngStream rng(9, "poisson-vac");
        const int n = 100'000;
        int zeros = 0;
        for (int i = 0; i < n; ++i) {
            if (measurement::sample_photon_count(0.001, rng) == 0) ++zeros;
        }
        CHECK(zeros / double(n) >= 0.998);
    }
}

TEST_CASE("poisson_cdf matches direct summation") {
    for (double mean : {0.5, 3.0, 25.0}) {
        for (long k = 0; k < 40; k += 3) {
            CHECK(measurement::poisson_cdf(k, mean) ==
                  Approx(static_cast<double>(poisson_cdf_sum(k, mean))).margin(1e-12));
        }
    }
    CHECK(measurement::poisson_cdf(-1, 5.0) == 0.0);
}

TEST_CASE("verify_pulse") {
    SECTION("untampered pulse always passes") {
        RngStream rng(21, "verify-honest");
        const CoherentPulse p{0, 100.0, 1.25, Provenance::honest};
        for (int i = 0; i < 10'000; ++i) {
            CHECK(measurement::verify_pulse(1.25, p, rng).passed);
        }
    }
    SECTION("substituted phase one grid step off") {
        const double pi = std::numbers::pi;
        const double expect = std::exp(-400.0 * std::pow(std::sin(pi / 128.0), 2));
        RngStream rng(22, "verify-offgrid");
        const CoherentPulse p{3, 100.0, pi / 64.0, Provenance::substituted};
        const int n = 100'000;
        int passed = 0;
        for (int i = 0; i < n; ++i) {
            if (measurement::verify_pulse(0.0, p, rng).passed) ++passed;
        }
        CHECK(expect == Approx(0.7859133306624098).epsilon(1e-12));
        CHECK(std::abs(passed / double(n) - expect) < three_sigma(expect, n));
    }
    SECTION("orthogonal substitution never passes") {
        RngStream rng(23, "verify-flip");
        const CoherentPulse p{1, 100.0, std::numbers::pi, Provenance::substituted};
        for (int i = 0; i < 10'000; ++i) {
            CHECK_FALSE(measurement::verify_pulse(0.0, p, rng).passed);
        }
    }
    SECTION("soundness across fidelities") {
        RngStream rng(24, "verify-sound");
        for (double mean_n : {1.0, 20.0}) {
            for (double delta : {0.1, 0.5, 1.0}) {
                const double f = fock::fidelity(mean_n, delta);
                const int n = 100'000;
                int passed = 0;
                const CoherentPulse p{0, mean_n, delta, Provenance::substituted};
                for (int i = 0; i < n; ++i) {
                    if (measurement::verify_pulse(0.0, p, rng).passed) ++passed;
                }
                CHECK(std::abs(passed / double(n) - f) < three_sigma(f, n));
            }
        }
    }
}

TEST_CASE("photon_number_test") {
    SECTION("calibrated false-alarm rate under the null") {
        RngStream rng(31, "photon-null");
        const int reps = 2'000;
        int alarms = 0;
        std::vector<long> counts(128);
        for (int r = 0; r < reps; ++r) {
            for (auto& c : counts) c = measurement::sample_photon_count(100.0, rng);
            if (!measurement::photon_number_test(counts, 100.0, 0.01).passed) ++alarms;
        }
        const double rate = alarms / double(reps);
        CHECK(rate > 0.0015);
        CHECK(rate < 0.0225);
    }
    SECTION("halved intensity is caught essentially always") {
        RngStream rng(32, "photon-half");
        std::vector<long> counts(128);
        for (int r = 0; r < 100; ++r) {
            for (auto& c : counts) c = measurement::sample_photon_count(50.0, rng);
            CHECK_FALSE(measurement::photon_number_test(counts, 100.0, 0.01).passed);
        }
    }
    SECTION("power grows with the intensity gap") {
        RngStream rng(33, "photon-power-gap");
        const int reps = 500;
        std::vector<double> power;
        for (double actual : {95.0, 90.0, 80.0}) {
            std::vector<long> counts(64);
            int rejects = 0;
            for (int r = 0; r < reps; ++r) {
                for (auto& c : counts) c = measurement::sample_photon_count(actual, rng);
                if (!measurement::photon_number_test(counts, 100.0, 0.01).passed) ++rejects;
            }
            power.push_back(rejects / double(reps));
        }
        CHECK(power[0] < power[1]);
        CHECK(power[1] <= power[2]);
        CHECK(power[2] > 0.999);
    }
    SECTION("power grows with the sample size") {
        RngStream rng(34, "photon-power-size");
        const int reps = 500;
        std::vector<double> power;
        for (int n : {32, 64, 128}) {
            std::vector<long> counts(n);
            int rejects = 0;
            for (int r = 0; r < reps; ++r) {
                for (auto& c : counts) c = measurement::sample_photon_count(95.0, rng);
                if (!measurement::photon_number_test(counts, 100.0, 0.01).passed) ++rejects;
            }
            power.push_back(rejects / double(reps));
        }
        CHECK(power[0] < power[1]);
        CHECK(power[1] < power[2]);
    }
    SECTION("guards") {
        CHECK_THROWS_AS(measurement::photon_number_test({}, 100.0, 0.01), std::invalid_argument);
        const std::vector<long> counts{1, 2, 3};
        CHECK_THROWS_AS(measurement::photon_number_test(counts, -1.0, 0.01), std::invalid_argument);
        CHECK_THROWS_AS(measurement::photon_number_test(counts, 100.0, 0.0), std::invalid_argument);
    }
}

TEST_CASE("streams are deterministic and label-separated") {
    RngStream a(123, "stream");
    RngStream b(123, "stream");
    RngStream c(123, "other");
    bool all_equal = true;
    bool any_differ = false;
    for (int i = 0; i < 1'000; ++i) {
        const auto va = a.next_u64();
        if (va != b.next_u64()) all_equal = false;
        if (va != c.next_u64()) any_differ = true;
    }
    CHECK(all_equal);
    CHECK(any_differ);

    // identical draw sequences extend to the derived samplers
    RngStream p1(9, "pois");
    RngStream p2(9, "pois");
    for (int i = 0; i < 2'000; ++i) {
        CHECK(measurement::sample_photon_count(77.7, p1) == measurement::sample_photon_count(77.7, p2));
    }

    // substreams are independent of parent consumption
    RngStream parent1(5, "root");
    RngStream parent2(5, "root");
    parent2.next_u64();
    CHECK(parent1.substream("x").next_u64() == parent2.substream("x").next_u64());
}
