#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "speclab/ensembles.hpp"
#include "speclab/spectral.hpp"

using namespace speclab;

namespace {
Spectrum spec_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return Spectrum{std::move(v), "test"};
}
}  // namespace

TEST_CASE("eigenvalues: diagonal, single-qubit X, ZZ + XI closed form", "[spectral]") {
    DenseMatrix D = DenseMatrix::Zero(3, 3);
    D(0, 0) = 3;
    D(1, 1) = 1;
    D(2, 2) = 2;
    const Spectrum s = eigenvalues(D);
    REQUIRE(s.values == std::vector<double>{1.0, 2.0, 3.0});

    const Spectrum x = eigenvalues(PauliString::parse("+X").to_dense());
    REQUIRE(std::abs(x.values[0] + 1.0) < 1e-14);
    REQUIRE(std::abs(x.values[1] - 1.0) < 1e-14);

    // ZZ and XI anticommute, so H^2 = 2I: eigenvalues +-sqrt(2), twice each
    const DenseMatrix H =
        PauliString::parse("+ZZ").to_dense() + PauliString::parse("+XI").to_dense();
    const Spectrum zz = eigenvalues(H);
    const double r = std::sqrt(2.0);
    REQUIRE(std::abs(zz.values[0] + r) < 1e-12);
    REQUIRE(std::abs(zz.values[1] + r) < 1e-12);
    REQUIRE(std::abs(zz.values[2] - r) < 1e-12);
    REQUIRE(std::abs(zz.values[3] - r) < 1e-12);
}

TEST_CASE("eigenvalues rejects non-Hermitian input and oversized problems", "[spectral]") {
    DenseMatrix M = DenseMatrix::Zero(2, 2);
    M(0, 1) = 1.0;  // not Hermitian
    REQUIRE_THROWS_AS(eigenvalues(M), DomainError);
    REQUIRE_THROWS_AS(eigenvalues(DenseMatrix::Identity(8, 8), 4), ResourceError);
}

TEST_CASE("schatten_p_norm examples and properties", "[spectral]") {
    REQUIRE(schatten_p_norm(spec_of({1, 1, 1, 1}), 7) == 1.0);
    REQUIRE(schatten_p_norm(spec_of({2, 0, 0, 0}), 2) == 1.0);
    REQUIRE(schatten_p_norm(spec_of({-3, 1, 2}), kInfNorm) == 3.0);

    const Spectrum s = eigenvalues(sample_gue(32, std::uint64_t{4}));
    double prev = 0.0;
    for (double p : {1.0, 2.0, 3.0, 4.0, 8.0, 16.0, 64.0}) {
        const double v = schatten_p_norm(s, p);
        REQUIRE(v >= prev - 1e-12);  // monotone nondecreasing in p
        prev = v;
    }
    const double sup = schatten_p_norm(s, kInfNorm);
    REQUIRE(prev <= sup + 1e-12);
    REQUIRE(sup <= prev * std::pow(32.0, 1.0 / 64.0) + 1e-12);  // -> max|lambda|
}

TEST_CASE("mean GUE 2-norm at N=512 is 1.00 +- 0.02", "[spectral]") {
    double acc = 0;
    const int draws = 40;
    for (int d = 0; d < draws; ++d)
        acc += schatten_p_norm(eigenvalues(sample_gue(512, static_cast<std::uint64_t>(d))), 2);
    REQUIRE(std::abs(acc / draws - 1.0) < 0.02);
}

TEST_CASE("resolvent_trace_moment hand values and uniform bound", "[spectral]") {
    REQUIRE(resolvent_trace_moment(spec_of({0.7}), {0.7, 1.0, 2}) == 1.0);
    REQUIRE(std::abs(resolvent_trace_moment(spec_of({-1, 1}), {0.0, 1.0, 2}) - 0.5) < 1e-15);

    // all eigenvalues at distance >= 10 eta: value <= (10 eta)^{-p}
    const Spectrum far = spec_of({2.0, 2.5, 3.0});
    const double eta = 0.2;
    REQUIRE(resolvent_trace_moment(far, {0.0, eta, 4}) <= std::pow(10.0 * eta, -4.0));

    const Spectrum s = eigenvalues(sample_gue(64, std::uint64_t{11}));
    for (const double w : {-1.5, 0.0, 0.9})
        REQUIRE(resolvent_trace_moment(s, {w, 0.3, 6}) <= std::pow(0.3, -6.0) * (1 + 1e-12));
    REQUIRE_THROWS_AS(resolvent_trace_moment(s, {0.0, -1.0, 2}), DomainError);
    REQUIRE_THROWS_AS(resolvent_trace_moment(s, {0.0, 1.0, 3}), DomainError);
}

TEST_CASE("semicircle density, cdf, and mass", "[spectral]") {
    REQUIRE(std::abs(semicircle_density(0.0) - 1.0 / std::numbers::pi) < 1e-15);
    REQUIRE(semicircle_cdf(-2.0) == 0.0);
    REQUIRE(semicircle_cdf(2.0) == 1.0);
    REQUIRE(std::abs(semicircle_mass(-2, 2) - 1.0) < 1e-15);

    // the eps = 0.2 low-energy mass, vs the independent Simpson oracle
    const double mass = semicircle_mass(-2.0, -1.6);
    REQUIRE(std::abs(mass - 0.05203) < 1e-4);
    const double oracle = oracles::simpson(semicircle_density, -2.0, -1.6, 1e-12);
    REQUIRE(std::abs(mass - oracle) < 1e-8);

    const double total = oracles::simpson(semicircle_density, -2.0, 2.0, 1e-12);
    REQUIRE(std::abs(total - 1.0) < 1e-10);
}

TEST_CASE("semicircle resolvent moment: golden value, far-field limit, p = 0", "[spectral]") {
    // closed form: int rho_sc/(x^2+1) dx = (sqrt(5)-1)/2
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    REQUIRE(std::abs(semicircle_resolvent_moment({0.0, 1.0, 2}) - golden) < 1e-8);

    REQUIRE(std::abs(semicircle_resolvent_moment({0.0, 100.0, 2}) - 1e-4) < 1e-6);
    REQUIRE(std::abs(semicircle_resolvent_moment({0.3, 7.0, 0}) - 1.0) < 1e-10);

    // independent Simpson oracle at a generic query
    const ResolventQuery q{0.3, 0.25, 6};
    const double want = oracles::simpson(
        [&](double x) {
            const double d = x - q.omega;
            return semicircle_density(x) * std::pow(d * d + q.eta * q.eta, -3.0);
        },
        -2.0, 2.0, 1e-13);
    REQUIRE(std::abs(semicircle_resolvent_moment(q) - want) < 1e-6 * want);
}

TEST_CASE("empirical_cdf_distance is exact on semicircle quantile spectra", "[spectral]") {
    for (const int N : {4, 2000}) {
        std::vector<double> q(static_cast<size_t>(N));
        for (int i = 0; i < N; ++i) {
            // invert the CDF by bisection
            double lo = -2, hi = 2;
            const double target = (i + 0.5) / N;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                (semicircle_cdf(mid) < target ? lo : hi) = mid;
            }
            q[static_cast<size_t>(i)] = 0.5 * (lo + hi);
        }
        const double d = empirical_cdf_distance(spec_of(q));
        REQUIRE(std::abs(d - 0.5 / N) < 1e-9);  // exactly 1/(2N) at the quantiles
    }
}

TEST_CASE("GUE cdf distance scales like a power of N (within factor 3 of sqrt)", "[spectral]") {
    auto mean_distance = [](std::int64_t N, int draws, std::uint64_t seed0) {
        double acc = 0;
        for (int d = 0; d < draws; ++d)
            acc += empirical_cdf_distance(eigenvalues(sample_gue(N, seed0 + static_cast<std::uint64_t>(d))));
        return acc / draws;
    };
    const double d256 = mean_distance(256, 10, 100);
    const double d1024 = mean_distance(1024, 10, 200);
    const double ratio = d256 / d1024;
    // spec invariant: proportional to N^{-1/2} within factor 3 per 4x step
    REQUIRE(ratio > 2.0 / 3.0);
    REQUIRE(ratio < 6.0);
}

TEST_CASE("per-draw GUE p-norm bound at p = 2 ceil(log N)", "[spectral]") {
    const std::int64_t N = 128;
    const int p = 2 * static_cast<int>(std::ceil(std::log(static_cast<double>(N))));
    const double bound = 2.0 * (1.0 + std::pow(p / 2.0, 0.75) / std::sqrt(static_cast<double>(N)));
    for (int d = 0; d < 20; ++d) {
        const double norm =
            schatten_p_norm(eigenvalues(sample_gue(N, static_cast<std::uint64_t>(700 + d))), p);
        REQUIRE(norm <= bound * 1.05);  // Monte Carlo slack
    }
}

TEST_CASE("low_energy_fraction thresholds", "[spectral]") {
    const Spectrum s = spec_of({-1.9, 0.0, 1.9});
    REQUIRE(low_energy_fraction(s, 0.01) == 0.0);  // threshold below lambda_min
    const Spectrum sym = spec_of({-1.0, -0.5, 0.5, 1.0});
    REQUIRE(low_energy_fraction(sym, 1.0) == 0.5);  // threshold 0, symmetric
    REQUIRE(std::abs(low_energy_fraction(spec_of({-1.7, -1.5, 0, 1}), 0.2) - 0.25) < 1e-15);
    REQUIRE_THROWS_AS(low_energy_fraction(s, 0.0), DomainError);
}

TEST_CASE("Lanczos norm estimate: exact cases and the dense oracle", "[spectral]") {
    SparsePauliSum zz(2);
    zz.add_term(1.0, PauliString::parse("+ZZ"));
    const auto r1 = spectral_norm_estimate(zz);
    REQUIRE(std::abs(r1.value - 1.0) < 1e-10);
    REQUIRE(r1.converged);

    SparsePauliSum xz(1);  // (X + Z)/sqrt(2): eigenvalues +-1
    xz.add_term(1.0 / std::sqrt(2.0), PauliString::parse("+X"));
    xz.add_term(1.0 / std::sqrt(2.0), PauliString::parse("+Z"));
    REQUIRE(std::abs(spectral_norm_estimate(xz).value - 1.0) < 1e-10);

    const auto H = sample_pauli_string_ensemble(8, 60, 2024);
    const Spectrum s = eigenvalues(H);
    const double exact = std::max(std::abs(s.lambda_min()), std::abs(s.lambda_max()));
    const auto est = spectral_norm_estimate(H, 1e-8, 256);
    REQUIRE(std::abs(est.value - exact) < 1e-6);
    REQUIRE(est.lambda_min <= est.lambda_max);

    REQUIRE_THROWS_AS(spectral_norm_estimate(H, 1e-12, 3), NumericError);
    try {
        spectral_norm_estimate(H, 1e-12, 3);
    } catch (const NumericError& e) {
        REQUIRE(e.best_estimate > 0.0);  // carries the best estimate
    }
}
