#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "speclab/universality.hpp"

using namespace speclab;

TEST_CASE("evaluate_bounds: trivial zeros and the thm3_4 hand value", "[universality]") {
    UniversalityBoundInputs in;
    in.p = 4;
    in.t = 2;
    in.L_p_t1 = 0.0;
    in.L_p_p = 0.0;
    REQUIRE(evaluate_bounds(in, BoundFormula::thm3_3) == 0.0);

    UniversalityBoundInputs r;
    r.t = 3;
    r.p = 4;
    r.eta = 1.0;
    r.m = 4;
    r.L_3p_inf = 0.5;
    REQUIRE(std::abs(evaluate_bounds(r, BoundFormula::thm3_4) - 32.0) < 1e-12);  // (1+1)(4*0.5)^4

    UniversalityBoundInputs z;
    z.p = 6;
    z.eta = 0.5;
    z.v = 0.0;
    z.L_inf = 0.0;
    REQUIRE(evaluate_bounds(z, BoundFormula::thm4_1_resolvent) == 0.0);
    REQUIRE(evaluate_bounds(z, BoundFormula::thm4_1_moments) == 0.0);

    UniversalityBoundInputs a;
    a.t = 3;
    a.p = 4;
    a.q = 2;
    a.eta = 1.0;
    a.m = 8;
    a.L_3pq_inf = 0.25;
    // (1 + 8/8) * (4*2*0.25)^4 = 2 * 16
    REQUIRE(std::abs(evaluate_bounds(a, BoundFormula::thmA_expected_resolvent) - 32.0) < 1e-12);
}

TEST_CASE("pauli_bound_inputs carries the exact summand statistics", "[universality]") {
    const int n = 6, m = 64, p = 8;
    const auto in = pauli_bound_inputs(n, m, p);
    const double u = 1.0 / 8.0;  // 1/sqrt(64)
    REQUIRE(in.L_inf == u);
    REQUIRE(in.L_3p_inf == u);
    REQUIRE(std::abs(in.L_p_p - std::pow(64.0, 1.0 / 8.0) * u) < 1e-15);
    REQUIRE(std::abs(in.L_p_t1 - std::pow(64.0, 0.25) * u) < 1e-15);
    REQUIRE(in.sigma2 == 1.0);
    REQUIRE(in.v == 1.0);
    REQUIRE(in.sigma_star2 == 1.0 / (64.0 * 64.0));

    // per-instance assertion: every summand has operator norm 1/sqrt(m) exactly
    const auto H = sample_pauli_string_ensemble(n, m, 1);
    for (const auto& t : H.terms()) REQUIRE(std::abs(t.coeff) == u);
    // and a Pauli string has unit operator norm (dense check at small n)
    const auto small = sample_pauli_string_ensemble(3, 5, 2);
    for (const auto& t : small.terms()) {
        const Spectrum s = eigenvalues(oracles::pauli_dense(t.string));
        REQUIRE(std::abs(std::max(std::abs(s.lambda_min()), std::abs(s.lambda_max())) - 1.0) < 1e-12);
    }
}

TEST_CASE("sigma*^2 = 1/(mN): Monte Carlo oracle for the summand weak variance",
          "[universality]") {
    // E_sigma |<u|sigma|v>|^2 = 1/N for fixed unit u, v
    const int n = 3;
    const std::int64_t N = 8;
    RngStream s(5);
    StateVector u(N), v(N);
    for (int i = 0; i < N; ++i) {
        u[i] = Complex(s.normal(), s.normal());
        v[i] = Complex(s.normal(), s.normal());
    }
    u.normalize();
    v.normalize();
    const int draws = 40000;
    double acc = 0;
    for (int d = 0; d < draws; ++d) {
        RngStream t = s.child(static_cast<std::uint64_t>(d));
        const auto p = sample_pauli_string_ensemble(n, 1, t).terms()[0].string;
        acc += std::norm(u.dot(p.apply(v)));
    }
    const double mean = acc / draws;
    REQUIRE(std::abs(mean - 1.0 / static_cast<double>(N)) <
            4.0 / (static_cast<double>(N) * std::sqrt(static_cast<double>(draws))));
}

TEST_CASE("moment matching: exhaustive at N <= 4 is exact", "[universality]") {
    for (const int N : {2, 3, 4}) {
        REQUIRE(moment_matching_check(N, 1, MomentCheckMode::exhaustive) < 1e-13);
        REQUIRE(moment_matching_check(N, 2, MomentCheckMode::exhaustive) < 1e-13);
        REQUIRE(moment_matching_check(N, 3, MomentCheckMode::exhaustive) < 1e-13);
    }
    REQUIRE_THROWS_AS(moment_matching_check(5, 2, MomentCheckMode::exhaustive), ResourceError);
    REQUIRE_THROWS_AS(moment_matching_check(3, 4, MomentCheckMode::exhaustive), DomainError);
}

TEST_CASE("moment matching: Monte Carlo mode converges", "[universality]") {
    REQUIRE(moment_matching_check(5, 2, MomentCheckMode::monte_carlo, 40000, 3) < 0.02);
    REQUIRE(moment_matching_check(5, 1, MomentCheckMode::monte_carlo, 40000, 3) < 0.02);
}

TEST_CASE("GUE second moment reference equals the Monte Carlo average", "[universality]") {
    const int N = 3;
    DenseMatrix acc = DenseMatrix::Zero(N * N, N * N);
    const int draws = 4000;
    for (int d = 0; d < draws; ++d) {
        const DenseMatrix H = sample_gue(N, static_cast<std::uint64_t>(d));
        acc += kron(H, H);
    }
    acc /= draws;
    REQUIRE((acc - gue_moment_reference(N, 2)).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("moment comparison: p=2 difference is statistically zero", "[universality]") {
    MomentComparisonParams prm;
    prm.n = 5;
    prm.p = 2;
    prm.m_grid = {16, 64};
    prm.trials = 200;
    prm.seed = 11;
    prm.threads = 2;
    const auto records = moment_comparison_experiment(prm);
    REQUIRE(records.size() == 2);
    for (const auto& r : records) {
        REQUIRE(r.difference <= 3.0 * r.std_error);
        REQUIRE(r.bound > 0.0);
        REQUIRE(r.trials == 200);
    }
    REQUIRE(std::isnan(records[0].trend_delta));
    REQUIRE(std::isfinite(records[1].trend_delta));
    REQUIRE(records[1].trend_se > 0.0);
}

TEST_CASE("moment comparison is deterministic and thread-count independent", "[universality]") {
    MomentComparisonParams prm;
    prm.n = 4;
    prm.p = 4;
    prm.m_grid = {8, 32};
    prm.trials = 24;
    prm.seed = 7;
    prm.threads = 1;
    const auto a = moment_comparison_experiment(prm);
    prm.threads = 4;
    const auto b = moment_comparison_experiment(prm);
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].lhs_a == b[i].lhs_a);
        REQUIRE(a[i].lhs_b == b[i].lhs_b);
        REQUIRE(a[i].std_error == b[i].std_error);
    }
}

TEST_CASE("huge m: measured difference sits below the unit-constant envelope", "[universality]") {
    MomentComparisonParams prm;
    prm.n = 5;
    prm.p = 4;
    prm.m_grid = {1024};  // m = 2^{2n}
    prm.trials = 100;
    prm.seed = 33;
    prm.threads = 2;
    const auto r = moment_comparison_experiment(prm)[0];
    REQUIRE(r.difference < r.bound);
}

TEST_CASE("norm tail: trivial regimes and the default-m policy", "[universality]") {
    REQUIRE(norm_tail_default_m(8, 0.5) == 8192);  // ceil(n^3/eps^4)
    // threshold 3.0 above the free bound sqrt(m) = 2: frequency is exactly 0
    const auto r = norm_tail_experiment(4, 0.5, 4, 50, 99);
    REQUIRE(r.exceedances == 0);
    REQUIRE(r.frequency == 0.0);
    REQUIRE(r.threshold == 3.0);
    REQUIRE_THROWS_AS(norm_tail_experiment(4, 0.6, 4, 10, 1), DomainError);
}

TEST_CASE("resolvent comparison: far-field eta matches the semicircle within 5%",
          "[universality]") {
    ResolventComparisonParams prm;
    prm.n = 4;
    prm.p = 4;
    prm.eta = 10.0;
    prm.omega_grid = {0.0};
    prm.m_grid = {64};
    prm.trials = 50;
    prm.seed = 21;
    prm.threads = 2;
    const auto records = resolvent_comparison_experiment(prm);
    REQUIRE(records.size() == 1);
    const auto& r = records[0];
    // reference is the moment-scale S_{omega,eta,p}; the lhs columns are its
    // p-th root scale
    REQUIRE(std::abs(std::pow(r.lhs_a, prm.p) - r.reference) < 0.05 * r.reference);
    REQUIRE(std::abs(std::pow(r.lhs_b, prm.p) - r.reference) < 0.05 * r.reference);
    REQUIRE(r.lhs_a <= 1.0 / prm.eta + 1e-12);  // uniform resolvent bound
    REQUIRE(r.lhs_b <= 1.0 / prm.eta + 1e-12);
}

TEST_CASE("telescope: boundaries, p=2 increments vanish, identity is exact", "[universality]") {
    const int n = 4, m = 6, trials = 60;
    const auto r2 = lindeberg_telescope_experiment(n, m, 2, trials, 31, 2);
    REQUIRE(r2.steps.size() == static_cast<size_t>(m + 1));
    for (int j = 1; j <= m; ++j) {
        const auto& st = r2.steps[static_cast<size_t>(j)];
        REQUIRE(std::abs(st.mean_increment) <= 3.5 * st.se_increment + 1e-12);
    }
    REQUIRE(r2.max_telescope_defect < 1e-12);
    REQUIRE(std::abs(r2.sum_of_increments - r2.endpoint_difference) < 1e-12);

    const auto r4 = lindeberg_telescope_experiment(n, m, 4, trials, 32, 2);
    // j=0 endpoint is the Pauli moment, j=m the GUE moment: tr_bar H^4 for the
    // GUE is near the Catalan number 2 at large N; both must be O(1) here
    REQUIRE(r4.steps.front().mean_moment > 0.5);
    REQUIRE(r4.steps.back().mean_moment > 0.5);
    REQUIRE(r4.max_telescope_defect < 1e-12);
}

TEST_CASE("concentration record: exact sigma*^2 and bound terms", "[universality]") {
    const auto r = resolvent_concentration_experiment(4, 8, 4, 0.0, 0.5, 40, 41, 2);
    REQUIRE(r.sigma_star_sq == 1.0 / (8.0 * 16.0));
    REQUIRE(r.mean > 0.0);
    REQUIRE(r.stddev > 0.0);  // m=8 fluctuates
    REQUIRE(r.rel_fluctuation == r.stddev / r.mean);
    // exact closed forms of the Pauli bound-side quantities
    REQUIRE(std::abs(r.bound_term_norm4 - std::sqrt(2.0) * 16.0 / 0.25 / std::sqrt(8.0)) < 1e-12);
    REQUIRE(std::abs(r.bound_term_sigma - std::sqrt(2.0) * 4.0 / 0.25 / 4.0) < 1e-12);
    REQUIRE(std::abs(r.bound_term_max - 2.0 * 4.0 / 0.5 * std::pow(8.0, 0.5) / std::sqrt(8.0)) <
            1e-12);

    // single-term ensemble: fluctuation is the population std, nonzero
    const auto one = resolvent_concentration_experiment(3, 1, 2, 0.0, 0.4, 60, 42);
    REQUIRE(one.stddev > 0.0);
}
