#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "speclab/ensembles.hpp"
#include "speclab/errors.hpp"
#include "speclab/parallel.hpp"
#include "speclab/spectral.hpp"

namespace speclab {

// ---------------------------------------------------------------------------
// Bound formulas. Suppressed absolute constants are set to 1 (documented
// policy); values are plotted as envelopes, never asserted as inequalities.
// ---------------------------------------------------------------------------

/// |[[H_PS]]_p - [[H_GUE]]_p| envelope: (p^{3/4}/m^{1/4} + p/sqrt(m)) (1 + p^{3/4}/2^{n/2}).
inline double pauli_gue_moment_envelope(int n, int m, int p) {
    const double pd = p, md = m;
    return (std::pow(pd, 0.75) / std::pow(md, 0.25) + pd / std::sqrt(md)) *
           (1.0 + std::pow(pd, 0.75) / std::pow(2.0, 0.5 * n));
}

/// |[[R_PS]]_p - [[R_GUE]]_p| envelope: (p^4/(eta^5 m^2) + p^3/(eta^5 m)) (1 + p^3/2^{2n}).
inline double pauli_gue_resolvent_envelope(int n, int m, int p, double eta) {
    const double pd = p, md = m;
    const double e5 = std::pow(eta, 5.0);
    return (std::pow(pd, 4.0) / (e5 * md * md) + std::pow(pd, 3.0) / (e5 * md)) *
           (1.0 + std::pow(pd, 3.0) / std::pow(4.0, n));
}

/// Statistics entering the universality/concentration bound formulas. Fields
/// default to NaN; the evaluator uses what the chosen formula needs. For the
/// Pauli string ensemble every summand satisfies ||A_j|| = 1/sqrt(m) exactly,
/// so every L-statistic reduces to a power of m (see pauli_bound_inputs).
struct UniversalityBoundInputs {
    double p = kNaN;          // even moment order
    double t = kNaN;          // matching order (>= 2)
    double m = kNaN;          // summand count
    double eta = kNaN;        // resolvent width
    double dim = kNaN;        // ambient dimension N
    double L_p_t1 = kNaN;     // L_{p,t+1}
    double L_p_p = kNaN;      // L_{p,p}
    double L_p_inf = kNaN;    // L_{p,infinity}
    double L_3p_inf = kNaN;   // L_{3p,infinity}
    double L_3pq_inf = kNaN;  // uniform summand norm at order 3pq
    double L_inf_inf = kNaN;  // L_{infinity,infinity}
    double L_inf = kNaN;      // max_i ||A_i||
    double sigma2 = kNaN;     // sum_i ||E A_i^2|| (both families)
    double v = kNaN;          // || sum_i E A_i^2 ||
    double q = kNaN;          // concentration moment order
    double sigma_star2 = kNaN;
};

enum class BoundFormula {
    thm3_3,                  // 2 p^{t/(t+1)} L_{p,t+1} + 2 p L_{p,p} (sigma^2 variant when set)
    thm3_4,                  // (1 + m/p)/eta * (p L_{3p,inf}/eta)^{t+1}
    thm4_1_moments,          // (p^2 v L_inf)^{1/3} + p L_inf
    thm4_1_resolvent,        // (p^2 v L_inf + p^3 L_inf^3) / eta^4
    thmA_expected_resolvent  // (1 + m/(pq))/eta * (pq L/eta)^{t+1}
};

inline double evaluate_bounds(const UniversalityBoundInputs& in, BoundFormula which) {
    switch (which) {
        case BoundFormula::thm3_3: {
            if (!(in.p >= 2) || std::fmod(in.p, 2.0) != 0.0 || !(in.t >= 2))
                throw DomainError("evaluate_bounds: thm3_3 needs even p >= 2, t >= 2");
            const double first = 2.0 * std::pow(in.p, in.t / (in.t + 1.0)) * in.L_p_t1 +
                                 2.0 * in.p * in.L_p_p;
            if (std::isfinite(in.sigma2) && std::isfinite(in.L_inf_inf)) {
                const double second =
                    2.0 * std::pow(in.p, in.t / (in.t + 1.0)) *
                        std::pow(in.sigma2 * std::pow(in.L_inf_inf, in.t - 1.0), 1.0 / (in.t + 1.0)) +
                    2.0 * in.p * in.L_p_p;
                return std::min(first, second);
            }
            return first;
        }
        case BoundFormula::thm3_4:
            if (!(in.eta > 0)) throw DomainError("evaluate_bounds: thm3_4 needs eta > 0");
            return (1.0 + in.m / in.p) / in.eta *
                   std::pow(in.p * in.L_3p_inf / in.eta, in.t + 1.0);
        case BoundFormula::thm4_1_moments:
            return std::cbrt(in.p * in.p * in.v * in.L_inf) + in.p * in.L_inf;
        case BoundFormula::thm4_1_resolvent:
            if (!(in.eta > 0)) throw DomainError("evaluate_bounds: thm4_1_resolvent needs eta > 0");
            return (in.p * in.p * in.v * in.L_inf + std::pow(in.p, 3.0) * std::pow(in.L_inf, 3.0)) /
                   std::pow(in.eta, 4.0);
        case BoundFormula::thmA_expected_resolvent: {
            if (!(in.eta > 0) || !(in.q >= 1))
                throw DomainError("evaluate_bounds: thmA needs eta > 0, q >= 1");
            const double L = std::isfinite(in.L_3pq_inf) ? in.L_3pq_inf : in.L_3p_inf;
            return (1.0 + in.m / (in.p * in.q)) / in.eta *
                   std::pow(in.p * in.q * L / in.eta, in.t + 1.0);
        }
    }
    throw DomainError("evaluate_bounds: bad formula tag");
}

/// Exact summand statistics for the Pauli string ensemble: every summand has
/// operator norm (and every normalized Schatten norm) exactly 1/sqrt(m), so
/// L_{p,k} = m^{1/k - 1/2}, sigma^2 = v = 1, sigma*^2 = 1/(mN).
inline UniversalityBoundInputs pauli_bound_inputs(int n, int m, int p, int t = 3,
                                                  double eta = kNaN, double q = kNaN) {
    UniversalityBoundInputs in;
    in.p = p;
    in.t = t;
    in.m = m;
    in.eta = eta;
    in.q = q;
    in.dim = std::pow(2.0, n);
    const double md = m;
    const double u = 1.0 / std::sqrt(md);
    in.L_p_t1 = std::pow(md, 1.0 / (t + 1.0)) * u;
    in.L_p_p = std::pow(md, 1.0 / p) * u;
    in.L_p_inf = in.L_3p_inf = in.L_3pq_inf = in.L_inf_inf = in.L_inf = u;
    in.sigma2 = 1.0;
    in.v = 1.0;
    in.sigma_star2 = 1.0 / (md * in.dim);
    return in;
}

// ---------------------------------------------------------------------------
// Comparison experiments. Monte Carlo estimates of [[.]]_p = (E tr_bar .^p)^{1/p}
// with the expectation inside the root; trials are keyed by (seed, trial) so
// fan-out over workers never changes the result, and Pauli instances across
// an m-grid share their leading terms (common random numbers).
// ---------------------------------------------------------------------------

struct ComparisonRecord {
    double m = kNaN;
    double p = kNaN;
    double eta = kNaN;
    double omega = kNaN;
    std::int64_t dim = 0;
    double lhs_a = kNaN;        // Pauli-ensemble statistic
    double lhs_b = kNaN;        // GUE statistic
    double difference = kNaN;   // |lhs_a - lhs_b|
    double std_error = kNaN;    // SE of (lhs_a - lhs_b)
    double bound = kNaN;        // unit-constant envelope
    double reference = kNaN;    // semicircle S_{omega,eta,p} (moment scale) where applicable
    double trend_delta = kNaN;  // difference(m) - difference(previous m)
    double trend_se = kNaN;     // jackknife SE of trend_delta
    std::int64_t trials = 0;
    bool low_precision = false;
};

namespace detail {

inline double root_scale_se(double mean, double se, int p) {
    // delta method for x -> x^{1/p}
    if (mean <= 0.0) return kNaN;
    return se * std::pow(mean, 1.0 / p - 1.0) / p;
}

/// Jackknife SE of |a^{1/p} - g^{1/p}| - |b^{1/p} - g^{1/p}| over paired
/// trials; a, b are the per-trial moments at two m values, g the shared GUE
/// moments.
inline double jackknife_trend_se(const std::vector<double>& a, const std::vector<double>& b,
                                 const std::vector<double>& g, int p) {
    const size_t T = a.size();
    if (T < 2) return kNaN;
    const double sa = compensated_sum(a), sb = compensated_sum(b), sg = compensated_sum(g);
    std::vector<double> loo(T);
    for (size_t t = 0; t < T; ++t) {
        const double n1 = static_cast<double>(T - 1);
        const double ma = (sa - a[t]) / n1, mb = (sb - b[t]) / n1, mg = (sg - g[t]) / n1;
        loo[t] = std::abs(std::pow(ma, 1.0 / p) - std::pow(mg, 1.0 / p)) -
                 std::abs(std::pow(mb, 1.0 / p) - std::pow(mg, 1.0 / p));
    }
    const double mean = compensated_sum(loo) / static_cast<double>(T);
    double ss = 0.0;
    for (double x : loo) ss += (x - mean) * (x - mean);
    return std::sqrt(ss * static_cast<double>(T - 1) / static_cast<double>(T));
}

}  // namespace detail

struct MomentComparisonParams {
    int n = 6;
    int p = 4;
    std::vector<int> m_grid;
    int trials = 100;
    std::uint64_t seed = 0;
    int threads = 1;
    double requested_se = 0.0;  // 0 = no request
};

inline std::vector<ComparisonRecord> moment_comparison_experiment(const MomentComparisonParams& prm) {
    if (prm.p < 2 || prm.p % 2 != 0) throw DomainError("moment_comparison: need even p >= 2");
    if (prm.m_grid.empty() || prm.trials < 2) throw DomainError("moment_comparison: empty grid or trials < 2");
    const std::int64_t N = std::int64_t{1} << prm.n;
    const size_t M = prm.m_grid.size();
    std::vector<std::vector<double>> ps(M, std::vector<double>(static_cast<size_t>(prm.trials)));
    std::vector<double> gue(static_cast<size_t>(prm.trials));
    RngStream root(prm.seed);

    parallel_for(prm.trials, prm.threads, [&](std::int64_t t) {
        RngStream trial = root.child(static_cast<std::uint64_t>(t));
        RngStream ps_stream = trial.child(0);
        RngStream gue_stream = trial.child(1);
        gue[static_cast<size_t>(t)] =
            normalized_trace_power(eigenvalues(sample_gue(N, gue_stream)), prm.p);
        for (size_t mi = 0; mi < M; ++mi) {
            const auto H = sample_pauli_string_ensemble(prm.n, prm.m_grid[mi], ps_stream);
            ps[mi][static_cast<size_t>(t)] = normalized_trace_power(eigenvalues(H), prm.p);
        }
    });

    const MeanSe g = mean_and_se(gue);
    const double lhs_b = std::pow(g.mean, 1.0 / prm.p);
    const double se_b = detail::root_scale_se(g.mean, g.se, prm.p);

    std::vector<ComparisonRecord> records(M);
    for (size_t mi = 0; mi < M; ++mi) {
        const MeanSe a = mean_and_se(ps[mi]);
        ComparisonRecord& r = records[mi];
        r.m = prm.m_grid[mi];
        r.p = prm.p;
        r.dim = N;
        r.trials = prm.trials;
        r.lhs_a = std::pow(a.mean, 1.0 / prm.p);
        r.lhs_b = lhs_b;
        r.difference = std::abs(r.lhs_a - r.lhs_b);
        const double se_a = detail::root_scale_se(a.mean, a.se, prm.p);
        r.std_error = std::sqrt(se_a * se_a + se_b * se_b);
        r.bound = pauli_gue_moment_envelope(prm.n, prm.m_grid[mi], prm.p);
        r.low_precision = prm.requested_se > 0.0 && r.std_error > prm.requested_se;
        if (mi > 0) {
            r.trend_delta = r.difference - records[mi - 1].difference;
            r.trend_se = detail::jackknife_trend_se(ps[mi], ps[mi - 1], gue, prm.p);
        }
    }
    return records;
}

struct ResolventComparisonParams {
    int n = 6;
    int p = 4;
    double eta = 0.5;
    std::vector<double> omega_grid;
    std::vector<int> m_grid;
    int trials = 100;
    std::uint64_t seed = 0;
    int threads = 1;
    double requested_se = 0.0;
};

/// Records ordered lexicographically (m outer, omega inner); trend fields
/// compare consecutive m at fixed omega.
inline std::vector<ComparisonRecord> resolvent_comparison_experiment(const ResolventComparisonParams& prm) {
    if (prm.p < 2 || prm.p % 2 != 0) throw DomainError("resolvent_comparison: need even p >= 2");
    if (!(prm.eta > 0)) throw DomainError("resolvent_comparison: need eta > 0");
    if (prm.m_grid.empty() || prm.omega_grid.empty() || prm.trials < 2)
        throw DomainError("resolvent_comparison: empty grid or trials < 2");
    const std::int64_t N = std::int64_t{1} << prm.n;
    const size_t M = prm.m_grid.size(), W = prm.omega_grid.size();
    const auto T = static_cast<size_t>(prm.trials);
    std::vector<std::vector<std::vector<double>>> ps(
        M, std::vector<std::vector<double>>(W, std::vector<double>(T)));
    std::vector<std::vector<double>> gue(W, std::vector<double>(T));
    RngStream root(prm.seed);

    parallel_for(prm.trials, prm.threads, [&](std::int64_t t) {
        RngStream trial = root.child(static_cast<std::uint64_t>(t));
        RngStream ps_stream = trial.child(0);
        RngStream gue_stream = trial.child(1);
        const Spectrum sg = eigenvalues(sample_gue(N, gue_stream));
        for (size_t wi = 0; wi < W; ++wi)
            gue[wi][static_cast<size_t>(t)] =
                resolvent_trace_moment(sg, {prm.omega_grid[wi], prm.eta, prm.p});
        for (size_t mi = 0; mi < M; ++mi) {
            const Spectrum sp =
                eigenvalues(sample_pauli_string_ensemble(prm.n, prm.m_grid[mi], ps_stream));
            for (size_t wi = 0; wi < W; ++wi)
                ps[mi][wi][static_cast<size_t>(t)] =
                    resolvent_trace_moment(sp, {prm.omega_grid[wi], prm.eta, prm.p});
        }
    });

    std::vector<ComparisonRecord> records;
    records.reserve(M * W);
    for (size_t mi = 0; mi < M; ++mi) {
        for (size_t wi = 0; wi < W; ++wi) {
            const MeanSe a = mean_and_se(ps[mi][wi]);
            const MeanSe g = mean_and_se(gue[wi]);
            ComparisonRecord r;
            r.m = prm.m_grid[mi];
            r.p = prm.p;
            r.eta = prm.eta;
            r.omega = prm.omega_grid[wi];
            r.dim = N;
            r.trials = prm.trials;
            r.lhs_a = std::pow(a.mean, 1.0 / prm.p);
            r.lhs_b = std::pow(g.mean, 1.0 / prm.p);
            r.difference = std::abs(r.lhs_a - r.lhs_b);
            const double se_a = detail::root_scale_se(a.mean, a.se, prm.p);
            const double se_b = detail::root_scale_se(g.mean, g.se, prm.p);
            r.std_error = std::sqrt(se_a * se_a + se_b * se_b);
            r.bound = pauli_gue_resolvent_envelope(prm.n, prm.m_grid[mi], prm.p, prm.eta);
            r.reference = semicircle_resolvent_moment({prm.omega_grid[wi], prm.eta, prm.p});
            r.low_precision = prm.requested_se > 0.0 && r.std_error > prm.requested_se;
            if (mi > 0) {
                r.trend_delta = r.difference - records[(mi - 1) * W + wi].difference;
                r.trend_se = detail::jackknife_trend_se(ps[mi][wi], ps[mi - 1][wi], gue[wi], prm.p);
            }
            records.push_back(r);
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Norm tail
// ---------------------------------------------------------------------------

struct NormTailRecord {
    int n = 0;
    double eps = 0.0;
    int m = 0;
    std::int64_t trials = 0;
    std::int64_t exceedances = 0;
    double frequency = 0.0;
    double threshold = 0.0;       // 2 (1 + eps)
    double predicted_tail = 0.0;  // exp(-n), unit constants
};

/// Unit-constant policy for the tail theorem's term count: ceil(n^3 / eps^4).
inline int norm_tail_default_m(int n, double eps) {
    return static_cast<int>(std::ceil(std::pow(n, 3.0) / std::pow(eps, 4.0)));
}

inline NormTailRecord norm_tail_experiment(int n, double eps, int m, int trials,
                                           std::uint64_t seed, int threads = 1) {
    if (!(eps > 0.0 && eps <= 0.5)) throw DomainError("norm_tail: need 0 < eps <= 1/2");
    if (m < 1 || trials < 1) throw DomainError("norm_tail: need m, trials >= 1");
    const double threshold = 2.0 * (1.0 + eps);
    std::vector<double> norms(static_cast<size_t>(trials));
    RngStream root(seed);
    parallel_for(trials, threads, [&](std::int64_t t) {
        const Spectrum s = eigenvalues(
            sample_pauli_string_ensemble(n, m, root.child(static_cast<std::uint64_t>(t)).child(0)));
        norms[static_cast<size_t>(t)] = std::max(std::abs(s.lambda_min()), std::abs(s.lambda_max()));
    });
    NormTailRecord r;
    r.n = n;
    r.eps = eps;
    r.m = m;
    r.trials = trials;
    for (double v : norms)
        if (v >= threshold) ++r.exceedances;
    r.frequency = static_cast<double>(r.exceedances) / static_cast<double>(trials);
    r.threshold = threshold;
    r.predicted_tail = std::exp(-static_cast<double>(n));
    return r;
}

// ---------------------------------------------------------------------------
// Moment matching for complex signed permutations vs the GUE summand
// ---------------------------------------------------------------------------

inline DenseMatrix kron(const DenseMatrix& A, const DenseMatrix& B) {
    DenseMatrix K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

inline DenseMatrix kron_power(const DenseMatrix& A, int k) {
    DenseMatrix K = A;
    for (int i = 1; i < k; ++i) K = kron(K, A);
    return K;
}

/// E[H_GUE^{x2}] = swap/N; odd GUE moments vanish.
inline DenseMatrix gue_moment_reference(int N, int k) {
    if (k == 2) {
        DenseMatrix S = DenseMatrix::Zero(N * N, N * N);
        for (int a = 0; a < N; ++a)
            for (int c = 0; c < N; ++c) S(a * N + c, c * N + a) = 1.0 / static_cast<double>(N);
        return S;
    }
    std::int64_t d = 1;
    for (int i = 0; i < k; ++i) d *= N;
    return DenseMatrix::Zero(d, d);
}

enum class MomentCheckMode { exhaustive, monte_carlo };

/// Max-entry deviation of E A^{x k} from the GUE reference, where
/// A = (Q + Q^dagger)/sqrt(2) is a Hermitized complex signed permutation.
/// Exhaustive mode enumerates all N! permutations x 4^N sign patterns
/// (N <= 4 only); at N=3 that is 384 instances.
inline double moment_matching_check(int N, int k, MomentCheckMode mode, std::int64_t mc_samples = 20000,
                                    std::uint64_t seed = 0) {
    if (k < 1 || k > 3) throw DomainError("moment_matching_check: k must be in 1..3");
    if (N < 2) throw DomainError("moment_matching_check: need N >= 2");
    std::int64_t tdim = 1;
    for (int i = 0; i < k; ++i) tdim *= N;
    DenseMatrix acc = DenseMatrix::Zero(tdim, tdim);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

    if (mode == MomentCheckMode::exhaustive) {
        if (N > 4) throw ResourceError("moment_matching_check: exhaustive mode limited to N <= 4");
        std::vector<int> perm(static_cast<size_t>(N));
        for (int i = 0; i < N; ++i) perm[static_cast<size_t>(i)] = i;
        std::int64_t count = 0;
        do {
            const std::int64_t patterns = std::int64_t{1} << (2 * N);
            for (std::int64_t bits = 0; bits < patterns; ++bits) {
                SignedPermutation q;
                q.perm = perm;
                q.diag.resize(static_cast<size_t>(N));
                for (int a = 0; a < N; ++a) {
                    const double r = ((bits >> (2 * a)) & 1) ? -1.0 : 1.0;
                    const double ri = ((bits >> (2 * a + 1)) & 1) ? -1.0 : 1.0;
                    q.diag[static_cast<size_t>(a)] = Complex(r * inv_sqrt2, ri * inv_sqrt2);
                }
                acc += kron_power(q.hermitized(inv_sqrt2), k);
                ++count;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        acc /= static_cast<double>(count);
    } else {
        RngStream stream(seed);
        for (std::int64_t i = 0; i < mc_samples; ++i) {
            const SignedPermutation q =
                sample_complex_signed_permutation(N, stream.child(static_cast<std::uint64_t>(i)));
            acc += kron_power(q.hermitized(inv_sqrt2), k);
        }
        acc /= static_cast<double>(mc_samples);
    }
    return (acc - gue_moment_reference(N, k)).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Lindeberg telescope
// ---------------------------------------------------------------------------

struct TelescopeStep {
    int j = 0;
    double mean_moment = kNaN;     // E tr_bar S_j^p
    double se_moment = kNaN;
    double mean_increment = kNaN;  // E (tr_bar S_j^p - tr_bar S_{j-1}^p)
    double se_increment = kNaN;
};

struct TelescopeResult {
    std::vector<TelescopeStep> steps;  // j = 0..m
    double endpoint_difference = kNaN; // mean_m - mean_0
    double sum_of_increments = kNaN;
    double max_telescope_defect = 0.0; // max over trials of |sum inc - (x_m - x_0)|
};

/// Hybrid sums S_j = sum_{i<=j} GUE_i/sqrt(m) + sum_{i>j} A_i, same sample
/// paths reused across j, so the telescope identity holds per trial.
inline TelescopeResult lindeberg_telescope_experiment(int n, int m, int p, int trials,
                                                      std::uint64_t seed, int threads = 1) {
    if (p < 2 || p % 2 != 0) throw DomainError("telescope: need even p >= 2");
    if (m < 1 || trials < 2) throw DomainError("telescope: need m >= 1, trials >= 2");
    const std::int64_t N = std::int64_t{1} << n;
    const auto T = static_cast<size_t>(trials);
    std::vector<std::vector<double>> moments(static_cast<size_t>(m + 1), std::vector<double>(T));
    std::vector<double> defects(T);
    RngStream root(seed);
    const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));

    parallel_for(trials, threads, [&](std::int64_t t) {
        RngStream trial = root.child(static_cast<std::uint64_t>(t));
        RngStream ps_stream = trial.child(0);
        RngStream gue_stream = trial.child(1);
        const SparsePauliSum H = sample_pauli_string_ensemble(n, m, ps_stream);
        DenseMatrix S = H.to_dense();
        moments[0][static_cast<size_t>(t)] = normalized_trace_power(eigenvalues(S), p);
        for (int j = 1; j <= m; ++j) {
            const auto& term = H.terms()[static_cast<size_t>(j - 1)];
            S -= term.coeff * term.string.to_dense();
            S += inv_sqrt_m * sample_gue(N, gue_stream.child(static_cast<std::uint64_t>(j)));
            moments[static_cast<size_t>(j)][static_cast<size_t>(t)] =
                normalized_trace_power(eigenvalues(S), p);
        }
        double sum_inc = 0.0;
        for (int j = 1; j <= m; ++j)
            sum_inc += moments[static_cast<size_t>(j)][static_cast<size_t>(t)] -
                       moments[static_cast<size_t>(j - 1)][static_cast<size_t>(t)];
        defects[static_cast<size_t>(t)] = std::abs(
            sum_inc - (moments[static_cast<size_t>(m)][static_cast<size_t>(t)] - moments[0][static_cast<size_t>(t)]));
    });

    TelescopeResult out;
    out.steps.resize(static_cast<size_t>(m + 1));
    std::vector<double> inc(T);
    for (int j = 0; j <= m; ++j) {
        const MeanSe ms = mean_and_se(moments[static_cast<size_t>(j)]);
        TelescopeStep& st = out.steps[static_cast<size_t>(j)];
        st.j = j;
        st.mean_moment = ms.mean;
        st.se_moment = ms.se;
        if (j > 0) {
            for (size_t t = 0; t < T; ++t)
                inc[t] = moments[static_cast<size_t>(j)][t] - moments[static_cast<size_t>(j - 1)][t];
            const MeanSe mi = mean_and_se(inc);
            st.mean_increment = mi.mean;
            st.se_increment = mi.se;
        }
    }
    out.endpoint_difference =
        out.steps.back().mean_moment - out.steps.front().mean_moment;
    double s = 0.0;
    for (int j = 1; j <= m; ++j) s += out.steps[static_cast<size_t>(j)].mean_increment;
    out.sum_of_increments = s;
    for (double d : defects) out.max_telescope_defect = std::max(out.max_telescope_defect, d);
    return out;
}

// ---------------------------------------------------------------------------
// Resolvent concentration
// ---------------------------------------------------------------------------

struct ConcentrationRecord {
    int n = 0;
    int m = 0;
    int p = 0;
    double omega = 0.0;
    double eta = 0.0;
    int q = 2;
    std::int64_t trials = 0;
    double mean = kNaN;
    double stddev = kNaN;           // sample std of tr_bar |R|^p across instances
    double rel_fluctuation = kNaN;  // stddev / mean
    double se_mean = kNaN;
    double sigma_star_sq = kNaN;    // 1/(mN), exact for Pauli summands
    double bound_term_norm4 = kNaN; // sqrt(q) p^2/eta^2 sqrt(sum ||A_j||^4)
    double bound_term_sigma = kNaN; // sqrt(q) p/eta^2 sqrt(sum sigma*^2)
    double bound_term_max = kNaN;   // q p/eta (sum ||A_j||^q)^{1/q}
};

inline ConcentrationRecord resolvent_concentration_experiment(int n, int m, int p, double omega,
                                                              double eta, int trials,
                                                              std::uint64_t seed, int threads = 1,
                                                              int q = 2) {
    if (p < 2 || p % 2 != 0) throw DomainError("concentration: need even p >= 2");
    if (!(eta > 0)) throw DomainError("concentration: need eta > 0");
    if (trials < 2) throw DomainError("concentration: need trials >= 2");
    const std::int64_t N = std::int64_t{1} << n;
    std::vector<double> vals(static_cast<size_t>(trials));
    RngStream root(seed);
    parallel_for(trials, threads, [&](std::int64_t t) {
        const Spectrum s = eigenvalues(
            sample_pauli_string_ensemble(n, m, root.child(static_cast<std::uint64_t>(t)).child(0)));
        vals[static_cast<size_t>(t)] = resolvent_trace_moment(s, {omega, eta, p});
    });
    const MeanSe ms = mean_and_se(vals);
    ConcentrationRecord r;
    r.n = n;
    r.m = m;
    r.p = p;
    r.omega = omega;
    r.eta = eta;
    r.q = q;
    r.trials = trials;
    r.mean = ms.mean;
    r.stddev = ms.stddev;
    r.rel_fluctuation = ms.stddev / ms.mean;
    r.se_mean = ms.se;
    const double md = m, Nd = static_cast<double>(N), qd = q, pd = p;
    r.sigma_star_sq = 1.0 / (md * Nd);
    r.bound_term_norm4 = std::sqrt(qd) * pd * pd / (eta * eta) * std::sqrt(1.0 / md);
    r.bound_term_sigma = std::sqrt(qd) * pd / (eta * eta) * std::sqrt(1.0 / Nd);
    r.bound_term_max = qd * pd / eta * std::pow(md, 1.0 / qd) / std::sqrt(md);
    return r;
}

}  // namespace speclab
