#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "speclab/ensembles.hpp"
#include "speclab/errors.hpp"
#include "speclab/rng.hpp"
#include "speclab/spectral.hpp"

namespace speclab {

// ---------------------------------------------------------------------------
// Phase estimation on the maximally mixed state
// ---------------------------------------------------------------------------

enum class QPEKernel {
    gaussian,  // estimate = lambda + resolution * N(0,1)
    sinc2,     // squared-Dirichlet profile; resolution = main-lobe half-width
};

/// Black-box QPE cost model: the eigenstate index is uniform over {0..N-1}
/// (ideal QPE on I/N) and the energy estimate carries a resolution-scaled
/// measurement kernel. Gate counts are reported as formulas, never simulated.
struct QPEModel {
    double resolution = 0.0;
    int repeats = 1;
    QPEKernel kernel = QPEKernel::gaussian;

    void validate() const {
        if (resolution < 0.0) throw DomainError("QPEModel: need resolution >= 0");
        if (repeats < 1) throw DomainError("QPEModel: need repeats >= 1");
    }
};

namespace detail {

/// Sample from the sinc^2 density sin^2(u)/(pi u^2) by rejection against a
/// Cauchy proposal (acceptance ratio sin^2(u)(1+u^2)/(2u^2) <= 1).
inline double sinc2_offset(RngStream& s) {
    for (;;) {
        const double u = std::tan(std::numbers::pi * (s.uniform() - 0.5));
        const double u2 = u * u;
        const double ratio = (std::abs(u) < 1e-12)
                                 ? 0.5 * (1.0 + u2)
                                 : std::sin(u) * std::sin(u) * (1.0 + u2) / (2.0 * u2);
        if (s.uniform() <= ratio) return u / std::numbers::pi;
    }
}

}  // namespace detail

struct QPESample {
    std::int64_t index = 0;  // sampled eigenstate (0-based)
    double estimate = 0.0;   // eigenvalue + kernel noise
};

inline QPESample qpe_sample(const Spectrum& s, const QPEModel& model, RngStream& stream) {
    model.validate();
    QPESample out;
    out.index = static_cast<std::int64_t>(stream.uniform_below(static_cast<std::uint64_t>(s.dim())));
    double offset = 0.0;
    if (model.resolution > 0.0)
        offset = (model.kernel == QPEKernel::gaussian) ? stream.normal()
                                                       : detail::sinc2_offset(stream);
    out.estimate = s.values[static_cast<size_t>(out.index)] + model.resolution * offset;
    return out;
}

struct LowEnergyProbability {
    double probability = 0.0;
    bool degenerate = false;  // lambda_min >= 0: the ratio target is ill-posed
};

/// Fraction of eigenvalues <= (1-eps) lambda_min: the single-shot QPE success
/// probability at zero resolution error.
inline LowEnergyProbability low_energy_success_probability(const Spectrum& s, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("low_energy_success_probability: need 0 < eps < 1");
    LowEnergyProbability out;
    double threshold = (1.0 - eps) * s.lambda_min();
    if (s.lambda_min() >= 0.0) {
        out.degenerate = true;
        threshold = s.lambda_min();
    }
    std::int64_t count = 0;
    for (double v : s.values)
        if (v <= threshold) ++count;
    out.probability = static_cast<double>(count) / static_cast<double>(s.dim());
    return out;
}

struct RepeatUntilSuccess {
    bool success = false;
    int trials_used = 0;
    double energy = 0.0;      // collapsed eigenvalue on success, mean eigenvalue on fallback
    std::int64_t index = -1;
};

/// Repeat QPE until the estimate clears (1-eps) lambda_min (plus a one-sigma
/// resolution allowance) or the budget runs out, in which case the fallback
/// is the maximally mixed state with energy = mean eigenvalue.
inline RepeatUntilSuccess repeat_until_success(const Spectrum& s, double eps, const QPEModel& model,
                                               RngStream& stream) {
    model.validate();
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("repeat_until_success: need 0 < eps < 1");
    const double threshold = (1.0 - eps) * s.lambda_min() + model.resolution;
    RepeatUntilSuccess out;
    for (int t = 1; t <= model.repeats; ++t) {
        const QPESample sample = qpe_sample(s, model, stream);
        if (sample.estimate <= threshold) {
            out.success = true;
            out.trials_used = t;
            out.energy = s.values[static_cast<size_t>(sample.index)];
            out.index = sample.index;
            return out;
        }
    }
    out.trials_used = model.repeats;
    out.energy = s.mean();
    return out;
}

/// Repeat budget eps^{-3/2} log(sqrt(m)/eps) with unit constants.
inline int suggested_repeats(double eps, int m) {
    return static_cast<int>(
        std::ceil(std::pow(eps, -1.5) * std::log(std::sqrt(static_cast<double>(m)) / eps)));
}

// ---------------------------------------------------------------------------
// Density-of-states proxy: consecutive resolvent powers on a grid
// ---------------------------------------------------------------------------

struct DOSProxyQuery {
    double E0 = -1.6;        // energy cutoff
    double eta = 0.13;       // resolvent width
    double omega_bar = 0.1;  // grid spacing; grid anchored at -2
    int p = 20;              // even power

    void validate() const {
        if (!(eta > 0.0)) throw DomainError("DOSProxyQuery: need eta > 0");
        if (!(omega_bar > 0.0)) throw DomainError("DOSProxyQuery: need omega_bar > 0");
        if (p < 2 || p % 2 != 0) throw DomainError("DOSProxyQuery: need even p >= 2");
        if (E0 < -2.0) throw DomainError("DOSProxyQuery: grid must cover [-2, E0]");
    }
};

/// Grid centers -2 + l*omega_bar, l = 0, 1, ... while <= E0.
inline std::vector<double> dos_grid_centers(const DOSProxyQuery& q) {
    q.validate();
    std::vector<double> centers;
    for (int l = 0;; ++l) {
        const double c = -2.0 + l * q.omega_bar;
        if (c > q.E0 + 1e-12) break;
        centers.push_back(c);
    }
    return centers;
}

/// tr_bar Q(E0) = sum_grid eta^p tr_bar |R_{c,eta}|^p, the low-energy
/// projector proxy.
inline double dos_proxy(const Spectrum& s, const DOSProxyQuery& q) {
    const double etap = std::pow(q.eta, q.p);
    double acc = 0.0;
    for (double c : dos_grid_centers(q)) acc += etap * resolvent_trace_moment(s, {c, q.eta, q.p});
    return acc;
}

/// Semicircle value of the same sum: sum_grid eta^p S_{c,eta,p}.
inline double dos_proxy_semicircle(const DOSProxyQuery& q) {
    const double etap = std::pow(q.eta, q.p);
    double acc = 0.0;
    for (double c : dos_grid_centers(q)) acc += etap * semicircle_resolvent_moment({c, q.eta, q.p});
    return acc;
}

/// Parameters used by the low-energy argument, scaled to the target accuracy:
/// eta = 2 eps/3, grid step 2 eps/sqrt(p), p = 2 log2(N), cutoff at the
/// low-energy threshold -2(1 - eps).
inline DOSProxyQuery dos_query_from_epsilon(double eps, std::int64_t N) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("dos_query_from_epsilon: need 0 < eps < 1");
    DOSProxyQuery q;
    q.p = 2 * static_cast<int>(std::lround(std::log2(static_cast<double>(N))));
    if (q.p < 2) q.p = 2;
    q.eta = 2.0 * eps / 3.0;
    q.omega_bar = 2.0 * eps / std::sqrt(static_cast<double>(q.p));
    q.E0 = -2.0 * (1.0 - eps);
    return q;
}

// ---------------------------------------------------------------------------
// Chebyshev classical witness: rho proportional to p_d(H)^2
// ---------------------------------------------------------------------------

struct WitnessConfig {
    double degree_constant = 4.0;  // d = ceil(degree_constant / sqrt(eps))
    int degree_override = 0;       // > 0 pins d
    double margin = 0.05;          // half-width a = ||H|| (1 + margin)
    double beta0 = 0.25;           // dyadic escalation start
    int max_doublings = 24;
    int dct_nodes = 512;           // Chebyshev coefficient quadrature nodes
    int m_for_cost = 0;            // term count for the verification-cost formula
};

struct WitnessSpec {
    double epsilon = 0.0;
    int d = 0;
    double beta = 0.0;
    double half_width = 0.0;                 // a: approximation interval [-a, a]
    std::vector<double> coefficients;        // Chebyshev coefficients of p_d
    double verification_cost_log10 = kNaN;   // log10 O((dm)^{2d} n d)
};

struct WitnessResult {
    WitnessSpec spec;
    double energy = kNaN;        // Tr[rho H]
    double lambda_min = kNaN;
    double ratio = kNaN;         // energy / lambda_min
    double gibbs_energy = kNaN;  // exact Gibbs energy at the chosen beta
    bool success = false;        // ratio >= 1 - eps
};

namespace detail {

/// Chebyshev coefficients of f on [-a, a] via the cosine-node projection.
inline std::vector<double> chebyshev_coefficients(double a, double beta, int d, int nodes) {
    std::vector<double> c(static_cast<size_t>(d + 1), 0.0);
    std::vector<double> fv(static_cast<size_t>(nodes));
    for (int j = 0; j < nodes; ++j) {
        const double theta = std::numbers::pi * (j + 0.5) / nodes;
        const double x = a * std::cos(theta);
        fv[static_cast<size_t>(j)] = std::exp(-0.5 * beta * (x + a));  // bounded by 1 on [-a,a]
    }
    for (int k = 0; k <= d; ++k) {
        double s = 0.0;
        for (int j = 0; j < nodes; ++j)
            s += fv[static_cast<size_t>(j)] * std::cos(k * std::numbers::pi * (j + 0.5) / nodes);
        c[static_cast<size_t>(k)] = 2.0 * s / nodes;
    }
    c[0] *= 0.5;
    return c;
}

inline double clenshaw(const std::vector<double>& c, double a, double x) {
    const double t = x / a;
    double b1 = 0.0, b2 = 0.0;
    for (size_t k = c.size(); k-- > 1;) {
        const double b0 = 2.0 * t * b1 - b2 + c[k];
        b2 = b1;
        b1 = b0;
    }
    return t * b1 - b2 + c[0];
}

inline double gibbs_energy(const Spectrum& s, double beta) {
    const double lmin = s.lambda_min();
    double num = 0.0, den = 0.0;
    for (double v : s.values) {
        const double w = std::exp(-beta * (v - lmin));
        num += v * w;
        den += w;
    }
    return num / den;
}

}  // namespace detail

/// Unnormalized weights p_d(lambda_i)^2 of the witness state in the
/// eigenbasis; rho = diag(w)/sum(w) there.
inline std::vector<double> witness_weights(const Spectrum& s, const WitnessSpec& spec) {
    std::vector<double> w(s.values.size());
    for (size_t i = 0; i < s.values.size(); ++i) {
        const double p = detail::clenshaw(spec.coefficients, spec.half_width, s.values[i]);
        w[i] = p * p;
    }
    return w;
}

/// Constructs the degree-d Chebyshev approximant of the square-root Gibbs
/// weight exp(-beta x / 2) and the witness state rho ~ p_d(H)^2. beta climbs
/// a dyadic ladder until the exact Gibbs energy clears (1 - eps/2) lambda_min
/// and the polynomial ratio clears (1 - eps); if the schedule is exhausted,
/// the best record is returned with success = false.
inline WitnessResult chebyshev_witness(const Spectrum& s, double eps,
                                       const WitnessConfig& config = {}) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("chebyshev_witness: need 0 < eps < 1");
    if (s.lambda_min() >= 0.0)
        throw DomainError("chebyshev_witness: needs a negative ground energy");
    const double lmin = s.lambda_min();
    const double norm = std::max(std::abs(s.lambda_min()), std::abs(s.lambda_max()));
    const double a = norm * (1.0 + config.margin);
    const int d = config.degree_override > 0
                      ? config.degree_override
                      : static_cast<int>(std::ceil(config.degree_constant / std::sqrt(eps)));
    const double gibbs_target = (1.0 - 0.5 * eps) * lmin;

    WitnessResult best;
    best.lambda_min = lmin;
    double beta = config.beta0;
    for (int k = 0; k <= config.max_doublings; ++k, beta *= 2.0) {
        const double eg = detail::gibbs_energy(s, beta);
        if (eg > gibbs_target) continue;
        WitnessSpec spec;
        spec.epsilon = eps;
        spec.d = d;
        spec.beta = beta;
        spec.half_width = a;
        spec.coefficients = detail::chebyshev_coefficients(a, beta, d, config.dct_nodes);
        if (config.m_for_cost > 0)  // log10 of (dm)^{2d} n d with n = log2(N)
            spec.verification_cost_log10 =
                2.0 * d * std::log10(static_cast<double>(d) * config.m_for_cost) +
                std::log10(std::max(1.0, std::log2(static_cast<double>(s.dim())))) +
                std::log10(static_cast<double>(d));
        const std::vector<double> w = witness_weights(s, spec);
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            num += s.values[i] * w[i];
            den += w[i];
        }
        if (den <= 0.0) continue;
        const double energy = num / den;
        const double ratio = energy / lmin;
        if (!best.success && (std::isnan(best.ratio) || ratio > best.ratio)) {
            best.spec = spec;
            best.energy = energy;
            best.ratio = ratio;
            best.gibbs_energy = eg;
        }
        if (ratio >= 1.0 - eps) {
            best.spec = spec;
            best.energy = energy;
            best.ratio = ratio;
            best.gibbs_energy = eg;
            best.success = true;
            return best;
        }
    }
    return best;  // reported failure record, not silent
}

inline WitnessResult chebyshev_witness(const DenseMatrix& H, double eps,
                                       const WitnessConfig& config = {}) {
    return chebyshev_witness(eigenvalues(H), eps, config);
}

inline WitnessResult chebyshev_witness(const SparsePauliSum& H, double eps,
                                       const WitnessConfig& config = {}) {
    return chebyshev_witness(eigenvalues(H), eps, config);
}

/// Dense realization rho = p_d(H)^2 / Tr[p_d(H)^2] for verification
/// (positive semidefinite, unit trace).
inline DenseMatrix witness_density_matrix(const DenseMatrix& H, const WitnessSpec& spec) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(H);
    if (es.info() != Eigen::Success) throw NumericError("witness_density_matrix: eigensolver failed");
    const auto& lam = es.eigenvalues();
    Eigen::VectorXd w(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        const double p = detail::clenshaw(spec.coefficients, spec.half_width, lam(i));
        w(i) = p * p;
    }
    w /= w.sum();
    return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Circuit-size lower bound (normalized units: c1 = c2 = 1, natural log)
// ---------------------------------------------------------------------------

struct LowerBoundResult {
    double eps1 = 0.0;
    int m = 0;
    int n = 0;
    double g_threshold = 0.0;               // eps1 sqrt(m) / ln(m)
    double failure_probability_bound = 1.0; // exp(-eps1 sqrt(m))
    bool precondition_ok = false;           // m <= eps1^2 2^{2n}
};

inline LowerBoundResult circuit_lower_bound(double eps1, int m, int n) {
    if (eps1 < 0.0) throw DomainError("circuit_lower_bound: need eps1 >= 0");
    if (m < 2) throw DomainError("circuit_lower_bound: need m >= 2");
    LowerBoundResult r;
    r.eps1 = eps1;
    r.m = m;
    r.n = n;
    const double sqm = std::sqrt(static_cast<double>(m));
    r.g_threshold = eps1 * sqm / std::log(static_cast<double>(m));
    r.failure_probability_bound = std::exp(-eps1 * sqm);
    r.precondition_ok =
        eps1 > 0.0 && std::log2(static_cast<double>(m)) <= 2.0 * n + 2.0 * std::log2(eps1);
    return r;
}

// ---------------------------------------------------------------------------
// Product-state baseline (site-wise exact mean-field descent)
// ---------------------------------------------------------------------------

struct ProductStateOptions {
    int max_sweeps = 200;
    double tol = 1e-12;
};

struct ProductStateResult {
    double energy = kNaN;
    int best_restart = -1;
    bool converged = false;  // convergence of the best restart
    std::vector<std::array<double, 3>> bloch;
};

/// Coordinate descent over single-qubit Bloch vectors: the effective field on
/// a site given the others is exact, and the update sets the qubit to its
/// ground state, so the energy is nonincreasing. Matrix-free throughout.
inline ProductStateResult product_state_baseline(const SparsePauliSum& H, int restarts,
                                                 std::uint64_t seed,
                                                 const ProductStateOptions& opt = {}) {
    if (restarts < 1) throw DomainError("product_state_baseline: need restarts >= 1");
    const int n = H.sites();

    struct Term {
        double coeff;
        std::vector<std::pair<int, int>> acting;  // (site, axis 0=x,1=y,2=z)
    };
    std::vector<Term> terms;
    terms.reserve(H.terms().size());
    for (const auto& t : H.terms()) {
        if (!t.string.is_hermitian())
            throw DomainError("product_state_baseline: non-Hermitian term");
        Term tm;
        // i^{phase - #Y} is +-1 for Hermitian strings; fold into the coefficient
        const int disp = ((static_cast<int>(t.string.phase_exp()) - t.string.count_y()) % 4 + 4) % 4;
        tm.coeff = t.coeff * (disp == 2 ? -1.0 : 1.0);
        for (int s = 0; s < n; ++s) {
            switch (t.string.letter(s)) {
                case 'X': tm.acting.emplace_back(s, 0); break;
                case 'Y': tm.acting.emplace_back(s, 1); break;
                case 'Z': tm.acting.emplace_back(s, 2); break;
                default: break;
            }
        }
        terms.push_back(std::move(tm));
    }

    // terms touching each site, for the field assembly
    std::vector<std::vector<int>> at_site(static_cast<size_t>(n));
    for (size_t j = 0; j < terms.size(); ++j)
        for (const auto& [s, axis] : terms[j].acting) at_site[static_cast<size_t>(s)].push_back(static_cast<int>(j));

    auto energy_of = [&](const std::vector<std::array<double, 3>>& r) {
        double e = 0.0;
        for (const auto& tm : terms) {
            double prod = tm.coeff;
            for (const auto& [s, axis] : tm.acting) prod *= r[static_cast<size_t>(s)][static_cast<size_t>(axis)];
            e += prod;
        }
        return e;
    };

    ProductStateResult best;
    RngStream root(seed);
    for (int rs = 0; rs < restarts; ++rs) {
        RngStream stream = root.child(static_cast<std::uint64_t>(rs));
        std::vector<std::array<double, 3>> r(static_cast<size_t>(n));
        for (auto& b : r) {
            double x, y, z, nrm;
            do {
                x = stream.normal();
                y = stream.normal();
                z = stream.normal();
                nrm = std::sqrt(x * x + y * y + z * z);
            } while (nrm < 1e-12);
            b = {x / nrm, y / nrm, z / nrm};
        }
        double e = energy_of(r);
        bool converged = false;
        for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
            for (int s = 0; s < n; ++s) {
                std::array<double, 3> field = {0.0, 0.0, 0.0};
                for (int j : at_site[static_cast<size_t>(s)]) {
                    const Term& tm = terms[static_cast<size_t>(j)];
                    double prod = tm.coeff;
                    int axis_here = -1;
                    for (const auto& [sprime, axis] : tm.acting) {
                        if (sprime == s)
                            axis_here = axis;
                        else
                            prod *= r[static_cast<size_t>(sprime)][static_cast<size_t>(axis)];
                    }
                    field[static_cast<size_t>(axis_here)] += prod;
                }
                const double fn = std::sqrt(field[0] * field[0] + field[1] * field[1] + field[2] * field[2]);
                if (fn > 1e-14)
                    r[static_cast<size_t>(s)] = {-field[0] / fn, -field[1] / fn, -field[2] / fn};
            }
            const double e_new = energy_of(r);
            if (std::abs(e_new - e) <= opt.tol * std::max(1.0, std::abs(e_new))) {
                e = e_new;
                converged = true;
                break;
            }
            e = e_new;
        }
        if (best.best_restart < 0 || e < best.energy) {
            best.energy = e;
            best.best_restart = rs;
            best.converged = converged;
            best.bloch = r;
        }
    }
    return best;
}

}  // namespace speclab
