#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "speclab/ensembles.hpp"
#include "speclab/errors.hpp"
#include "speclab/pauli.hpp"
#include "speclab/rng.hpp"

namespace speclab {

constexpr double kInfNorm = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Full real spectrum of a Hermitian matrix, sorted ascending.
struct Spectrum {
    std::vector<double> values;
    std::string source;

    std::int64_t dim() const { return static_cast<std::int64_t>(values.size()); }
    double lambda_min() const { return values.front(); }
    double lambda_max() const { return values.back(); }
    double mean() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }
};

/// (omega, eta, p) filter: tr_bar |H - omega + i eta|^{-p} probes the
/// spectral density near omega at width ~ eta/sqrt(p).
struct ResolventQuery {
    double omega = 0.0;
    double eta = 1.0;
    int p = 2;

    void validate() const {
        if (!(eta > 0.0)) throw DomainError("ResolventQuery: need eta > 0");
        if (p < 0 || p % 2 != 0) throw DomainError("ResolventQuery: need even p >= 0");
    }
};

/// Dense Hermitian eigensolver (tridiagonalization + QL via Eigen),
/// authoritative at desk scale.
inline Spectrum eigenvalues(const DenseMatrix& H, std::int64_t max_dim = 4096,
                            double herm_tol = 1e-9) {
    const std::int64_t N = H.rows();
    if (N != H.cols()) throw DomainError("eigenvalues: matrix not square");
    if (N > max_dim) throw ResourceError("eigenvalues: N exceeds memory budget");
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    const double herm_defect = (H - H.adjoint()).cwiseAbs().maxCoeff();
    if (herm_defect > herm_tol * scale)
        throw DomainError("eigenvalues: input is not Hermitian within tolerance");
    Eigen::SelfAdjointEigenSolver<DenseMatrix> solver;
    solver.compute(H, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericError("eigenvalues: solver failed");
    Spectrum s;
    s.values.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + N);
    std::sort(s.values.begin(), s.values.end());
    return s;
}

inline Spectrum eigenvalues(const SparsePauliSum& H, std::int64_t max_dim = 4096) {
    return eigenvalues(H.to_dense(max_dim), max_dim);
}

/// Normalized Schatten p-norm ((1/N) sum |lambda|^p)^{1/p}; p = infinity
/// gives max |lambda| (the essential-sup convention).
inline double schatten_p_norm(const Spectrum& s, double p) {
    if (std::isinf(p)) {
        double m = 0.0;
        for (double v : s.values) m = std::max(m, std::abs(v));
        return m;
    }
    if (!(p >= 1.0)) throw DomainError("schatten_p_norm: need p >= 1 or infinity");
    double acc = 0.0;
    for (double v : s.values) acc += std::pow(std::abs(v), p);
    return std::pow(acc / static_cast<double>(s.values.size()), 1.0 / p);
}

/// (1/N) sum_i |lambda_i - omega + i eta|^{-p}.
inline double resolvent_trace_moment(const Spectrum& s, const ResolventQuery& q) {
    q.validate();
    const double eta2 = q.eta * q.eta;
    double acc = 0.0;
    for (double v : s.values) {
        const double d = v - q.omega;
        acc += std::pow(d * d + eta2, -0.5 * q.p);
    }
    return acc / static_cast<double>(s.values.size());
}

/// tr_bar H^p for even p, evaluated from the spectrum.
inline double normalized_trace_power(const Spectrum& s, int p) {
    if (p < 0 || p % 2 != 0) throw DomainError("normalized_trace_power: need even p >= 0");
    double acc = 0.0;
    for (double v : s.values) acc += std::pow(v, p);
    return acc / static_cast<double>(s.values.size());
}

// -- semicircle reference law (radius 2, unit variance) ---------------------

inline double semicircle_density(double x) {
    if (x <= -2.0 || x >= 2.0) return 0.0;
    return std::sqrt(4.0 - x * x) / (2.0 * std::numbers::pi);
}

/// Closed-form antiderivative: x sqrt(4-x^2)/(4 pi) + arcsin(x/2)/pi + 1/2.
inline double semicircle_cdf(double E) {
    if (E <= -2.0) return 0.0;
    if (E >= 2.0) return 1.0;
    return 0.5 + E * std::sqrt(4.0 - E * E) / (4.0 * std::numbers::pi) +
           std::asin(0.5 * E) / std::numbers::pi;
}

inline double semicircle_mass(double a, double b) { return semicircle_cdf(b) - semicircle_cdf(a); }

/// S_{omega,eta,p} = int rho_sc(x) |x - omega + i eta|^{-p} dx. The
/// substitution x = 2 sin(theta) removes the square-root endpoint weight;
/// adaptive Gauss-Kronrod then converges fast.
inline double semicircle_resolvent_moment(const ResolventQuery& q, double rel_tol = 1e-8) {
    q.validate();
    const double eta2 = q.eta * q.eta;
    const double halfp = 0.5 * q.p;
    auto integrand = [&](double theta) {
        const double c = std::cos(theta);
        const double x = 2.0 * std::sin(theta);
        const double d = x - q.omega;
        return (2.0 / std::numbers::pi) * c * c * std::pow(d * d + eta2, -halfp);
    };
    double err = 0.0;
    const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        integrand, -0.5 * std::numbers::pi, 0.5 * std::numbers::pi, 12, rel_tol, &err);
    if (!(err <= 16.0 * rel_tol * std::max(std::abs(val), 1e-300)))
        throw NumericError("semicircle_resolvent_moment: quadrature did not converge (err=" +
                               std::to_string(err) + ")",
                           val);
    return val;
}

/// sup_E |empirical CDF(E) - semicircle CDF(E)|, exact at the jump points.
inline double empirical_cdf_distance(const Spectrum& s) {
    const auto N = static_cast<double>(s.values.size());
    double d = 0.0;
    for (size_t i = 0; i < s.values.size(); ++i) {
        const double F = semicircle_cdf(s.values[i]);
        d = std::max(d, std::abs(static_cast<double>(i + 1) / N - F));
        d = std::max(d, std::abs(static_cast<double>(i) / N - F));
    }
    return d;
}

/// Fraction of eigenvalues <= -2(1 - eps), the low-energy mass against the
/// ensemble edge at -2.
inline double low_energy_fraction(const Spectrum& s, double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("low_energy_fraction: need 0 < eps <= 1");
    const double threshold = -2.0 * (1.0 - eps);
    std::int64_t count = 0;
    for (double v : s.values)
        if (v <= threshold) ++count;
    return static_cast<double>(count) / static_cast<double>(s.values.size());
}

// -- matrix-free extreme eigenvalue estimate --------------------------------

struct LanczosResult {
    double value = 0.0;      // estimate of ||H|| = max |lambda|
    double residual = 0.0;   // Lanczos residual bound for the winning Ritz pair
    int iterations = 0;
    bool converged = false;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

/// Lanczos with full reorthogonalization on the matrix-free apply. Converges
/// to both spectral extremes; returns max |Ritz| once the residual bound
/// drops below tolerance. Throws NumericError (carrying the best estimate)
/// if max_iters is exhausted first.
inline LanczosResult spectral_norm_estimate(const SparsePauliSum& H, double tolerance = 1e-8,
                                            int max_iters = 128, std::uint64_t seed = 0x5eed) {
    const std::int64_t dim = H.dim();
    const int kmax = static_cast<int>(std::min<std::int64_t>(max_iters, dim));
    RngStream stream(seed);
    StateVector v(dim);
    for (std::int64_t i = 0; i < dim; ++i) v[i] = Complex(stream.normal(), stream.normal());
    v.normalize();

    std::vector<StateVector> basis;
    basis.reserve(static_cast<size_t>(kmax));
    basis.push_back(v);
    std::vector<double> alpha, beta;

    LanczosResult best;
    for (int k = 0; k < kmax; ++k) {
        StateVector w = H.apply(basis.back());
        const double a = std::real(basis.back().dot(w));
        alpha.push_back(a);
        w -= a * basis.back();
        if (k > 0) w -= beta.back() * basis[static_cast<size_t>(k - 1)];
        // full reorthogonalization, two passes
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) w -= b.dot(w) * b;
        const double bnorm = w.norm();

        // Ritz values of the k+1 x k+1 tridiagonal section
        const int kk = k + 1;
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(kk, kk);
        for (int i = 0; i < kk; ++i) T(i, i) = alpha[static_cast<size_t>(i)];
        for (int i = 0; i + 1 < kk; ++i) {
            T(i, i + 1) = beta[static_cast<size_t>(i)];
            T(i + 1, i) = beta[static_cast<size_t>(i)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        const auto& theta = es.eigenvalues();
        const auto& Y = es.eigenvectors();
        const double lo = theta(0), hi = theta(kk - 1);
        const int winner = (std::abs(lo) >= std::abs(hi)) ? 0 : kk - 1;
        const double res_lo = bnorm * std::abs(Y(kk - 1, 0));
        const double res_hi = bnorm * std::abs(Y(kk - 1, kk - 1));
        best.value = std::max(std::abs(lo), std::abs(hi));
        best.residual = (winner == 0) ? res_lo : res_hi;
        best.iterations = kk;
        best.lambda_min = lo;
        best.lambda_max = hi;
        if (std::max(res_lo, res_hi) <= tolerance * std::max(1.0, best.value) || bnorm < 1e-14 ||
            kk == dim) {
            best.converged = true;
            return best;
        }
        beta.push_back(bnorm);
        basis.push_back(w / bnorm);
    }
    throw NumericError("spectral_norm_estimate: no convergence within max_iters (best=" +
                           std::to_string(best.value) + ", residual=" + std::to_string(best.residual) + ")",
                       best.value);
}

}  // namespace speclab
