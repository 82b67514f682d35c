#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "speclab/errors.hpp"
#include "speclab/pauli.hpp"
#include "speclab/rng.hpp"

#include <json.hpp>

namespace speclab {

struct PauliTerm {
    double coeff;
    PauliString string;
};

/// H = sum_j coeff_j * sigma_j. For Pauli-string-ensemble instances every
/// coefficient is +-1/sqrt(m) exactly and every string is Hermitian.
class SparsePauliSum {
public:
    explicit SparsePauliSum(int n) : n_(n) {
        if (n < 1) throw DomainError("SparsePauliSum: need n >= 1");
    }

    int sites() const { return n_; }
    std::int64_t dim() const { return std::int64_t{1} << n_; }
    int term_count() const { return static_cast<int>(terms_.size()); }
    const std::vector<PauliTerm>& terms() const { return terms_; }

    void add_term(double coeff, PauliString s) {
        if (s.sites() != n_) throw DomainError("SparsePauliSum: term width mismatch");
        if (!std::isfinite(coeff)) throw DomainError("SparsePauliSum: non-finite coefficient");
        terms_.push_back({coeff, std::move(s)});
    }

    /// Matrix-free H*v, one O(2^n) pass per term.
    StateVector apply(const StateVector& v) const {
        if (v.size() != dim()) throw DomainError("SparsePauliSum::apply: length mismatch");
        StateVector out = StateVector::Zero(v.size());
        const std::int64_t d = dim();
        for (const auto& t : terms_) {
            std::uint64_t xm = 0, zm = 0;
            for (int s = 0; s < n_; ++s) {
                if (t.string.x_bit(s)) xm |= std::uint64_t{1} << s;
                if (t.string.z_bit(s)) zm |= std::uint64_t{1} << s;
            }
            const Complex f = t.coeff * t.string.phase();
            for (std::int64_t i = 0; i < d; ++i) {
                const std::uint64_t ui = static_cast<std::uint64_t>(i);
                const double sg = (std::popcount(ui & zm) & 1) ? -1.0 : 1.0;
                out[static_cast<std::int64_t>(ui ^ xm)] += f * sg * v[i];
            }
        }
        return out;
    }

    DenseMatrix to_dense(std::int64_t max_dim = 4096) const {
        const std::int64_t d = dim();
        if (d > max_dim) throw ResourceError("SparsePauliSum::to_dense: exceeds memory budget");
        DenseMatrix H = DenseMatrix::Zero(d, d);
        for (const auto& t : terms_) {
            std::uint64_t xm = 0, zm = 0;
            for (int s = 0; s < n_; ++s) {
                if (t.string.x_bit(s)) xm |= std::uint64_t{1} << s;
                if (t.string.z_bit(s)) zm |= std::uint64_t{1} << s;
            }
            const Complex f = t.coeff * t.string.phase();
            for (std::int64_t i = 0; i < d; ++i) {
                const std::uint64_t ui = static_cast<std::uint64_t>(i);
                const double sg = (std::popcount(ui & zm) & 1) ? -1.0 : 1.0;
                H(static_cast<std::int64_t>(ui ^ xm), i) += f * sg;
            }
        }
        return H;
    }

    /// sum_j |coeff_j|, a free upper bound on the operator norm.
    double one_norm() const {
        double s = 0.0;
        for (const auto& t : terms_) s += std::abs(t.coeff);
        return s;
    }

private:
    int n_;
    std::vector<PauliTerm> terms_;
};

// ---------------------------------------------------------------------------
// Samplers. Each is a pure function of (parameters, stream); the overloads
// taking a raw seed wrap it in the root of a fresh stream tree. Term/entry
// draws are keyed by draw index, so instances with the same seed and a larger
// m extend the smaller instance (common random numbers across m-grids).
// ---------------------------------------------------------------------------

namespace detail {

inline PauliString random_pauli_letters(int n, RngStream& s) {
    std::string letters(static_cast<size_t>(n), 'I');
    static constexpr char kAlphabet[4] = {'I', 'X', 'Y', 'Z'};
    int got = 0;
    std::uint64_t bits = 0;
    for (int q = 0; q < n; ++q) {
        if (got == 0) {
            bits = s.next_u64();
            got = 32;
        }
        letters[static_cast<size_t>(q)] = kAlphabet[bits & 3];
        bits >>= 2;
        --got;
    }
    return PauliString::from_letters(letters);
}

}  // namespace detail

/// m i.i.d. uniform strings over all 4^n Paulis (identity included), each
/// with an independent uniform sign folded into the coefficient +-1/sqrt(m).
/// Repeated strings are kept as separate terms.
inline SparsePauliSum sample_pauli_string_ensemble(int n, int m, RngStream stream) {
    if (n < 1 || m < 1) throw DomainError("sample_pauli_string_ensemble: need n,m >= 1");
    SparsePauliSum H(n);
    const double c = 1.0 / std::sqrt(static_cast<double>(m));
    for (int j = 0; j < m; ++j) {
        RngStream t = stream.child(static_cast<std::uint64_t>(j));
        PauliString p = detail::random_pauli_letters(n, t);
        H.add_term(t.sign() * c, std::move(p));
    }
    return H;
}

inline SparsePauliSum sample_pauli_string_ensemble(int n, int m, std::uint64_t seed) {
    return sample_pauli_string_ensemble(n, m, RngStream(seed));
}

/// GUE with E tr_bar H^2 = 1: off-diagonal (g+ig')/sqrt(2N), diagonal
/// g/sqrt(N); Hermitian by construction.
inline DenseMatrix sample_gue(std::int64_t N, RngStream stream) {
    if (N < 2) throw DomainError("sample_gue: need N >= 2");
    DenseMatrix H(N, N);
    const double dscale = 1.0 / std::sqrt(static_cast<double>(N));
    const double oscale = 1.0 / std::sqrt(2.0 * static_cast<double>(N));
    for (std::int64_t j = 0; j < N; ++j) {
        H(j, j) = Complex(stream.normal() * dscale, 0.0);
        for (std::int64_t i = 0; i < j; ++i) {
            const Complex z(stream.normal() * oscale, stream.normal() * oscale);
            H(i, j) = z;
            H(j, i) = std::conj(z);
        }
    }
    return H;
}

inline DenseMatrix sample_gue(std::int64_t N, std::uint64_t seed) {
    return sample_gue(N, RngStream(seed));
}

/// Q = D*P: uniform permutation P (Fisher-Yates on the stream) times a
/// diagonal of complex signs (r+ir')/sqrt(2). Column j has its single
/// nonzero at row perm[j].
struct SignedPermutation {
    std::vector<int> perm;
    std::vector<Complex> diag;

    int dim() const { return static_cast<int>(perm.size()); }

    DenseMatrix to_dense() const {
        const int N = dim();
        DenseMatrix Q = DenseMatrix::Zero(N, N);
        for (int j = 0; j < N; ++j) Q(perm[static_cast<size_t>(j)], j) = diag[static_cast<size_t>(perm[static_cast<size_t>(j)])];
        return Q;
    }

    /// (Q + Q^dagger) * scale
    DenseMatrix hermitized(double scale) const {
        DenseMatrix Q = to_dense();
        return (Q + Q.adjoint()) * scale;
    }
};

inline SignedPermutation sample_complex_signed_permutation(int N, RngStream stream) {
    if (N < 2) throw DomainError("sample_complex_signed_permutation: need N >= 2");
    SignedPermutation q;
    q.perm = stream.permutation(N);
    q.diag.resize(static_cast<size_t>(N));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int a = 0; a < N; ++a)
        q.diag[static_cast<size_t>(a)] = Complex(stream.sign() * inv_sqrt2, stream.sign() * inv_sqrt2);
    return q;
}

inline SignedPermutation sample_real_signed_permutation(int N, RngStream stream) {
    if (N < 2) throw DomainError("sample_real_signed_permutation: need N >= 2");
    SignedPermutation q;
    q.perm = stream.permutation(N);
    q.diag.resize(static_cast<size_t>(N));
    for (int a = 0; a < N; ++a) q.diag[static_cast<size_t>(a)] = Complex(stream.sign(), 0.0);
    return q;
}

enum class SignedPermVariant { complex_signs, real_signs };

/// sum_{i=1..m} (Q_i + Q_i^dagger)/sqrt(2m); dense for N <= 512, sparse
/// triplet form above that (at most 2m nonzeros per row either way).
struct SignedPermSum {
    std::int64_t dim = 0;
    bool dense_form = true;
    DenseMatrix dense;
    Eigen::SparseMatrix<Complex> sparse;

    DenseMatrix to_dense() const { return dense_form ? dense : DenseMatrix(sparse); }
};

inline SignedPermSum sample_signed_perm_sum(int N, int m, RngStream stream,
                                            SignedPermVariant variant = SignedPermVariant::complex_signs) {
    if (N < 2 || m < 1) throw DomainError("sample_signed_perm_sum: need N >= 2, m >= 1");
    const double scale = 1.0 / std::sqrt(2.0 * static_cast<double>(m));
    SignedPermSum out;
    out.dim = N;
    out.dense_form = (N <= 512);
    std::vector<Eigen::Triplet<Complex>> trips;
    if (out.dense_form)
        out.dense = DenseMatrix::Zero(N, N);
    else
        trips.reserve(static_cast<size_t>(2) * static_cast<size_t>(m) * static_cast<size_t>(N));
    for (int i = 0; i < m; ++i) {
        RngStream t = stream.child(static_cast<std::uint64_t>(i));
        const SignedPermutation q = (variant == SignedPermVariant::complex_signs)
                                        ? sample_complex_signed_permutation(N, t)
                                        : sample_real_signed_permutation(N, t);
        for (int j = 0; j < N; ++j) {
            const int r = q.perm[static_cast<size_t>(j)];
            const Complex v = q.diag[static_cast<size_t>(r)] * scale;
            if (out.dense_form) {
                out.dense(r, j) += v;
                out.dense(j, r) += std::conj(v);
            } else {
                trips.emplace_back(r, j, v);
                trips.emplace_back(j, r, std::conj(v));
            }
        }
    }
    if (!out.dense_form) {
        out.sparse.resize(N, N);
        out.sparse.setFromTriplets(trips.begin(), trips.end());
    }
    return out;
}

/// All weight-k strings with uniform signs, normalized by 1/sqrt(|P_k|) so
/// that E tr_bar H^2 = 1. Optional baseline-only variant; the normalization
/// is a chosen convention.
inline SparsePauliSum sample_complete_k_local(int n, int k, RngStream stream) {
    if (n < 1 || k < 1 || k > n) throw DomainError("sample_complete_k_local: need 1 <= k <= n");
    std::vector<PauliString> strings;
    std::vector<int> sites(static_cast<size_t>(k));
    std::string letters(static_cast<size_t>(n), 'I');
    static constexpr char kNonId[3] = {'X', 'Y', 'Z'};
    // iterate site subsets (combinations) x 3^k letter assignments
    for (int s = 0; s < k; ++s) sites[static_cast<size_t>(s)] = s;
    while (true) {
        const long combos = static_cast<long>(std::pow(3.0, k) + 0.5);
        for (long c = 0; c < combos; ++c) {
            long cc = c;
            std::fill(letters.begin(), letters.end(), 'I');
            for (int s = 0; s < k; ++s) {
                letters[static_cast<size_t>(sites[static_cast<size_t>(s)])] = kNonId[cc % 3];
                cc /= 3;
            }
            strings.push_back(PauliString::from_letters(letters));
        }
        int i = k - 1;
        while (i >= 0 && sites[static_cast<size_t>(i)] == n - k + i) --i;
        if (i < 0) break;
        ++sites[static_cast<size_t>(i)];
        for (int j = i + 1; j < k; ++j) sites[static_cast<size_t>(j)] = sites[static_cast<size_t>(j - 1)] + 1;
    }
    SparsePauliSum H(n);
    const double c = 1.0 / std::sqrt(static_cast<double>(strings.size()));
    for (auto& p : strings) H.add_term(stream.sign() * c, std::move(p));
    return H;
}

// ---------------------------------------------------------------------------
// EnsembleSpec + instance JSON serialization
// ---------------------------------------------------------------------------

struct EnsembleSpec {
    enum class Variant {
        pauli_string_ensemble,
        gue,
        complex_signed_perm_sum,
        real_signed_perm_sum,
        complete_k_local,
    };
    Variant variant = Variant::pauli_string_ensemble;
    int n = 0;           // sites (pauli variants)
    std::int64_t N = 0;  // dimension (matrix variants)
    int m = 1;           // term count
    int k = 2;           // locality (complete_k_local)
    std::uint64_t seed = 0;

    std::int64_t dim() const {
        return (variant == Variant::pauli_string_ensemble || variant == Variant::complete_k_local)
                   ? (std::int64_t{1} << n)
                   : N;
    }

    static Variant variant_from_string(const std::string& s) {
        if (s == "pauli_string_ensemble") return Variant::pauli_string_ensemble;
        if (s == "gue") return Variant::gue;
        if (s == "complex_signed_perm_sum") return Variant::complex_signed_perm_sum;
        if (s == "real_signed_perm_sum") return Variant::real_signed_perm_sum;
        if (s == "complete_k_local") return Variant::complete_k_local;
        throw ConfigError("unknown ensemble variant: " + s);
    }

    static std::string variant_to_string(Variant v) {
        switch (v) {
            case Variant::pauli_string_ensemble: return "pauli_string_ensemble";
            case Variant::gue: return "gue";
            case Variant::complex_signed_perm_sum: return "complex_signed_perm_sum";
            case Variant::real_signed_perm_sum: return "real_signed_perm_sum";
            case Variant::complete_k_local: return "complete_k_local";
        }
        return "?";
    }

    static EnsembleSpec from_json(const nlohmann::json& j) {
        EnsembleSpec s;
        if (!j.contains("variant")) throw ConfigError("ensemble spec: missing 'variant'");
        s.variant = variant_from_string(j.at("variant").get<std::string>());
        if (j.contains("n")) s.n = j.at("n").get<int>();
        if (j.contains("N")) s.N = j.at("N").get<std::int64_t>();
        if (j.contains("m")) s.m = j.at("m").get<int>();
        if (j.contains("k")) s.k = j.at("k").get<int>();
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
        s.validate();
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["variant"] = variant_to_string(variant);
        switch (variant) {
            case Variant::pauli_string_ensemble:
                j["n"] = n;
                j["m"] = m;
                break;
            case Variant::gue:
                j["N"] = N;
                break;
            case Variant::complex_signed_perm_sum:
            case Variant::real_signed_perm_sum:
                j["N"] = N;
                j["m"] = m;
                break;
            case Variant::complete_k_local:
                j["n"] = n;
                j["k"] = k;
                break;
        }
        j["seed"] = seed;
        return j;
    }

    void validate() const {
        switch (variant) {
            case Variant::pauli_string_ensemble:
                if (n < 1 || m < 1) throw ConfigError("pauli_string_ensemble: need n >= 1, m >= 1");
                break;
            case Variant::gue:
                if (N < 2) throw ConfigError("gue: need N >= 2");
                break;
            case Variant::complex_signed_perm_sum:
            case Variant::real_signed_perm_sum:
                if (N < 2 || m < 1) throw ConfigError("signed_perm_sum: need N >= 2, m >= 1");
                break;
            case Variant::complete_k_local:
                if (n < 1 || k < 1 || k > n) throw ConfigError("complete_k_local: need 1 <= k <= n");
                break;
        }
    }
};

/// Densify any ensemble instance; the uniform entry point for experiments.
inline DenseMatrix sample_dense(const EnsembleSpec& spec, std::int64_t max_dim = 4096) {
    RngStream stream(spec.seed);
    switch (spec.variant) {
        case EnsembleSpec::Variant::pauli_string_ensemble:
            return sample_pauli_string_ensemble(spec.n, spec.m, stream).to_dense(max_dim);
        case EnsembleSpec::Variant::gue:
            if (spec.N > max_dim) throw ResourceError("sample_dense: N exceeds memory budget");
            return sample_gue(spec.N, stream);
        case EnsembleSpec::Variant::complex_signed_perm_sum:
            return sample_signed_perm_sum(static_cast<int>(spec.N), spec.m, stream,
                                          SignedPermVariant::complex_signs)
                .to_dense();
        case EnsembleSpec::Variant::real_signed_perm_sum:
            return sample_signed_perm_sum(static_cast<int>(spec.N), spec.m, stream,
                                          SignedPermVariant::real_signs)
                .to_dense();
        case EnsembleSpec::Variant::complete_k_local:
            return sample_complete_k_local(spec.n, spec.k, stream).to_dense(max_dim);
    }
    throw ConfigError("sample_dense: bad variant");
}

inline nlohmann::json pauli_sum_to_json(const SparsePauliSum& H, const EnsembleSpec& spec) {
    nlohmann::json j = spec.to_json();
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : H.terms()) terms.push_back({{"coeff", t.coeff}, {"pauli", t.string.str()}});
    j["terms"] = std::move(terms);
    return j;
}

inline SparsePauliSum pauli_sum_from_json(const nlohmann::json& j) {
    if (!j.contains("n") || !j.contains("terms")) throw ConfigError("pauli instance: missing n/terms");
    SparsePauliSum H(j.at("n").get<int>());
    for (const auto& t : j.at("terms"))
        H.add_term(t.at("coeff").get<double>(), PauliString::parse(t.at("pauli").get<std::string>()));
    return H;
}

/// tr_bar H^2 = ||H||_F^2 / N, the dense-trace oracle for second moments.
inline double normalized_trace_square(const DenseMatrix& H) {
    return H.squaredNorm() / static_cast<double>(H.rows());
}

}  // namespace speclab
