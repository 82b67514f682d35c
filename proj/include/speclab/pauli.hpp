#pragma once

#include <Eigen/Dense>
#include <bit>
#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "speclab/errors.hpp"

namespace speclab {

using Complex = std::complex<double>;
using DenseMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

/// An n-site Pauli operator in symplectic form,
///
///   P = i^phase * prod_s X_s^{x_s} Z_s^{z_s},
///
/// with x/z bit-packed into 64-bit words (site s <-> bit s of the basis
/// index, site 0 least significant). The phase is a 2-bit exponent of i.
/// Convention fixed project-wide: Y == i*X*Z, so the letter Y at a site means
/// (x,z)=(1,1) plus one factor of i absorbed into the phase.
class PauliString {
public:
    explicit PauliString(int n) : n_(n), x_(words(n), 0), z_(words(n), 0), phase_(0) {
        if (n < 1) throw DomainError("PauliString: need n >= 1");
    }

    static PauliString identity(int n) { return PauliString(n); }

    /// Build from per-site letters 'I','X','Y','Z' and a display phase
    /// exponent (i^k prefactor in front of the letters).
    static PauliString from_letters(std::string_view letters, int display_phase_exp = 0) {
        PauliString p(static_cast<int>(letters.size()));
        int ny = 0;
        for (int s = 0; s < p.n_; ++s) {
            switch (letters[static_cast<size_t>(s)]) {
                case 'I': break;
                case 'X': p.set_bit(p.x_, s); break;
                case 'Y': p.set_bit(p.x_, s); p.set_bit(p.z_, s); ++ny; break;
                case 'Z': p.set_bit(p.z_, s); break;
                default: throw DomainError("PauliString: invalid letter");
            }
        }
        p.phase_ = static_cast<std::uint8_t>(((display_phase_exp + ny) % 4 + 4) % 4);
        return p;
    }

    /// Parse text form "+XIYZ" / "-iZZ" (leading phase from {+, -, +i, -i}).
    static PauliString parse(std::string_view text) {
        size_t pos = 0;
        int disp = 0;
        if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
            disp = (text[pos] == '-') ? 2 : 0;
            ++pos;
            if (pos < text.size() && text[pos] == 'i') {
                disp += 1;
                ++pos;
            }
        }
        if (pos >= text.size()) throw DomainError("PauliString::parse: no letters");
        return from_letters(text.substr(pos), disp);
    }

    int sites() const { return n_; }
    std::uint8_t phase_exp() const { return phase_; }
    bool x_bit(int s) const { return get_bit(x_, s); }
    bool z_bit(int s) const { return get_bit(z_, s); }

    char letter(int s) const {
        const bool x = x_bit(s), z = z_bit(s);
        return x ? (z ? 'Y' : 'X') : (z ? 'Z' : 'I');
    }

    /// Number of sites acted on nontrivially.
    int weight() const {
        int w = 0;
        for (size_t k = 0; k < x_.size(); ++k) w += std::popcount(x_[k] | z_[k]);
        return w;
    }

    bool is_identity_letters() const {
        for (size_t k = 0; k < x_.size(); ++k)
            if ((x_[k] | z_[k]) != 0) return false;
        return true;
    }

    /// i^phase as a complex number.
    Complex phase() const {
        static constexpr Complex table[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        return table[phase_];
    }

    /// P is Hermitian iff phase parity equals the number of Y-type sites mod 2.
    bool is_hermitian() const { return (phase_ % 2) == (count_y() % 2); }

    PauliString adjoint() const {
        PauliString r = *this;
        const int xz = overlap_parity_count(x_, z_);
        r.phase_ = static_cast<std::uint8_t>(((-static_cast<int>(phase_) + 2 * xz) % 4 + 4) % 4);
        return r;
    }

    PauliString with_phase_exp(int k) const {
        PauliString r = *this;
        r.phase_ = static_cast<std::uint8_t>((k % 4 + 4) % 4);
        return r;
    }

    bool operator==(const PauliString& o) const {
        return n_ == o.n_ && phase_ == o.phase_ && x_ == o.x_ && z_ == o.z_;
    }
    bool operator!=(const PauliString& o) const { return !(*this == o); }

    /// Same (x,z) letters, ignoring phase.
    bool same_letters(const PauliString& o) const { return n_ == o.n_ && x_ == o.x_ && z_ == o.z_; }

    /// Group product a*b with accumulated phase.
    friend PauliString mul(const PauliString& a, const PauliString& b) {
        if (a.n_ != b.n_) throw DomainError("mul: PauliString width mismatch");
        PauliString r(a.n_);
        int cross = 0;  // Z of a commuted past X of b
        for (size_t k = 0; k < a.x_.size(); ++k) {
            r.x_[k] = a.x_[k] ^ b.x_[k];
            r.z_[k] = a.z_[k] ^ b.z_[k];
            cross += std::popcount(a.z_[k] & b.x_[k]);
        }
        r.phase_ = static_cast<std::uint8_t>((a.phase_ + b.phase_ + 2 * (cross & 1)) % 4);
        return r;
    }

    /// Parity of the symplectic inner product <a.x,b.z> + <a.z,b.x>; zero
    /// parity means the strings commute.
    friend bool commutes(const PauliString& a, const PauliString& b) {
        if (a.n_ != b.n_) throw DomainError("commutes: PauliString width mismatch");
        int parity = 0;
        for (size_t k = 0; k < a.x_.size(); ++k)
            parity ^= (std::popcount(a.x_[k] & b.z_[k]) ^ std::popcount(a.z_[k] & b.x_[k])) & 1;
        return parity == 0;
    }

    /// Matrix-free application: O(2^n) bit-flip index map with sign lookups,
    /// agrees exactly with to_dense(p) * v.
    StateVector apply(const StateVector& v) const {
        const std::int64_t dim = std::int64_t{1} << n_;
        if (v.size() != dim) throw DomainError("PauliString::apply: state vector length mismatch");
        if (n_ > 62) throw ResourceError("PauliString::apply: n too large to index");
        const std::uint64_t xm = x_[0], zm = z_[0];
        const Complex ph = phase();
        StateVector out(dim);
        for (std::int64_t i = 0; i < dim; ++i) {
            const std::uint64_t ui = static_cast<std::uint64_t>(i);
            const double s = (std::popcount(ui & zm) & 1) ? -1.0 : 1.0;
            out[static_cast<std::int64_t>(ui ^ xm)] = ph * s * v[i];
        }
        return out;
    }

    /// Explicit 2^n x 2^n realization with the phase folded in.
    DenseMatrix to_dense(std::int64_t max_dim = 4096) const {
        const std::int64_t dim = std::int64_t{1} << n_;
        if (dim > max_dim)
            throw ResourceError("PauliString::to_dense: 2^n exceeds the memory budget");
        const std::uint64_t xm = x_[0], zm = z_[0];
        const Complex ph = phase();
        DenseMatrix M = DenseMatrix::Zero(dim, dim);
        for (std::int64_t i = 0; i < dim; ++i) {
            const std::uint64_t ui = static_cast<std::uint64_t>(i);
            const double s = (std::popcount(ui & zm) & 1) ? -1.0 : 1.0;
            M(static_cast<std::int64_t>(ui ^ xm), i) = ph * s;
        }
        return M;
    }

    /// Canonical text form, e.g. "+XIYZ", "-iZZ". Round-trips with parse().
    std::string str() const {
        const int ny = count_y();
        const int disp = ((static_cast<int>(phase_) - ny) % 4 + 4) % 4;
        static constexpr const char* prefix[4] = {"+", "+i", "-", "-i"};
        std::string s = prefix[disp];
        s.reserve(s.size() + static_cast<size_t>(n_));
        for (int q = 0; q < n_; ++q) s.push_back(letter(q));
        return s;
    }

    int count_y() const {
        int ny = 0;
        for (size_t k = 0; k < x_.size(); ++k) ny += std::popcount(x_[k] & z_[k]);
        return ny;
    }

private:
    static size_t words(int n) { return static_cast<size_t>((n + 63) / 64); }
    static void set_bit(std::vector<std::uint64_t>& v, int s) {
        v[static_cast<size_t>(s) / 64] |= std::uint64_t{1} << (s % 64);
    }
    static bool get_bit(const std::vector<std::uint64_t>& v, int s) {
        return (v[static_cast<size_t>(s) / 64] >> (s % 64)) & 1;
    }
    static int overlap_parity_count(const std::vector<std::uint64_t>& a,
                                    const std::vector<std::uint64_t>& b) {
        int c = 0;
        for (size_t k = 0; k < a.size(); ++k) c += std::popcount(a[k] & b[k]);
        return c;
    }

    int n_;
    std::vector<std::uint64_t> x_, z_;
    std::uint8_t phase_;
};

inline int weight(const PauliString& p) { return p.weight(); }

}  // namespace speclab
