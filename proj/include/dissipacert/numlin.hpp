#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dissipacert {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
    for (const double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

/// Dense rows x cols matrix, row-major.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Mat transposed() const {
        Mat t(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Vec apply(const Vec& x) const {
        Vec y(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j) s += data[i * cols + j] * x[j];
            y[i] = s;
        }
        return y;
    }
};

inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: dimension mismatch");
    Mat c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

/// Dense symmetric matrix; storage keeps (i,j) and (j,i) identical by construction.
struct SymMat {
    std::size_t dim = 0;
    std::vector<double> data;  // full dense, row-major

    SymMat() = default;
    explicit SymMat(std::size_t n, double fill = 0.0) : dim(n), data(n * n, fill) {}

    double operator()(std::size_t i, std::size_t j) const { return data[i * dim + j]; }

    void set(std::size_t i, std::size_t j, double v) {
        data[i * dim + j] = v;
        data[j * dim + i] = v;
    }

    void add(std::size_t i, std::size_t j, double v) {
        data[i * dim + j] += v;
        if (i != j) data[j * dim + i] += v;
    }

    static SymMat identity(std::size_t n) {
        SymMat m(n);
        for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
        return m;
    }

    static SymMat diagonal(const Vec& d) {
        SymMat m(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m.set(i, i, d[i]);
        return m;
    }

    /// Symmetrized copy of an arbitrary square matrix: (A + A^T)/2.
    static SymMat from_general(const Mat& a) {
        if (a.rows != a.cols) throw std::invalid_argument("from_general: not square");
        SymMat m(a.rows);
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t j = i; j < a.cols; ++j) m.set(i, j, 0.5 * (a(i, j) + a(j, i)));
        return m;
    }

    Mat as_mat() const {
        Mat m(dim, dim);
        m.data = data;
        return m;
    }

    Vec apply(const Vec& x) const {
        Vec y(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < dim; ++j) s += data[i * dim + j] * x[j];
            y[i] = s;
        }
        return y;
    }

    double quad(const Vec& x) const { return dot(x, apply(x)); }

    double trace() const {
        double t = 0.0;
        for (std::size_t i = 0; i < dim; ++i) t += data[i * dim + i];
        return t;
    }

    double frobenius() const {
        double s = 0.0;
        for (const double v : data) s += v * v;
        return std::sqrt(s);
    }

    /// Writes a sub-block at (row0, col0); mirrored entry-by-entry to keep symmetry.
    void add_block(std::size_t row0, std::size_t col0, const Mat& b) {
        for (std::size_t i = 0; i < b.rows; ++i)
            for (std::size_t j = 0; j < b.cols; ++j) {
                const std::size_t r = row0 + i, c = col0 + j;
                data[r * dim + c] += b(i, j);
                if (r != c) data[c * dim + r] += b(i, j);
                // mirrored writes expect the caller to pass each logical block once;
                // diagonal blocks must themselves be symmetric
            }
    }
};

struct EigenDecomposition {
    Vec values;       // ascending
    Mat vectors;      // column k is the eigenvector for values[k]
    int sweeps = 0;
    double off_norm = 0.0;
};

struct EigenError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Cyclic Jacobi eigendecomposition for dense symmetric matrices.
/// Small networks and per-subsystem blocks keep dim modest, so the O(n^3)
/// sweeps are fine and the result is accurate to ~1e-14 * ||m||.
inline EigenDecomposition sym_eig(const SymMat& m, int max_sweeps = 64) {
    const std::size_t n = m.dim;
    if (n == 0) throw std::invalid_argument("sym_eig: empty matrix");
    std::vector<double> a = m.data;
    Mat v = Mat::identity(n);

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += a[i * n + j] * a[i * n + j];
        return std::sqrt(2.0 * s);
    };

    double scale = 0.0;
    for (const double x : a) scale = std::max(scale, std::abs(x));
    if (!std::isfinite(scale)) throw EigenError("sym_eig: non-finite input");
    const double tol = 1e-15 * std::max(scale, 1.0) * static_cast<double>(n);

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= tol) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) <= 1e-300) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    const double rem = off_norm();
    if (rem > 1e-9 * std::max(scale, 1.0) * static_cast<double>(n))
        throw EigenError("sym_eig: Jacobi failed to converge, off-diagonal norm " + std::to_string(rem));

    EigenDecomposition d;
    d.sweeps = sweep;
    d.off_norm = rem;
    d.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.values[i] = a[i * n + i];
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return d.values[x] < d.values[y]; });
    Vec sorted(n);
    Mat vs(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        sorted[k] = d.values[order[k]];
        for (std::size_t i = 0; i < n; ++i) vs(i, k) = v(i, order[k]);
    }
    d.values = std::move(sorted);
    d.vectors = std::move(vs);
    return d;
}

/// All eigenvalues of a symmetric matrix, ascending.
inline Vec sym_eigvals(const SymMat& m) { return sym_eig(m).values; }

inline double max_eigval(const SymMat& m) { return sym_eigvals(m).back(); }
inline double min_eigval(const SymMat& m) { return sym_eigvals(m).front(); }

/// Negative semidefinite test: max eigenvalue <= tol.
inline bool is_nsd(const SymMat& m, double tol) { return max_eigval(m) <= tol; }

/// [M;I]^T X_cmp [M;I] for a pre-stacked matrix, symmetrized to absorb rounding.
inline SymMat congruence(const SymMat& x_cmp, const Mat& stack) {
    if (x_cmp.dim != stack.rows)
        throw std::invalid_argument("congruence: X dim " + std::to_string(x_cmp.dim) +
                                    " != stack rows " + std::to_string(stack.rows));
    const Mat sx = matmul(stack.transposed(), x_cmp.as_mat());
    return SymMat::from_general(matmul(sx, stack));
}

/// Vertical stack [M; I_n] used by the compositionality condition.
inline Mat stack_over_identity(const Mat& m) {
    Mat s(m.rows + m.cols, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) s(i, j) = m(i, j);
    for (std::size_t j = 0; j < m.cols; ++j) s(m.rows + j, j) = 1.0;
    return s;
}

/// Projection onto the NSD cone: zero out positive eigenvalues.
inline SymMat clip_nsd(const SymMat& m) {
    const EigenDecomposition d = sym_eig(m);
    const std::size_t n = m.dim;
    SymMat out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double w = std::min(d.values[k], 0.0);
        if (w == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j)
                out.data[i * n + j] += w * d.vectors(i, k) * d.vectors(j, k);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out.data[j * n + i] = out.data[i * n + j];
    return out;
}

}  // namespace dissipacert
