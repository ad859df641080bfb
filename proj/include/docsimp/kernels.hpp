#pragma once

#include <cmath>
#include <cstdint>

#include "docsimp/mat.hpp"

// Compute kernels behind the model stack. Every kernel exists twice: a serial
// reference under serial:: and an OpenMP variant under par::. Both compute
// each output element with the same fixed-order reduction, so their results
// are bit-identical regardless of thread count; tests assert exact equality.
// The unqualified entry points dispatch on a process-wide mode (default
// parallel) so the benchmark can flip implementations at runtime.

namespace docsimp::kernels {

enum class Mode { serial, parallel };

inline Mode& detail_mode() {
    static Mode m = Mode::parallel;
    return m;
}
inline Mode mode() { return detail_mode(); }
inline void set_mode(Mode m) { detail_mode() = m; }

// Work sizes below this skip the OpenMP fork even in parallel mode.
inline constexpr long kParGrain = 8 * 1024;

namespace serial {

// C = A*B, optionally accumulating into C.
template <typename T>
void gemm_nn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    const int m = A.rows, k = A.cols, n = B.cols;
    if (B.rows != k || C.rows != m || C.cols != n)
        throw std::invalid_argument("gemm_nn: shape mismatch");
    if (!acc) C.zero();
    for (int i = 0; i < m; ++i) {
        T* ci = C.row_ptr(i);
        const T* ai = A.row_ptr(i);
        for (int p = 0; p < k; ++p) {
            const T aip = ai[p];
            const T* bp = B.row_ptr(p);
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

// C = A*B^T.
template <typename T>
void gemm_nt(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    const int m = A.rows, k = A.cols, n = B.rows;
    if (B.cols != k || C.rows != m || C.cols != n)
        throw std::invalid_argument("gemm_nt: shape mismatch");
    for (int i = 0; i < m; ++i) {
        const T* ai = A.row_ptr(i);
        T* ci = C.row_ptr(i);
        for (int j = 0; j < n; ++j) {
            const T* bj = B.row_ptr(j);
            T s = acc ? ci[j] : T(0);
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = s;
        }
    }
}

// C = A^T*B.
template <typename T>
void gemm_tn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    const int m = A.cols, k = A.rows, n = B.cols;
    if (B.rows != k || C.rows != m || C.cols != n)
        throw std::invalid_argument("gemm_tn: shape mismatch");
    if (!acc) C.zero();
    for (int i = 0; i < m; ++i) {
        T* ci = C.row_ptr(i);
        for (int p = 0; p < k; ++p) {
            const T api = A(p, i);
            const T* bp = B.row_ptr(p);
            for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

// Row-wise softmax with max subtraction. Masked positions are expected to
// arrive as large negative additives in x; they underflow to exact zeros.
template <typename T>
void softmax_rows(const Mat<T>& x, Mat<T>& out) {
    if (!x.same_shape(out)) throw std::invalid_argument("softmax_rows: shape mismatch");
    for (int i = 0; i < x.rows; ++i) {
        const T* xi = x.row_ptr(i);
        T* oi = out.row_ptr(i);
        T mx = xi[0];
        for (int j = 1; j < x.cols; ++j) mx = xi[j] > mx ? xi[j] : mx;
        T sum = T(0);
        for (int j = 0; j < x.cols; ++j) {
            oi[j] = std::exp(xi[j] - mx);
            sum += oi[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < x.cols; ++j) oi[j] *= inv;
    }
}

// out = (x - mean) / sqrt(var + eps) * gamma + beta, per row.
template <typename T>
void layer_norm_rows(const Mat<T>& x, const Mat<T>& gamma, const Mat<T>& beta,
                     Mat<T>& out, T eps) {
    if (!x.same_shape(out) || gamma.cols != x.cols || beta.cols != x.cols)
        throw std::invalid_argument("layer_norm_rows: shape mismatch");
    const int n = x.cols;
    for (int i = 0; i < x.rows; ++i) {
        const T* xi = x.row_ptr(i);
        T* oi = out.row_ptr(i);
        T mean = T(0);
        for (int j = 0; j < n; ++j) mean += xi[j];
        mean /= T(n);
        T var = T(0);
        for (int j = 0; j < n; ++j) {
            const T d = xi[j] - mean;
            var += d * d;
        }
        var /= T(n);
        const T rstd = T(1) / std::sqrt(var + eps);
        for (int j = 0; j < n; ++j)
            oi[j] = (xi[j] - mean) * rstd * gamma.a[j] + beta.a[j];
    }
}

template <typename T>
void add(const Mat<T>& x, const Mat<T>& y, Mat<T>& out) {
    if (!x.same_shape(y) || !x.same_shape(out))
        throw std::invalid_argument("add: shape mismatch");
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) out.a[i] = x.a[i] + y.a[i];
}

template <typename T>
void relu(const Mat<T>& x, Mat<T>& out) {
    if (!x.same_shape(out)) throw std::invalid_argument("relu: shape mismatch");
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) out.a[i] = x.a[i] > T(0) ? x.a[i] : T(0);
}

}  // namespace serial

namespace par {

template <typename T>
void gemm_nn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    const int m = A.rows, k = A.cols, n = B.cols;
    if (B.rows != k || C.rows != m || C.cols != n)
        throw std::invalid_argument("gemm_nn: shape mismatch");
    const long work = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParGrain)
    for (int i = 0; i < m; ++i) {
        T* ci = C.row_ptr(i);
        const T* ai = A.row_ptr(i);
        if (!acc)
            for (int j = 0; j < n; ++j) ci[j] = T(0);
        for (int p = 0; p < k; ++p) {
            const T aip = ai[p];
            const T* bp = B.row_ptr(p);
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

template <typename T>
void gemm_nt(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    const int m = A.rows, k = A.cols, n = B.rows;
    if (B.cols != k || C.rows != m || C.cols != n)
        throw std::invalid_argument("gemm_nt: shape mismatch");
    const long work = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParGrain)
    for (int i = 0; i < m; ++i) {
        const T* ai = A.row_ptr(i);
        T* ci = C.row_ptr(i);
        for (int j = 0; j < n; ++j) {
            const T* bj = B.row_ptr(j);
            T s = acc ? ci[j] : T(0);
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = s;
        }
    }
}

template <typename T>
void gemm_tn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    const int m = A.cols, k = A.rows, n = B.cols;
    if (B.rows != k || C.rows != m || C.cols != n)
        throw std::invalid_argument("gemm_tn: shape mismatch");
    const long work = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParGrain)
    for (int i = 0; i < m; ++i) {
        T* ci = C.row_ptr(i);
        if (!acc)
            for (int j = 0; j < n; ++j) ci[j] = T(0);
        for (int p = 0; p < k; ++p) {
            const T api = A(p, i);
            const T* bp = B.row_ptr(p);
            for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

template <typename T>
void softmax_rows(const Mat<T>& x, Mat<T>& out) {
    if (!x.same_shape(out)) throw std::invalid_argument("softmax_rows: shape mismatch");
    const long work = static_cast<long>(x.rows) * x.cols;
#pragma omp parallel for schedule(static) if (work > kParGrain)
    for (int i = 0; i < x.rows; ++i) {
        const T* xi = x.row_ptr(i);
        T* oi = out.row_ptr(i);
        T mx = xi[0];
        for (int j = 1; j < x.cols; ++j) mx = xi[j] > mx ? xi[j] : mx;
        T sum = T(0);
        for (int j = 0; j < x.cols; ++j) {
            oi[j] = std::exp(xi[j] - mx);
            sum += oi[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < x.cols; ++j) oi[j] *= inv;
    }
}

template <typename T>
void layer_norm_rows(const Mat<T>& x, const Mat<T>& gamma, const Mat<T>& beta,
                     Mat<T>& out, T eps) {
    if (!x.same_shape(out) || gamma.cols != x.cols || beta.cols != x.cols)
        throw std::invalid_argument("layer_norm_rows: shape mismatch");
    const int n = x.cols;
    const long work = static_cast<long>(x.rows) * n;
#pragma omp parallel for schedule(static) if (work > kParGrain)
    for (int i = 0; i < x.rows; ++i) {
        const T* xi = x.row_ptr(i);
        T* oi = out.row_ptr(i);
        T mean = T(0);
        for (int j = 0; j < n; ++j) mean += xi[j];
        mean /= T(n);
        T var = T(0);
        for (int j = 0; j < n; ++j) {
            const T d = xi[j] - mean;
            var += d * d;
        }
        var /= T(n);
        const T rstd = T(1) / std::sqrt(var + eps);
        for (int j = 0; j < n; ++j)
            oi[j] = (xi[j] - mean) * rstd * gamma.a[j] + beta.a[j];
    }
}

template <typename T>
void add(const Mat<T>& x, const Mat<T>& y, Mat<T>& out) {
    if (!x.same_shape(y) || !x.same_shape(out))
        throw std::invalid_argument("add: shape mismatch");
    const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static) if (n > kParGrain)
    for (long i = 0; i < n; ++i) out.a[i] = x.a[i] + y.a[i];
}

template <typename T>
void relu(const Mat<T>& x, Mat<T>& out) {
    if (!x.same_shape(out)) throw std::invalid_argument("relu: shape mismatch");
    const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static) if (n > kParGrain)
    for (long i = 0; i < n; ++i) out.a[i] = x.a[i] > T(0) ? x.a[i] : T(0);
}

}  // namespace par

template <typename T>
void gemm_nn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    mode() == Mode::serial ? serial::gemm_nn(A, B, C, acc) : par::gemm_nn(A, B, C, acc);
}
template <typename T>
void gemm_nt(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    mode() == Mode::serial ? serial::gemm_nt(A, B, C, acc) : par::gemm_nt(A, B, C, acc);
}
template <typename T>
void gemm_tn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool acc = false) {
    mode() == Mode::serial ? serial::gemm_tn(A, B, C, acc) : par::gemm_tn(A, B, C, acc);
}
template <typename T>
void softmax_rows(const Mat<T>& x, Mat<T>& out) {
    mode() == Mode::serial ? serial::softmax_rows(x, out) : par::softmax_rows(x, out);
}
template <typename T>
void layer_norm_rows(const Mat<T>& x, const Mat<T>& gamma, const Mat<T>& beta,
                     Mat<T>& out, T eps) {
    mode() == Mode::serial ? serial::layer_norm_rows(x, gamma, beta, out, eps)
                           : par::layer_norm_rows(x, gamma, beta, out, eps);
}
template <typename T>
void add(const Mat<T>& x, const Mat<T>& y, Mat<T>& out) {
    mode() == Mode::serial ? serial::add(x, y, out) : par::add(x, y, out);
}
template <typename T>
void relu(const Mat<T>& x, Mat<T>& out) {
    mode() == Mode::serial ? serial::relu(x, out) : par::relu(x, out);
}

}  // namespace docsimp::kernels
