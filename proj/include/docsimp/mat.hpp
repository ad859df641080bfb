#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace docsimp {

// Dense row-major matrix. The only storage type used by the model stack;
// vectors are 1xN or Nx1 matrices.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, T(0)) {}

    T& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    const T& operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    T* row_ptr(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const T* row_ptr(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

    size_t size() const { return a.size(); }
    bool empty() const { return a.empty(); }

    void fill(T v) { std::fill(a.begin(), a.end(), v); }
    void zero() { fill(T(0)); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    bool operator==(const Mat& o) const {
        return rows == o.rows && cols == o.cols && a == o.a;
    }
};

template <typename T>
inline void require_shape(const Mat<T>& m, int r, int c, const char* what) {
    if (m.rows != r || m.cols != c)
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace docsimp
