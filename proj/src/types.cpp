#include "selgrad/types.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cstdio>

namespace selgrad {

Mat matmul(const Mat& x, const Mat& y) {
    assert(x.cols == y.rows);
    Mat out(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            const double v = x(i, k);
            if (v == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) out(i, j) += v * y(k, j);
        }
    return out;
}

double dot(const Vec& x, const Vec& y) {
    assert(x.size() == y.size());
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

double norm_inf(const Vec& x) {
    double s = 0.0;
    for (double v : x) s = std::max(s, std::fabs(v));
    return s;
}

Vec vsub(const Vec& x, const Vec& y) {
    assert(x.size() == y.size());
    Vec out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    return out;
}

Vec vadd(const Vec& x, const Vec& y) {
    assert(x.size() == y.size());
    Vec out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return out;
}

Vec vscale(const Vec& x, double c) {
    Vec out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
    return out;
}

double max_abs_diff(const Vec& x, const Vec& y) {
    assert(x.size() == y.size());
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s = std::max(s, std::fabs(x[i] - y[i]));
    return s;
}

double max_abs_diff(const Mat& x, const Mat& y) {
    assert(x.rows == y.rows && x.cols == y.cols);
    double s = 0.0;
    for (size_t i = 0; i < x.a.size(); ++i) s = std::max(s, std::fabs(x.a[i] - y.a[i]));
    return s;
}

double max_abs_entry(const Mat& x) {
    double s = 0.0;
    for (double v : x.a) s = std::max(s, std::fabs(v));
    return s;
}

bool solve_linear(Mat A, Vec b, Vec& out) {
    assert(A.rows == A.cols && static_cast<int>(b.size()) == A.rows);
    const int n = A.rows;
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;

    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::fabs(A(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double v = std::fabs(A(r, col));
            if (v > best) { best = v; pivot = r; }
        }
        if (best < 1e-300) return false;
        if (pivot != col) {
            for (int j = 0; j < n; ++j) std::swap(A(col, j), A(pivot, j));
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / A(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double f = A(r, col) * inv;
            if (f == 0.0) continue;
            for (int j = col; j < n; ++j) A(r, j) -= f * A(col, j);
            b[r] -= f * b[col];
        }
    }
    out.assign(n, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= A(i, j) * out[j];
        out[i] = s / A(i, i);
    }
    return true;
}

std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace selgrad
