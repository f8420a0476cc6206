#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace selgrad {

using Vec = std::vector<double>;

// Small dense row-major matrix. Everything in this project is desk scale
// (p <= ~16, m <= ~50), so there is no need for a linear algebra library.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    Vec row(int i) const { return Vec(a.begin() + static_cast<size_t>(i) * cols, a.begin() + static_cast<size_t>(i + 1) * cols); }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

Mat matmul(const Mat& x, const Mat& y);

double dot(const Vec& x, const Vec& y);
double norm2(const Vec& x);
double norm_inf(const Vec& x);
Vec vsub(const Vec& x, const Vec& y);
Vec vadd(const Vec& x, const Vec& y);
Vec vscale(const Vec& x, double c);
double max_abs_diff(const Vec& x, const Vec& y);
double max_abs_diff(const Mat& x, const Mat& y);
double max_abs_entry(const Mat& x);

// Solves A z = b in place by Gaussian elimination with partial pivoting.
// Returns false when a pivot is (numerically) zero.
bool solve_linear(Mat A, Vec b, Vec& out);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace selgrad
