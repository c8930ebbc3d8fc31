#pragma once

#include <cstddef>
#include <vector>

namespace dvar {

using Vec = std::vector<double>;

/// Dense row-major matrix. Sized for desk-scale problems (dims < 1000);
/// operations are plain loops with deterministic accumulation order.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

Vec matvec(const Mat& a, const Vec& x);

/// out += A^T * y
void add_matvec_transpose(const Mat& a, const Vec& y, Vec& out);

double dot(const Vec& x, const Vec& y);
double norm(const Vec& x);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine(const Vec& x, const Vec& y);

void axpy(double alpha, const Vec& x, Vec& y);  // y += alpha * x

/// Solve A x = b for square A by Gaussian elimination with partial pivoting.
/// A and b are taken by value (working copies). Throws on singular systems.
Vec solve_linear(Mat a, Vec b);

/// Eigen decomposition of a small symmetric matrix by cyclic Jacobi.
/// Returns eigenvalues ascending; vectors holds the matching eigenvectors as
/// columns.
void sym_eigen(const Mat& a, Vec& values, Mat& vectors);

}  // namespace dvar
