#include "dvar/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include "dvar/common.hpp"

namespace dvar {

Vec matvec(const Mat& a, const Vec& x) {
    if (x.size() != a.cols) {
        throw InputError("matvec: vector size " + std::to_string(x.size()) +
                         " does not match matrix cols " + std::to_string(a.cols));
    }
    Vec out(a.rows, 0.0);
    for (std::size_t r = 0; r < a.rows; ++r) {
        double acc = 0.0;
        const double* row = &a.data[r * a.cols];
        for (std::size_t c = 0; c < a.cols; ++c) {
            acc += row[c] * x[c];
        }
        out[r] = acc;
    }
    return out;
}

void add_matvec_transpose(const Mat& a, const Vec& y, Vec& out) {
    if (y.size() != a.rows || out.size() != a.cols) {
        throw InputError("add_matvec_transpose: shape mismatch");
    }
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double yr = y[r];
        const double* row = &a.data[r * a.cols];
        for (std::size_t c = 0; c < a.cols; ++c) {
            out[c] += row[c] * yr;
        }
    }
}

double dot(const Vec& x, const Vec& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

double norm(const Vec& x) {
    return std::sqrt(dot(x, x));
}

double cosine(const Vec& x, const Vec& y) {
    const double nx = norm(x);
    const double ny = norm(y);
    if (nx == 0.0 || ny == 0.0) {
        return 0.0;
    }
    return dot(x, y) / (nx * ny);
}

void axpy(double alpha, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

Vec solve_linear(Mat a, Vec b) {
    const std::size_t n = a.rows;
    if (a.cols != n || b.size() != n) {
        throw InputError("solve_linear: system is not square");
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::fabs(a(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::fabs(a(r, col)) > best) {
                best = std::fabs(a(r, col));
                pivot = r;
            }
        }
        if (best == 0.0) {
            throw InputError("solve_linear: singular matrix");
        }
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(a(pivot, c), a(col, c));
            }
            std::swap(b[pivot], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a(r, col) / a(col, col);
            if (factor == 0.0) {
                continue;
            }
            for (std::size_t c = col; c < n; ++c) {
                a(r, c) -= factor * a(col, c);
            }
            b[r] -= factor * b[col];
        }
    }
    Vec x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < n; ++c) {
            acc -= a(i, c) * x[c];
        }
        x[i] = acc / a(i, i);
    }
    return x;
}

}  // namespace dvar
