#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sgdlab {

using Vec = std::vector<double>;

// Dense row-major matrix, sized for the small systems in this project
// (Hessians and covariances up to a few hundred rows).
class Mat {
public:
    Mat() : rows_(0), cols_(0) {}
    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat diag(std::span<const double> d) {
        Mat m(static_cast<int>(d.size()), static_cast<int>(d.size()));
        for (int i = 0; i < m.rows(); ++i) m(i, i) = d[i];
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    const std::vector<double>& data() const { return a_; }
    std::vector<double>& data() { return a_; }

    bool operator==(const Mat& o) const = default;

private:
    int rows_, cols_;
    std::vector<double> a_;
};

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);

// B^T A B
Mat congruence(const Mat& a, const Mat& b);

double max_abs_asymmetry(const Mat& m);
bool is_symmetric(const Mat& m, double tol);
Mat symmetrize(const Mat& m);

double trace(const Mat& m);

struct EigenSym {
    Vec values;    // ascending
    Mat vectors;   // column k is the eigenvector of values[k]
};

// Cyclic Jacobi eigensolver for symmetric matrices. Accurate and
// allocation-light; O(n^3) per sweep is fine at the sizes used here.
EigenSym eigh(const Mat& m);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);  // y += alpha*x

}  // namespace sgdlab
