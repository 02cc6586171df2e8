#pragma once

#include <cmath>
#include <initializer_list>
#include <vector>

#include "irmbench/errors.hpp"

namespace irmbench {

// Small dense row-major matrix of doubles. Everything in this project is
// d <= ~30, so no attempt is made at blocking or sparsity.
class Matrix {
  public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw ShapeError("Matrix: negative dimension");
    }
    Matrix(std::initializer_list<std::initializer_list<double>> init);

    static Matrix identity(int n);
    // Column vector from values.
    static Matrix col(const std::vector<double>& v);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return a_.empty(); }

    double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    const std::vector<double>& data() const { return a_; }
    std::vector<double>& data() { return a_; }

    Matrix transpose() const;
    Matrix block(int row0, int col0, int nrows, int ncols) const;
    std::vector<double> col_vec(int j) const;
    std::vector<double> row_vec(int i) const;

    bool all_finite() const;
    double max_abs() const;
    double frobenius_norm() const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

  private:
    int rows_, cols_;
    std::vector<double> a_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);

// a^T * b without forming the transpose.
Matrix tmul(const Matrix& a, const Matrix& b);
// a * b^T without forming the transpose.
Matrix mult(const Matrix& a, const Matrix& b);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);

// trace(a^T b) = Frobenius inner product; shapes must match.
double frob_inner(const Matrix& a, const Matrix& b);

void check_same_shape(const Matrix& a, const Matrix& b, const char* where);
void check_mul_shapes(const Matrix& a, const Matrix& b, const char* where);

}  // namespace irmbench
