#pragma once

#include <cstddef>
#include <vector>

#include "hybridgen/errors.hpp"

namespace hybridgen::linalg {

using Vector = std::vector<float>;

// Dense row-major float matrix. Accumulations are sequential so results are
// reproducible bit-for-bit across runs and thread counts.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data; // rows * cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

    float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    const float* row(std::size_t r) const { return data.data() + r * cols; }
};

Matrix matmul(const Matrix& a, const Matrix& b);

// v * m for a row vector v of length m.rows; the workhorse for weight
// projections (x . W).
Vector vecmat(const Vector& v, const Matrix& m);

// Numerically stable softmax (max subtraction). Preserves the argmax.
Vector softmax(const Vector& v);

// (q . k) / sqrt(d). q and k must have equal length; d is the per-head
// dimension used for scaling, independent of the vector length.
float scaled_dot(const Vector& q, const Vector& k, std::size_t d);

// Same scaling applied to raw float ranges, used on per-head slices.
float scaled_dot(const float* q, const float* k, std::size_t len, std::size_t d);

float dot(const Vector& a, const Vector& b);
float norm2(const Vector& v);

// cos(a, b); zero-norm inputs yield 0.
float cosine_similarity(const Vector& a, const Vector& b);

} // namespace hybridgen::linalg
