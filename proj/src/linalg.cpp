#include "hybridgen/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hybridgen::linalg {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols) +
                         " vs " + std::to_string(b.rows) + ")");
    }
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            float acc = 0.0f;
            for (std::size_t k = 0; k < a.cols; ++k) {
                acc += a.at(i, k) * b.at(k, j);
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

Vector vecmat(const Vector& v, const Matrix& m) {
    if (v.size() != m.rows) {
        throw ShapeError("vecmat: vector length " + std::to_string(v.size()) +
                         " does not match matrix rows " + std::to_string(m.rows));
    }
    Vector out(m.cols, 0.0f);
    for (std::size_t j = 0; j < m.cols; ++j) {
        float acc = 0.0f;
        for (std::size_t k = 0; k < m.rows; ++k) {
            acc += v[k] * m.at(k, j);
        }
        out[j] = acc;
    }
    return out;
}

Vector softmax(const Vector& v) {
    if (v.empty()) {
        throw ShapeError("softmax: empty vector");
    }
    const float m = *std::max_element(v.begin(), v.end());
    Vector out(v.size());
    float sum = 0.0f;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (float& x : out) {
        x /= sum;
    }
    return out;
}

float scaled_dot(const Vector& q, const Vector& k, std::size_t d) {
    if (q.size() != k.size()) {
        throw ShapeError("scaled_dot: length mismatch (" + std::to_string(q.size()) +
                         " vs " + std::to_string(k.size()) + ")");
    }
    return scaled_dot(q.data(), k.data(), q.size(), d);
}

float scaled_dot(const float* q, const float* k, std::size_t len, std::size_t d) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < len; ++i) {
        acc += q[i] * k[i];
    }
    return acc / std::sqrt(static_cast<float>(d));
}

float dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: length mismatch");
    }
    float acc = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

float norm2(const Vector& v) {
    float acc = 0.0f;
    for (float x : v) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

float cosine_similarity(const Vector& a, const Vector& b) {
    const float na = norm2(a);
    const float nb = norm2(b);
    if (na == 0.0f || nb == 0.0f) {
        return 0.0f;
    }
    return dot(a, b) / (na * nb);
}

} // namespace hybridgen::linalg
