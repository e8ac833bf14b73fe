#include <doctest.h>

#include <cmath>
#include <random>

#include "hybridgen/errors.hpp"
#include "hybridgen/linalg.hpp"

using namespace hybridgen;
using linalg::Matrix;
using linalg::Vector;

namespace {

// Brute-force oracle, deliberately written against a different data layout
// than the implementation.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    for (std::size_t k = 0; k < a.cols; ++k) {
        for (std::size_t i = 0; i < a.rows; ++i) {
            for (std::size_t j = 0; j < b.cols; ++j) {
                out.at(i, j) += a.at(i, k) * b.at(k, j);
            }
        }
    }
    return out;
}

Matrix random_matrix(std::mt19937& rng, std::size_t r, std::size_t c) {
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    Matrix m(r, c);
    for (float& x : m.data) x = dist(rng);
    return m;
}

Vector random_vector(std::mt19937& rng, std::size_t n) {
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    Vector v(n);
    for (float& x : v) x = dist(rng);
    return v;
}

} // namespace

TEST_CASE("matmul identity and scalar cases") {
    Matrix eye(2, 2);
    eye.at(0, 0) = 1.0f;
    eye.at(1, 1) = 1.0f;
    Matrix b(2, 3);
    for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] = static_cast<float>(i) + 1.0f;

    const Matrix prod = linalg::matmul(eye, b);
    CHECK(prod.data == b.data);

    Matrix two(1, 1);
    two.at(0, 0) = 2.0f;
    Matrix three(1, 1);
    three.at(0, 0) = 3.0f;
    CHECK(linalg::matmul(two, three).at(0, 0) == 6.0f);
}

TEST_CASE("matmul matches the naive triple-loop oracle exactly") {
    std::mt19937 rng(7);
    const Matrix a = random_matrix(rng, 5, 4);
    const Matrix b = random_matrix(rng, 4, 3);
    const Matrix got = linalg::matmul(a, b);
    const Matrix want = naive_matmul(a, b);
    REQUIRE(got.data.size() == want.data.size());
    for (std::size_t i = 0; i < got.data.size(); ++i) {
        // Different accumulation orders agree to float rounding here; the
        // dims are tiny so demand near-exactness.
        CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("matmul rejects mismatched shapes") {
    Matrix a(2, 3);
    Matrix b(2, 2);
    CHECK_THROWS_AS(linalg::matmul(a, b), ShapeError);
}

TEST_CASE("matmul associativity within 1e-4 relative") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = random_matrix(rng, 4, 5);
        const Matrix b = random_matrix(rng, 5, 3);
        const Matrix c = random_matrix(rng, 3, 4);
        const Matrix left = linalg::matmul(linalg::matmul(a, b), c);
        const Matrix right = linalg::matmul(a, linalg::matmul(b, c));
        for (std::size_t i = 0; i < left.data.size(); ++i) {
            const float denom = std::max(1.0f, std::abs(right.data[i]));
            CHECK(std::abs(left.data[i] - right.data[i]) / denom < 1e-4f);
        }
    }
}

TEST_CASE("softmax closed forms") {
    const Vector uniform = linalg::softmax({2.5f, 2.5f, 2.5f});
    for (float x : uniform) CHECK(x == doctest::Approx(1.0f / 3.0f));

    const Vector single = linalg::softmax({-17.0f});
    CHECK(single.size() == 1);
    CHECK(single[0] == 1.0f);

    // e^0 = 1, e^{ln 2} = 2 -> [1/3, 2/3]
    const Vector two = linalg::softmax({0.0f, std::log(2.0f)});
    CHECK(two[0] == doctest::Approx(1.0f / 3.0f).epsilon(1e-6));
    CHECK(two[1] == doctest::Approx(2.0f / 3.0f).epsilon(1e-6));
}

TEST_CASE("softmax rejects empty input") {
    CHECK_THROWS_AS(linalg::softmax({}), ShapeError);
}

TEST_CASE("softmax properties: probability vector, shift invariance, argmax") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> shift_dist(-50.0f, 50.0f);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<std::size_t> len_dist(1, 32);
        Vector v = random_vector(rng, len_dist(rng));
        for (float& x : v) x *= 10.0f;

        const Vector s = linalg::softmax(v);
        float sum = 0.0f;
        for (float x : s) {
            CHECK(x >= 0.0f);
            sum += x;
        }
        CHECK(sum == doctest::Approx(1.0f).epsilon(1e-6));

        const float c = shift_dist(rng);
        Vector shifted = v;
        for (float& x : shifted) x += c;
        const Vector s2 = linalg::softmax(shifted);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(std::abs(s[i] - s2[i]) < 1e-6f);
        }

        const auto argmax_in =
            std::max_element(v.begin(), v.end()) - v.begin();
        const auto argmax_out =
            std::max_element(s.begin(), s.end()) - s.begin();
        CHECK(argmax_in == argmax_out);
    }
}

TEST_CASE("scaled_dot closed forms and oracle") {
    const Vector e1 = {1.0f, 0.0f, 0.0f, 0.0f};
    CHECK(linalg::scaled_dot(e1, e1, 4) == doctest::Approx(0.5f)); // 1/sqrt(4)

    const Vector zero(6, 0.0f);
    std::mt19937 rng(5);
    const Vector k = random_vector(rng, 6);
    CHECK(linalg::scaled_dot(zero, k, 6) == 0.0f);

    const Vector q8 = random_vector(rng, 8);
    const Vector k8 = random_vector(rng, 8);
    float acc = 0.0f;
    for (std::size_t i = 0; i < 8; ++i) acc += q8[i] * k8[i];
    CHECK(linalg::scaled_dot(q8, k8, 8) ==
          doctest::Approx(acc / std::sqrt(8.0f)).epsilon(1e-6));

    CHECK_THROWS_AS(linalg::scaled_dot(e1, k8, 4), ShapeError);
}

TEST_CASE("cosine similarity handles zero norm") {
    CHECK(linalg::cosine_similarity({0.0f, 0.0f}, {1.0f, 2.0f}) == 0.0f);
    CHECK(linalg::cosine_similarity({1.0f, 0.0f}, {1.0f, 0.0f}) == doctest::Approx(1.0f));
    CHECK(linalg::cosine_similarity({1.0f, 0.0f}, {-1.0f, 0.0f}) == doctest::Approx(-1.0f));
}
