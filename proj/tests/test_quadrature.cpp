#include "nlmech/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace nlmech;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// exact integral of x^a y^b z^c over the reference tet
double tetMoment(int a, int b, int c) {
  return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
}

// exact integral of x^a y^b over the reference triangle
double triMoment(int a, int b) {
  return factorial(a) * factorial(b) / factorial(a + b + 2);
}

double integrateTet(const QuadratureRule& r, int a, int b, int c) {
  double sum = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) {
    const double x = r.points[q][1], y = r.points[q][2], z = r.points[q][3];
    sum += r.weights[q] * std::pow(x, a) * std::pow(y, b) * std::pow(z, c);
  }
  return sum;
}

double integrateTri(const QuadratureRule& r, int a, int b) {
  double sum = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) {
    const double x = r.points[q][1], y = r.points[q][2];
    sum += r.weights[q] * std::pow(x, a) * std::pow(y, b);
  }
  return sum;
}

}  // namespace

TEST(Quadrature, TetRulesAreExactToDeclaredDegree) {
  for (int degree : {1, 2, 3, 4, 5, 6}) {
    const QuadratureRule rule = tet_quadrature(degree);
    ASSERT_GE(rule.degree, degree);
    for (int a = 0; a <= rule.degree; ++a)
      for (int b = 0; a + b <= rule.degree; ++b)
        for (int c = 0; a + b + c <= rule.degree; ++c)
          EXPECT_NEAR(integrateTet(rule, a, b, c), tetMoment(a, b, c),
                      1e-14 * (1.0 + std::abs(tetMoment(a, b, c))))
              << "degree " << degree << " monomial " << a << b << c;
  }
}

TEST(Quadrature, TetWeightsPositiveAndSumToReferenceVolume) {
  for (int degree : {1, 2, 4, 6}) {
    const QuadratureRule rule = tet_quadrature(degree);
    double sum = 0.0;
    for (double w : rule.weights) {
      EXPECT_GT(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0 / 6.0, 1e-14);
  }
}

TEST(Quadrature, TriangleRulesAreExactToDeclaredDegree) {
  for (int degree : {1, 2, 3, 4, 5}) {
    const QuadratureRule rule = tri_quadrature(degree);
    ASSERT_GE(rule.degree, degree);
    for (int a = 0; a <= rule.degree; ++a)
      for (int b = 0; a + b <= rule.degree; ++b)
        EXPECT_NEAR(integrateTri(rule, a, b), triMoment(a, b), 1e-14)
            << "degree " << degree << " monomial " << a << b;
  }
}

TEST(Quadrature, TriangleWeightsPositiveAndSumToReferenceArea) {
  for (int degree : {1, 2, 4}) {
    const QuadratureRule rule = tri_quadrature(degree);
    double sum = 0.0;
    for (double w : rule.weights) {
      EXPECT_GT(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 0.5, 1e-14);
  }
}
