#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "gpvae/simd.hpp"

using namespace gpvae::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / (1.0 + std::abs(b[i])));
  return m;
}

}  // namespace

TEST_CASE("scalar and AVX2 kernels agree") {
  const KernelTable* v = avx2_kernels();
  if (!v || !cpu_has_avx2()) {
    MESSAGE("AVX2 unavailable; only the scalar path is exercised");
    return;
  }
  const KernelTable& s = scalar_kernels();
  std::mt19937_64 rng(3);
  for (std::size_t n : {0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 31, 64, 129}) {
    const auto a = random_vec(n, rng), b = random_vec(n, rng);
    CHECK(std::abs(s.dot(a.data(), b.data(), n) - v->dot(a.data(), b.data(), n)) < 1e-12 * (1.0 + n));

    auto y1 = random_vec(n, rng), y2 = y1;
    s.axpy(0.7, a.data(), y1.data(), n);
    v->axpy(0.7, a.data(), y2.data(), n);
    CHECK(max_rel(y1, y2) < 1e-15);

    std::vector<double> r1(n), r2(n);
    s.relu(a.data(), r1.data(), n);
    v->relu(a.data(), r2.data(), n);
    CHECK(r1 == r2);

    auto g1 = random_vec(n, rng), g2 = g1;
    s.relu_backward(a.data(), b.data(), g1.data(), n);
    v->relu_backward(a.data(), b.data(), g2.data(), n);
    CHECK(g1 == g2);
  }
  const std::vector<std::array<std::size_t, 3>> sizes = {{1, 1, 1}, {3, 5, 7}, {4, 4, 4}, {9, 17, 13}, {33, 8, 65}, {2, 64, 3}};
  for (auto [m, k, n] : sizes) {
    const auto A = random_vec(m * k, rng), B = random_vec(k * n, rng), Bt = random_vec(n * k, rng),
               At = random_vec(k * m, rng);
    auto c0 = random_vec(m * n, rng);
    auto c1 = c0, c2 = c0;
    s.gemm_nn(A.data(), B.data(), c1.data(), m, k, n);
    v->gemm_nn(A.data(), B.data(), c2.data(), m, k, n);
    CHECK(max_rel(c1, c2) < 1e-12);
    c1 = c0, c2 = c0;
    s.gemm_nt(A.data(), Bt.data(), c1.data(), m, k, n);
    v->gemm_nt(A.data(), Bt.data(), c2.data(), m, k, n);
    CHECK(max_rel(c1, c2) < 1e-12);
    c1 = c0, c2 = c0;
    s.gemm_tn(At.data(), B.data(), c1.data(), m, k, n);
    v->gemm_tn(At.data(), B.data(), c2.data(), m, k, n);
    CHECK(max_rel(c1, c2) < 1e-12);
  }
}

TEST_CASE("scalar gemm matches the textbook triple loop") {
  const KernelTable& s = scalar_kernels();
  const std::vector<double> A = {1, 2, 3, 4, 5, 6};  // 2x3
  const std::vector<double> B = {7, 8, 9, 10, 11, 12};  // 3x2
  std::vector<double> C = {1, 1, 1, 1};
  s.gemm_nn(A.data(), B.data(), C.data(), 2, 3, 2);
  CHECK(C == std::vector<double>{59, 65, 140, 155});
}

TEST_CASE("force_isa switches the active table") {
  const Isa before = active_isa();
  CHECK(force_isa(Isa::Scalar) == Isa::Scalar);
  CHECK(kernels().isa == Isa::Scalar);
  force_isa(before);
  CHECK(active_isa() == before);
  CHECK(isa_name(Isa::Avx2) == "avx2");
}
