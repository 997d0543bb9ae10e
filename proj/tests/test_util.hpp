#ifndef MFKL_TESTS_TEST_UTIL_HPP
#define MFKL_TESTS_TEST_UTIL_HPP

#include <vector>

#include "mfkl/chain.hpp"
#include "mfkl/rng.hpp"

namespace mfkl::test {

inline Matrix random_positions(std::size_t n, SpaceKind space, RngStream& rng, double scale = 1.0) {
  Matrix x(n, space.d);
  for (double& v : x.flat()) v = space.is_torus() ? rng.uniform() : scale * rng.gaussian();
  return x;
}

inline ParticleState random_state(std::size_t n, SpaceKind space, RngStream& rng, double x_scale = 1.0,
                                  double v_scale = 1.0) {
  Matrix x = random_positions(n, space, rng, x_scale);
  Matrix v(n, space.d);
  for (double& e : v.flat()) e = v_scale * rng.gaussian();
  return {std::move(x), std::move(v), space};
}

inline std::vector<std::size_t> random_permutation(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i-- > 1;) std::swap(p[i], p[rng.next_u64() % (i + 1)]);
  return p;
}

inline Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t c = 0; c < m.cols(); ++c) out(i, c) = m(perm[i], c);
  return out;
}

}  // namespace mfkl::test

#endif  // MFKL_TESTS_TEST_UTIL_HPP
