#ifndef BFACTOR_DATAGEN_HPP
#define BFACTOR_DATAGEN_HPP

#include <cstdint>

#include "bfactor/dataset.hpp"
#include "bfactor/linalg.hpp"

namespace bfactor::datagen {

// First synthetic study: n = 100 draws from N(0, B0 B0' + I) with p = 1956
// and five factors. Factor k loads with value 1 on the 500 consecutive rows
// starting at (k-1)*364, so successive factors overlap in 136 rows and the
// five blocks tile all 1956 rows exactly.
struct Example1 {
  Dataset data;   // 100 x 1956
  Matrix B0;      // 1956 x 5
  Matrix Sigma0;  // B0 B0' + I
};
Example1 synth_example1(std::uint64_t seed);

// Second synthetic study: loadings are zero with probability 2/3 and U(0,1)
// otherwise, noise variances are U(0.1, 1), X ~ N(0, B0 B0' + Omega0).
struct Example2 {
  Dataset data;   // n x p
  Matrix B0;      // p x 5
  Vector omega0;  // p noise variances
  Matrix Sigma0;  // B0 B0' + diag(omega0)
};
Example2 synth_example2(Index n, Index p, std::uint64_t seed);

}  // namespace bfactor::datagen

#endif  // BFACTOR_DATAGEN_HPP
