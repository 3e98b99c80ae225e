#ifndef BFACTOR_DIST_HPP
#define BFACTOR_DIST_HPP

#include "bfactor/rng.hpp"

namespace bfactor {

// Elementary samplers. All use the shape-rate parameterization for gamma-type
// distributions and throw std::invalid_argument on non-positive parameters.

// Gamma(shape, rate), density proportional to x^(shape-1) exp(-rate x).
double sample_gamma(double shape, double rate, RngStream& rng);

// Reciprocal of a Gamma(shape, rate) draw.
double sample_inverse_gamma(double shape, double rate, RngStream& rng);

// Inverse-Gaussian with E[X] = mean and Var[X] = mean^3 / shape.
double sample_inverse_gaussian(double mean, double shape, RngStream& rng);

// Exponential with the given rate (mean 1/rate).
double sample_exponential(double rate, RngStream& rng);

// psi(x) and psi'(x) for x > 0, accurate to at least 10 significant digits.
double digamma(double x);
double trigamma(double x);

}  // namespace bfactor

#endif  // BFACTOR_DIST_HPP
