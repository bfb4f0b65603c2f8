#ifndef FORCEMATCH_NNLS_HPP
#define FORCEMATCH_NNLS_HPP

#include <span>
#include <vector>

#include "forcematch/linalg.hpp"

// Non-negative least squares: minimize ||Ax - b||^2 subject to x >= 0, by the
// Lawson-Hanson active-set method run on the normal equations (A^T A, A^T b).
// The Gram entry point lets the model objective reuse accumulated normal
// equations without materializing A.

namespace forcematch {

struct NnlsResult {
  std::vector<double> x;  // elementwise >= 0
  double rss = 0.0;       // ||Ax - b||^2
  int iterations = 0;
};

struct NnlsOptions {
  // An index enters the passive set only while its gradient component exceeds
  // this, relative to max(1, ||A^T b||_inf).
  double tolerance = 1e-10;
  // Outer iteration cap as a multiple of the column count (cycling guard).
  int max_iterations_per_column = 10;
};

// Solves from the Gram system: gram = A^T A (n x n, symmetric), atb = A^T b,
// btb = b^T b.  rss is recovered as btb - 2 x.atb + x.gram.x, clamped at 0.
// Throws MaxIterations on cycling, Error on dimension mismatches.
NnlsResult nnls_gram(const Matrix& gram, std::span<const double> atb, double btb,
                     const NnlsOptions& options = {});

// Solves from the design matrix directly; rss is computed from the actual
// residual vector.
NnlsResult nnls(const Matrix& a, std::span<const double> b, const NnlsOptions& options = {});

}  // namespace forcematch

#endif
