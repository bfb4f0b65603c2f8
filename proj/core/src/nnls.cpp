#include "forcematch/nnls.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "forcematch/errors.hpp"

namespace forcematch {

namespace {

// Solves gram_PP z = atb_P for the passive set.  LDLT handles the symmetric
// positive semidefinite subproblems that arise from collinear columns.
Eigen::VectorXd solve_passive(const Eigen::MatrixXd& gram, const Eigen::VectorXd& atb,
                              const std::vector<std::size_t>& passive) {
  Eigen::Index m = static_cast<Eigen::Index>(passive.size());
  Eigen::MatrixXd sub(m, m);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    rhs(r) = atb(static_cast<Eigen::Index>(passive[static_cast<std::size_t>(r)]));
    for (Eigen::Index c = 0; c < m; ++c) {
      sub(r, c) = gram(static_cast<Eigen::Index>(passive[static_cast<std::size_t>(r)]),
                       static_cast<Eigen::Index>(passive[static_cast<std::size_t>(c)]));
    }
  }
  return sub.ldlt().solve(rhs);
}

}  // namespace

NnlsResult nnls_gram(const Matrix& gram, std::span<const double> atb, double btb,
                     const NnlsOptions& options) {
  const std::size_t n = gram.cols();
  if (n == 0) {
    throw Error("nnls: system has no columns");
  }
  if (gram.rows() != n || atb.size() != n) {
    throw Error("nnls: inconsistent gram system dimensions");
  }

  Eigen::MatrixXd g(n, n);
  Eigen::VectorXd c(n);
  for (std::size_t i = 0; i < n; ++i) {
    c(static_cast<Eigen::Index>(i)) = atb[i];
    for (std::size_t j = 0; j < n; ++j) {
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = gram(i, j);
    }
  }

  double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  double tol = options.tolerance * scale;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd w = c;  // gradient of -0.5 ||Ax-b||^2, i.e. A^T b - A^T A x
  std::vector<bool> in_passive(n, false);
  std::vector<std::size_t> passive;

  int iterations = 0;
  const int max_iterations = options.max_iterations_per_column * static_cast<int>(n);

  while (true) {
    // Pick the most violated KKT multiplier among the active (zero) set.
    std::size_t best = n;
    double best_w = tol;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_passive[i] && w(static_cast<Eigen::Index>(i)) > best_w) {
        best_w = w(static_cast<Eigen::Index>(i));
        best = i;
      }
    }
    if (best == n) {
      break;  // KKT satisfied
    }

    in_passive[best] = true;
    passive.push_back(best);

    while (true) {
      if (++iterations > max_iterations) {
        throw MaxIterations("nnls: active-set iteration cap hit (degenerate columns?)");
      }

      Eigen::VectorXd z = solve_passive(g, c, passive);

      double min_z = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < z.size(); ++k) {
        min_z = std::min(min_z, z(k));
      }
      if (!std::isfinite(min_z)) {
        throw MaxIterations("nnls: singular passive-set system");
      }
      if (min_z > 0.0) {
        for (std::size_t k = 0; k < passive.size(); ++k) {
          x(static_cast<Eigen::Index>(passive[k])) = z(static_cast<Eigen::Index>(k));
        }
        break;
      }

      // Step from x toward z until the first passive coordinate hits zero.
      double alpha = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < passive.size(); ++k) {
        double zk = z(static_cast<Eigen::Index>(k));
        if (zk <= 0.0) {
          double xk = x(static_cast<Eigen::Index>(passive[k]));
          alpha = std::min(alpha, xk / (xk - zk));
        }
      }
      for (std::size_t k = 0; k < passive.size(); ++k) {
        Eigen::Index idx = static_cast<Eigen::Index>(passive[k]);
        x(idx) += alpha * (z(static_cast<Eigen::Index>(k)) - x(idx));
      }

      // Demote coordinates that reached zero.
      std::vector<std::size_t> still;
      still.reserve(passive.size());
      for (std::size_t idx : passive) {
        if (x(static_cast<Eigen::Index>(idx)) > scale * 1e-14) {
          still.push_back(idx);
        } else {
          x(static_cast<Eigen::Index>(idx)) = 0.0;
          in_passive[idx] = false;
        }
      }
      passive = std::move(still);
      if (passive.empty()) {
        break;
      }
    }

    w = c - g * x;
  }

  NnlsResult result;
  result.x.assign(x.data(), x.data() + n);
  result.rss = std::max(0.0, btb - 2.0 * c.dot(x) + x.dot(g * x));
  result.iterations = iterations;
  return result;
}

NnlsResult nnls(const Matrix& a, std::span<const double> b, const NnlsOptions& options) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (n == 0) {
    throw Error("nnls: matrix has no columns");
  }
  if (b.size() != m) {
    throw Error("nnls: rhs length does not match row count");
  }

  Matrix gram(n, n);
  std::vector<double> atb(n, 0.0);
  double btb = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    btb += b[r] * b[r];
    for (std::size_t i = 0; i < n; ++i) {
      double ari = a(r, i);
      if (ari == 0.0) continue;
      atb[i] += ari * b[r];
      for (std::size_t j = i; j < n; ++j) {
        gram(i, j) += ari * a(r, j);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      gram(i, j) = gram(j, i);
    }
  }

  NnlsResult result = nnls_gram(gram, atb, btb, options);

  // Recompute rss from the actual residual; the Gram form can lose digits.
  double rss = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    double pred = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      pred += a(r, j) * result.x[j];
    }
    double diff = pred - b[r];
    rss += diff * diff;
  }
  result.rss = rss;
  return result;
}

}  // namespace forcematch
