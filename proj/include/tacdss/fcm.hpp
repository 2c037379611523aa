#pragma once

// Fuzzy c-means clustering with squared Euclidean dissimilarity.
//
// Layout conventions used throughout:
//   data        n x d   one row per point
//   partition   c x n   one column per point, columns sum to 1
//   centers     c x d   one row per cluster

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tacdss/errors.hpp"
#include "tacdss/random.hpp"

namespace tacdss::fcm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct PartitionMatrix {
  Matrix memberships;  // c x n

  Eigen::Index clusters() const { return memberships.rows(); }
  Eigen::Index points() const { return memberships.cols(); }
};

struct ClusterCenters {
  Matrix centers;  // c x d

  Eigen::Index clusters() const { return centers.rows(); }
  Eigen::Index dims() const { return centers.cols(); }
};

struct FcmConfig {
  int c = 3;
  double m = 2.0;
  double tol = 1e-5;
  int max_iter = 100;
  std::uint64_t seed = 0;
};

struct FcmResult {
  PartitionMatrix partition;
  ClusterCenters centers;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
};

/// Minimum center separation accepted at the end of a fit.
inline constexpr double kDegeneracyTolerance = 1e-9;
/// Allowed drift of a partition column sum away from 1.
inline constexpr double kColumnSumTolerance = 1e-12;

namespace detail {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_fuzziness(double m) {
  if (!(m > 1.0) || !std::isfinite(m)) {
    throw InvalidArgument("fuzziness exponent m must be finite and > 1, got " + std::to_string(m));
  }
}

}  // namespace detail

/// Squared Euclidean distance ||x - v||^2.
template <typename DerivedX, typename DerivedV>
double dissimilarity(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedV>& v) {
  if (x.size() != v.size() || x.size() == 0) {
    throw InvalidArgument("dissimilarity: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                          std::to_string(v.size()) + ")");
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double diff = x.derived().coeff(k) - v.derived().coeff(k);
    sum += diff * diff;
  }
  return sum;
}

inline double dissimilarity(const std::vector<double>& x, const std::vector<double>& v) {
  return dissimilarity(Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())),
                       Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
}

/// Sum over clusters and points of u^m * ||x_j - v_i||^2.
inline double objective(const PartitionMatrix& partition, const ClusterCenters& centers,
                        const Matrix& data, double m) {
  detail::require_fuzziness(m);
  if (partition.clusters() != centers.clusters() || partition.points() != data.rows() ||
      centers.dims() != data.cols()) {
    throw InvalidArgument("objective: inconsistent shapes");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < centers.clusters(); ++i) {
    for (Eigen::Index j = 0; j < data.rows(); ++j) {
      const double u = partition.memberships(i, j);
      if (u == 0.0) continue;
      total += std::pow(u, m) * dissimilarity(data.row(j), centers.centers.row(i));
    }
  }
  return total;
}

/// Membership^m weighted mean of the data for every cluster.
inline ClusterCenters update_centers(const PartitionMatrix& partition, const Matrix& data, double m) {
  detail::require_fuzziness(m);
  if (partition.points() != data.rows()) {
    throw InvalidArgument("update_centers: partition has " + std::to_string(partition.points()) +
                          " columns but data has " + std::to_string(data.rows()) + " rows");
  }
  const Eigen::Index c = partition.clusters();
  ClusterCenters out{Matrix::Zero(c, data.cols())};
  for (Eigen::Index i = 0; i < c; ++i) {
    double weight_sum = 0.0;
    for (Eigen::Index j = 0; j < data.rows(); ++j) {
      const double w = std::pow(partition.memberships(i, j), m);
      weight_sum += w;
      out.centers.row(i) += w * data.row(j);
    }
    if (!(weight_sum > 0.0)) {
      throw DegenerateCluster("cluster " + std::to_string(i) + " has no membership mass");
    }
    out.centers.row(i) /= weight_sum;
  }
  return out;
}

/// Optimal memberships for fixed centers. A point sitting exactly on one or
/// more centers gets its whole membership split equally among those centers.
inline PartitionMatrix update_memberships(const Matrix& data, const ClusterCenters& centers, double m) {
  detail::require_fuzziness(m);
  if (centers.dims() != data.cols()) {
    throw InvalidArgument("update_memberships: center dimension " + std::to_string(centers.dims()) +
                          " does not match data dimension " + std::to_string(data.cols()));
  }
  if (!detail::all_finite(centers.centers)) {
    throw InvalidArgument("update_memberships: non-finite center");
  }
  const Eigen::Index c = centers.clusters();
  const Eigen::Index n = data.rows();
  const double exponent = 1.0 / (m - 1.0);
  PartitionMatrix out{Matrix::Zero(c, n)};
  Vector dist(c);
  for (Eigen::Index j = 0; j < n; ++j) {
    int coincident = 0;
    for (Eigen::Index i = 0; i < c; ++i) {
      dist(i) = dissimilarity(data.row(j), centers.centers.row(i));
      if (dist(i) == 0.0) ++coincident;
    }
    if (coincident > 0) {
      const double share = 1.0 / coincident;
      for (Eigen::Index i = 0; i < c; ++i) out.memberships(i, j) = dist(i) == 0.0 ? share : 0.0;
      continue;
    }
    // Scale by the smallest distance so the powers cannot overflow for large m.
    const double nearest = dist.minCoeff();
    double denom = 0.0;
    for (Eigen::Index i = 0; i < c; ++i) {
      dist(i) = std::pow(nearest / dist(i), exponent);
      denom += dist(i);
    }
    for (Eigen::Index i = 0; i < c; ++i) out.memberships(i, j) = dist(i) / denom;
  }
  return out;
}

/// Seeded uniform random partition, column-normalized.
inline PartitionMatrix random_partition(Eigen::Index c, Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  PartitionMatrix out{Matrix(c, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < c; ++i) {
      // Keep strictly positive so no cluster starts empty.
      const double u = rng.uniform() + 1e-12;
      out.memberships(i, j) = u;
      sum += u;
    }
    out.memberships.col(j) /= sum;
  }
  return out;
}

/// Empty string when the partition satisfies the column-sum, range and
/// nonempty-proper-cluster constraints; otherwise a description of the first
/// violation.
inline std::string partition_violation(const PartitionMatrix& partition) {
  const auto& u = partition.memberships;
  const auto n = static_cast<double>(u.cols());
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      if (!(u(i, j) >= 0.0 && u(i, j) <= 1.0)) {
        return "membership (" + std::to_string(i) + "," + std::to_string(j) + ") outside [0,1]";
      }
    }
    if (std::abs(u.col(j).sum() - 1.0) > kColumnSumTolerance) {
      return "column " + std::to_string(j) + " does not sum to 1";
    }
  }
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double row = u.row(i).sum();
    if (!(row > 0.0 && row < n)) return "cluster " + std::to_string(i) + " is empty or total";
  }
  return {};
}

namespace detail {

inline void validate_fit_input(const Matrix& data, const FcmConfig& config) {
  detail::require_fuzziness(config.m);
  if (config.c < 2) throw InvalidArgument("fcm_fit: c must be at least 2");
  if (data.rows() <= config.c) {
    throw InvalidArgument("fcm_fit: need more points than clusters (n=" + std::to_string(data.rows()) +
                          ", c=" + std::to_string(config.c) + ")");
  }
  if (data.cols() < 1) throw InvalidArgument("fcm_fit: data has no columns");
  if (!all_finite(data)) throw InvalidArgument("fcm_fit: non-finite data");
  if (!(config.tol > 0.0)) throw InvalidArgument("fcm_fit: tol must be > 0");
  if (config.max_iter < 1) throw InvalidArgument("fcm_fit: max_iter must be positive");
}

}  // namespace detail

/// Alternates center and membership updates from the given partition until
/// the largest membership change drops below config.tol. The returned
/// (partition, centers) pair is self-consistent: centers = update_centers(partition)
/// and one more membership update would move no entry by tol or more.
inline FcmResult fcm_fit(const Matrix& data, const FcmConfig& config, PartitionMatrix initial) {
  detail::validate_fit_input(data, config);
  if (initial.clusters() != config.c || initial.points() != data.rows()) {
    throw InvalidArgument("fcm_fit: initial partition has the wrong shape");
  }
  FcmResult result;
  result.partition = std::move(initial);
  result.centers = update_centers(result.partition, data, config.m);
  result.objective_trace.push_back(objective(result.partition, result.centers, data, config.m));

  while (result.iterations < config.max_iter) {
    PartitionMatrix next = update_memberships(data, result.centers, config.m);
    const double change = (next.memberships - result.partition.memberships).cwiseAbs().maxCoeff();
    if (change < config.tol) {
      result.converged = true;
      break;
    }
    result.partition = std::move(next);
    result.centers = update_centers(result.partition, data, config.m);
    result.objective_trace.push_back(objective(result.partition, result.centers, data, config.m));
    ++result.iterations;
  }

  if (auto violation = partition_violation(result.partition); !violation.empty()) {
    throw DegenerateCluster("fcm_fit: " + violation);
  }
  for (Eigen::Index a = 0; a < config.c; ++a) {
    for (Eigen::Index b = a + 1; b < config.c; ++b) {
      if (std::sqrt(dissimilarity(result.centers.centers.row(a), result.centers.centers.row(b))) <=
          kDegeneracyTolerance) {
        throw DegenerateCluster("fcm_fit: centers " + std::to_string(a) + " and " + std::to_string(b) +
                                " coincide");
      }
    }
  }
  return result;
}

inline FcmResult fcm_fit(const Matrix& data, const FcmConfig& config) {
  detail::validate_fit_input(data, config);
  return fcm_fit(data, config, random_partition(config.c, data.rows(), config.seed));
}

}  // namespace tacdss::fcm
