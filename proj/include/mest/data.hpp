#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mest/errors.hpp"
#include "mest/rng.hpp"

namespace mest {

/// Gross-error noise mixture: with probability 1-delta the residual is drawn
/// from N(0, sigma^2), with probability delta from the outlier law
/// N(mu_i, outlier_sigma^2). mu_i is either ||x_i||^2 + 1 (outliers that
/// depend on the features and have nonzero mean) or a fixed constant.
struct GrossErrorSpec {
  enum class MeanMode { XNormPlusOne, Constant };

  double delta = 0.0;
  double sigma = 1.0;
  MeanMode mean_mode = MeanMode::XNormPlusOne;
  double mean_value = 0.0;  // used by MeanMode::Constant
  double outlier_sigma = 3.0;

  void validate() const {
    if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("noise: delta must be in [0,1]");
    if (!(sigma > 0.0)) throw ConfigError("noise: sigma must be positive");
    if (!(outlier_sigma > 0.0)) throw ConfigError("noise: outlier_sigma must be positive");
  }

  double outlier_mean(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return mean_mode == MeanMode::XNormPlusOne ? x.squaredNorm() + 1.0 : mean_value;
  }
};

/// Feature distribution and ground-truth parameter for synthetic data.
struct DesignSpec {
  enum class Dist { GaussianIsotropic, UniformBox };

  int n = 0;
  int p = 0;
  Dist dist = Dist::GaussianIsotropic;
  double tau = 1.0;
  Eigen::VectorXd theta0;

  void validate() const {
    if (n <= 0 || p <= 0) throw ConfigError("design: n and p must be positive");
    if (!(tau > 0.0)) throw ConfigError("design: tau must be positive");
    if (theta0.size() != p) throw ConfigError("design: theta0 must have length p");
  }
};

/// Immutable (X, y) pair, optionally tagged with which rows drew outlier noise.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd x, Eigen::VectorXd y,
          std::optional<std::vector<std::uint8_t>> outlier_mask = std::nullopt)
      : x_(std::move(x)), y_(std::move(y)), outlier_mask_(std::move(outlier_mask)) {
    if (x_.rows() != y_.size()) throw ConfigError("dataset: X rows and y length differ");
    if (outlier_mask_ && static_cast<Eigen::Index>(outlier_mask_->size()) != y_.size()) {
      throw ConfigError("dataset: outlier mask length and y length differ");
    }
  }

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index p() const { return x_.cols(); }
  const std::optional<std::vector<std::uint8_t>>& outlier_mask() const { return outlier_mask_; }

  double outlier_fraction() const {
    if (!outlier_mask_ || outlier_mask_->empty()) return 0.0;
    const auto count = std::count(outlier_mask_->begin(), outlier_mask_->end(), std::uint8_t{1});
    return static_cast<double>(count) / static_cast<double>(outlier_mask_->size());
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  std::optional<std::vector<std::uint8_t>> outlier_mask_;
};

namespace detail {

inline double draw_noise(RngStream& rng, const GrossErrorSpec& noise,
                         const Eigen::Ref<const Eigen::VectorXd>& x, bool& outlier) {
  outlier = rng.next_double() < noise.delta;
  return outlier ? rng.normal(noise.outlier_mean(x), noise.outlier_sigma)
                 : rng.normal(0.0, noise.sigma);
}

}  // namespace detail

/// y_i = <theta0, x_i> + eps_i with eps_i from the gross-error mixture.
/// Row i consumes only streams (seed, *, i), so generation order is
/// irrelevant and rows can be produced in parallel.
inline Dataset generate(const DesignSpec& design, const GrossErrorSpec& noise,
                        std::uint64_t seed) {
  design.validate();
  noise.validate();
  Eigen::MatrixXd x(design.n, design.p);
  Eigen::VectorXd y(design.n);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(design.n), 0);
  for (int i = 0; i < design.n; ++i) {
    RngStream xs(seed, stream::kDesignRow, static_cast<std::uint64_t>(i));
    for (int j = 0; j < design.p; ++j) {
      x(i, j) = design.dist == DesignSpec::Dist::GaussianIsotropic
                    ? design.tau * xs.next_gaussian()
                    : xs.uniform(-design.tau, design.tau);
    }
    RngStream es(seed, stream::kNoiseRow, static_cast<std::uint64_t>(i));
    bool outlier = false;
    const double eps = detail::draw_noise(es, noise, x.row(i), outlier);
    mask[static_cast<std::size_t>(i)] = outlier ? 1 : 0;
    y(i) = design.theta0.dot(x.row(i)) + eps;
  }
  return Dataset(std::move(x), std::move(y), std::move(mask));
}

/// Sparse ground truth: first s0 coordinates equal `value`, the rest zero.
inline Eigen::VectorXd sparse_theta0(int p, int s0, double value) {
  if (p <= 0) throw ConfigError("sparse_theta0: p must be positive");
  if (s0 < 1 || s0 > p) throw ConfigError("sparse_theta0: need 1 <= s0 <= p");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  theta.head(s0).setConstant(value);
  return theta;
}

/// Adds gross-error noise to existing responses (case-study corruption).
inline Dataset corrupt_responses(const Dataset& ds, const GrossErrorSpec& noise,
                                 std::uint64_t seed) {
  noise.validate();
  Eigen::VectorXd y = ds.y();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(ds.n()), 0);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    RngStream es(seed, stream::kCorruptRow, static_cast<std::uint64_t>(i));
    bool outlier = false;
    y(i) += detail::draw_noise(es, noise, ds.x().row(i), outlier);
    mask[static_cast<std::size_t>(i)] = outlier ? 1 : 0;
  }
  return Dataset(ds.x(), std::move(y), std::move(mask));
}

/// Uniformly random partition into (n_train, n - n_train) rows.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, int n_train, std::uint64_t seed) {
  const auto n = static_cast<int>(ds.n());
  if (n_train <= 0 || n_train >= n) throw ConfigError("split: need 0 < n_train < n");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed, stream::kSplit, 0);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<int> train(order.begin(), order.begin() + n_train);
  std::vector<int> test(order.begin() + n_train, order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());

  const auto take = [&ds](const std::vector<int>& rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), ds.p());
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    std::optional<std::vector<std::uint8_t>> mask;
    if (ds.outlier_mask()) mask.emplace(rows.size(), 0);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto idx = static_cast<Eigen::Index>(rows[k]);
      x.row(static_cast<Eigen::Index>(k)) = ds.x().row(idx);
      y(static_cast<Eigen::Index>(k)) = ds.y()(idx);
      if (mask) (*mask)[k] = (*ds.outlier_mask())[static_cast<std::size_t>(idx)];
    }
    return Dataset(std::move(x), std::move(y), std::move(mask));
  };
  return {take(train), take(test)};
}

/// Per-column affine transform fitted on one dataset and reusable on another
/// (train/test consistency). Applies to features only; y passes through.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // sample std, divisor n-1

  Dataset apply(const Dataset& ds) const {
    if (ds.p() != mean.size()) throw ConfigError("standardize: column count mismatch");
    Eigen::MatrixXd x = ds.x();
    x.rowwise() -= mean.transpose();
    x.array().rowwise() /= stddev.transpose().array();
    return Dataset(std::move(x), ds.y(), ds.outlier_mask());
  }
};

/// Centers and scales every feature column to sample mean 0, sample std 1.
inline std::pair<Dataset, Standardization> standardize(const Dataset& ds) {
  const auto n = static_cast<double>(ds.n());
  if (ds.n() < 2) throw DataError("standardize: need at least 2 rows");
  Standardization tf;
  tf.mean = ds.x().colwise().mean();
  Eigen::MatrixXd centered = ds.x().rowwise() - tf.mean.transpose();
  tf.stddev = (centered.colwise().squaredNorm() / (n - 1.0)).cwiseSqrt();
  for (Eigen::Index j = 0; j < tf.stddev.size(); ++j) {
    if (!(tf.stddev(j) > 0.0)) {
      throw DataError("standardize: column " + std::to_string(j + 1) + " is constant");
    }
  }
  return {tf.apply(ds), tf};
}

}  // namespace mest
