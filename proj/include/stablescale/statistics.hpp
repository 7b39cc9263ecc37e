#pragma once

// Estimators that stay honest under heavy tails.

#include <Eigen/Core>

#include <vector>

namespace stablescale {

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and standard error (unbiased variance over n).
MeanEstimate mean_with_error(const Eigen::Ref<const Eigen::VectorXd>& samples);

/// Median of the means of `blocks` contiguous blocks of (nearly) equal size.
double median_of_means(const Eigen::Ref<const Eigen::VectorXd>& samples, Eigen::Index blocks);

/// Mean after dropping the lowest and highest `fraction` of the samples.
double trimmed_mean(const Eigen::Ref<const Eigen::VectorXd>& samples, double fraction);

/// Block means, in order.
std::vector<double> block_means(const Eigen::Ref<const Eigen::VectorXd>& samples,
                                Eigen::Index blocks);

/// (max - min) of the block means: a crude spread when the variance is infinite.
double block_spread(const Eigen::Ref<const Eigen::VectorXd>& samples, Eigen::Index blocks);

}  // namespace stablescale
