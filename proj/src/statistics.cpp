#include "stablescale/statistics.hpp"

#include <algorithm>
#include <cmath>

#include "stablescale/errors.hpp"

namespace stablescale {

MeanEstimate mean_with_error(const Eigen::Ref<const Eigen::VectorXd>& samples) {
  const Eigen::Index n = samples.size();
  if (n == 0) throw ConfigurationError("mean_with_error: no samples");
  MeanEstimate out;
  out.mean = samples.mean();
  if (n > 1) {
    const double ss = (samples.array() - out.mean).square().sum();
    out.std_error = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return out;
}

std::vector<double> block_means(const Eigen::Ref<const Eigen::VectorXd>& samples,
                                Eigen::Index blocks) {
  const Eigen::Index n = samples.size();
  if (blocks < 1 || blocks > n) {
    throw ConfigurationError("block_means: need 1 <= blocks <= samples");
  }
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(blocks));
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index begin = b * n / blocks;
    const Eigen::Index end = (b + 1) * n / blocks;
    means.push_back(samples.segment(begin, end - begin).mean());
  }
  return means;
}

double median_of_means(const Eigen::Ref<const Eigen::VectorXd>& samples, Eigen::Index blocks) {
  std::vector<double> means = block_means(samples, blocks);
  std::sort(means.begin(), means.end());
  const std::size_t k = means.size();
  return k % 2 == 1 ? means[k / 2] : 0.5 * (means[k / 2 - 1] + means[k / 2]);
}

double trimmed_mean(const Eigen::Ref<const Eigen::VectorXd>& samples, double fraction) {
  if (!(fraction >= 0.0 && fraction < 0.5)) {
    throw DomainError("trimmed_mean: fraction must lie in [0, 0.5)");
  }
  if (samples.size() == 0) throw ConfigurationError("trimmed_mean: no samples");
  std::vector<double> sorted(samples.data(), samples.data() + samples.size());
  std::sort(sorted.begin(), sorted.end());
  const auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(sorted.size())));
  double sum = 0.0;
  for (std::size_t i = drop; i < sorted.size() - drop; ++i) sum += sorted[i];
  return sum / static_cast<double>(sorted.size() - 2 * drop);
}

double block_spread(const Eigen::Ref<const Eigen::VectorXd>& samples, Eigen::Index blocks) {
  const std::vector<double> means = block_means(samples, blocks);
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  return *hi - *lo;
}

}  // namespace stablescale
