#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace drm {

// The m+1 raw samples. Population 0 is the base distribution; for data
// read from a long CSV the population index follows first appearance of
// the group label. Immutable once constructed.
class MultiSample {
 public:
  explicit MultiSample(std::vector<Eigen::ArrayXd> samples);

  int num_populations() const { return static_cast<int>(samples_.size()); }
  int m() const { return num_populations() - 1; }
  Eigen::Index total() const { return total_; }
  const Eigen::ArrayXd& sample(int k) const { return samples_[k]; }
  const std::vector<Eigen::ArrayXd>& samples() const { return samples_; }
  Eigen::Index count(int k) const { return samples_[k].size(); }
  Eigen::VectorXd counts() const;

  // Sample fractions rho_k = n_k / N.
  Eigen::ArrayXd fractions() const;

 private:
  std::vector<Eigen::ArrayXd> samples_;
  Eigen::Index total_ = 0;
};

// Empirical distribution of the pooled data: all N observations sorted
// ascending, ties retained, each carrying weight 1/N. `population[i]`
// records which sample point i came from.
struct PooledEmpirical {
  Eigen::ArrayXd points;
  std::vector<int> population;

  Eigen::Index size() const { return points.size(); }

  // N^{-1} sum of values given at the pooled points.
  double integral(const Eigen::ArrayXd& values_at_points) const {
    return values_at_points.sum() / static_cast<double>(points.size());
  }
};

enum class CsvLayout { kLong, kWide };

MultiSample load_csv(const std::string& path, CsvLayout layout);

PooledEmpirical pool(const MultiSample& ms);

}  // namespace drm
