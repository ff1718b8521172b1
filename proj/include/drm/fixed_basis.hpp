#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace drm {

// Fixed basis functions assembled from a comma-separated term list:
//   x, x2, logx, log1p_abs, sqrt_abs, normpdf:<c>
// "rich" expands to (sqrt_abs, x, x2, log1p_abs).
class FixedBasis {
 public:
  struct Term {
    enum class Kind { kX, kX2, kLogX, kLog1pAbs, kSqrtAbs, kNormPdf };
    Kind kind = Kind::kX;
    double center = 0.0;
  };

  static FixedBasis parse(const std::string& spec);
  static FixedBasis rich();

  int dim() const { return static_cast<int>(terms_.size()); }
  Eigen::MatrixXd evaluate(const Eigen::ArrayXd& xs) const;
  std::string describe() const;

 private:
  std::vector<Term> terms_;
};

}  // namespace drm
