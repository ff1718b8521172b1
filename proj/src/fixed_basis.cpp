#include "drm/fixed_basis.hpp"

#include <cmath>
#include <sstream>

#include "drm/errors.hpp"
#include "drm/stats.hpp"

namespace drm {

FixedBasis FixedBasis::parse(const std::string& spec) {
  FixedBasis basis;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    Term term;
    if (token == "x") {
      term.kind = Term::Kind::kX;
    } else if (token == "x2") {
      term.kind = Term::Kind::kX2;
    } else if (token == "logx") {
      term.kind = Term::Kind::kLogX;
    } else if (token == "log1p_abs") {
      term.kind = Term::Kind::kLog1pAbs;
    } else if (token == "sqrt_abs") {
      term.kind = Term::Kind::kSqrtAbs;
    } else if (token.rfind("normpdf:", 0) == 0) {
      term.kind = Term::Kind::kNormPdf;
      try {
        term.center = std::stod(token.substr(8));
      } catch (const std::exception&) {
        throw UsageError("fixed_basis", "bad normpdf center in '" + token + "'");
      }
    } else {
      throw UsageError("fixed_basis", "unknown basis term '" + token + "'");
    }
    basis.terms_.push_back(term);
  }
  if (basis.terms_.empty()) {
    throw UsageError("fixed_basis", "empty basis specification");
  }
  return basis;
}

FixedBasis FixedBasis::rich() { return parse("sqrt_abs,x,x2,log1p_abs"); }

Eigen::MatrixXd FixedBasis::evaluate(const Eigen::ArrayXd& xs) const {
  Eigen::MatrixXd out(xs.size(), dim());
  for (int j = 0; j < dim(); ++j) {
    const Term& t = terms_[static_cast<std::size_t>(j)];
    switch (t.kind) {
      case Term::Kind::kX:
        out.col(j) = xs.matrix();
        break;
      case Term::Kind::kX2:
        out.col(j) = xs.square().matrix();
        break;
      case Term::Kind::kLogX:
        if ((xs <= 0.0).any()) {
          throw DataError("fixed_basis", "logx requires strictly positive data");
        }
        out.col(j) = xs.log().matrix();
        break;
      case Term::Kind::kLog1pAbs:
        out.col(j) = xs.abs().log1p().matrix();
        break;
      case Term::Kind::kSqrtAbs:
        out.col(j) = xs.abs().sqrt().matrix();
        break;
      case Term::Kind::kNormPdf:
        out.col(j) =
            (kInvSqrt2Pi * (-0.5 * (xs - t.center).square()).exp()).matrix();
        break;
    }
  }
  return out;
}

std::string FixedBasis::describe() const {
  std::string s;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (i) s += ",";
    switch (terms_[i].kind) {
      case Term::Kind::kX: s += "x"; break;
      case Term::Kind::kX2: s += "x2"; break;
      case Term::Kind::kLogX: s += "logx"; break;
      case Term::Kind::kLog1pAbs: s += "log1p_abs"; break;
      case Term::Kind::kSqrtAbs: s += "sqrt_abs"; break;
      case Term::Kind::kNormPdf:
        s += "normpdf:" + std::to_string(terms_[i].center);
        break;
    }
  }
  return s;
}

}  // namespace drm
