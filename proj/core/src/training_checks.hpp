#pragma once

#include <string>

#include "smartedge/error.hpp"
#include "smartedge/matrix.hpp"

namespace smartedge::detail {

inline void check_training_input(const FeatureMatrix& x, const Labels& y) {
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(x.rows()) + " rows but " +
                                                  std::to_string(y.size()) + " labels");
  }
  if (x.cols() == 0) throw Error(ErrorCode::DimensionMismatch, "no feature columns");
  if (y.size() < 2) throw Error(ErrorCode::SingleClassTraining, "need at least two rows");
  bool zero = false, one = false;
  for (auto v : y) {
    if (v != 0 && v != 1) throw Error(ErrorCode::DimensionMismatch, "labels must be 0 or 1");
    (v == 1 ? one : zero) = true;
  }
  if (!zero || !one) throw Error(ErrorCode::SingleClassTraining, "both classes must be present");
}

}  // namespace smartedge::detail
