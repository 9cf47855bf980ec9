#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fdrboot/errors.hpp"
#include "fdrboot/matrix.hpp"

namespace fdrboot {

// Studentized alpha statistics, one per hypothesis, plus the degrees of
// freedom of their marginal t law.
struct AlphaEstimates {
  std::vector<double> values;
  double df = 0.0;

  std::size_t size() const { return values.size(); }

  void validate() const {
    if (values.empty()) throw ValidationError("alpha estimates: empty vector");
    if (!(df >= 1.0)) throw ValidationError("alpha estimates: df must be >= 1");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[i]))
        throw ValidationError("alpha estimates: non-finite value at index " +
                              std::to_string(i + 1));
  }
};

// Joint draws from the correlated null distribution. Row b is one draw
// u^(b) across all hypotheses; columns keep the cross-sectional
// correlation, rows are exchangeable.
struct NullSampleSet {
  Matrix draws;  // B x N
  double df = 0.0;

  std::size_t draw_count() const { return draws.rows(); }
  std::size_t hypothesis_count() const { return draws.cols(); }

  void validate() const {
    if (draws.rows() == 0 || draws.cols() == 0)
      throw ValidationError("null sample set: empty draw matrix");
    if (!(df >= 1.0)) throw ValidationError("null sample set: df must be >= 1");
    if (!draws.all_finite()) throw ValidationError("null sample set: non-finite entry");
  }
};

}  // namespace fdrboot
