#pragma once

#include <cstddef>
#include <vector>

#include "shillab/tensor.hpp"

namespace shillab {

// Fraction of recommendation lists that contain `target`.  Each inner vector is
// one user's top-k list; callers pass genuine users only, so the denominator is
// recs.size().  A list longer than k is a contract violation.
double hit_ratio(const std::vector<std::vector<std::size_t>>& recs,
                 std::size_t target, std::size_t k);

// Principal-component outlier detector over user feature rows.  Fitting is a
// two-pass trim: fit on everything, drop rows whose reconstruction error lands
// above the quantile, refit on the kept rows.  components rows are orthonormal.
struct DetectorModel {
  num::Tensor mean;        // 1 x d
  num::Tensor components;  // n_components x d
  double threshold = 0.0;  // error quantile of the kept rows
  double quantile = 0.95;
};

DetectorModel fit_detector(const num::Tensor& features, double quantile,
                           std::size_t n_components = 3);

// Squared reconstruction error of each row against the detector subspace.
std::vector<double> reconstruction_errors(const DetectorModel& model,
                                          const num::Tensor& features);

// Row indices whose reconstruction error exceeds the fitted threshold.
std::vector<std::size_t> detect_outliers(const num::Tensor& features,
                                         double quantile,
                                         std::size_t n_components = 3);

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t true_positives = 0;
  std::size_t flagged = 0;
  std::size_t fakes = 0;
};

// Precision/recall of `flagged` against the ground-truth `fakes` index set.
DetectionMetrics detection_metrics(const std::vector<std::size_t>& flagged,
                                   const std::vector<std::size_t>& fakes);

}  // namespace shillab
