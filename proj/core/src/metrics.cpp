#include "shillab/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "shillab/errors.hpp"

namespace shillab {

namespace {

// Order-statistic quantile: smallest value with at least ceil(q*n) entries at
// or below it.
double quantile_of(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("quantile_of: empty sample");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  if (idx > 0) --idx;
  if (idx >= n) idx = n - 1;
  return values[idx];
}

struct PcaBasis {
  num::Tensor mean;        // 1 x d
  num::Tensor components;  // m x d, rows orthonormal, descending variance
};

PcaBasis pca_fit(const Eigen::MatrixXd& x, std::size_t n_components) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NumericError("fit_detector: eigendecomposition failed");

  PcaBasis basis;
  basis.mean = num::Tensor(1, d);
  for (std::size_t j = 0; j < d; ++j) basis.mean(0, j) = mean(j);
  basis.components = num::Tensor(n_components, d);
  // Eigenvalues come back ascending; take the top ones and pin each vector's
  // largest-magnitude entry positive so the basis is reproducible.
  for (std::size_t c = 0; c < n_components; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v(at) < 0.0) v = -v;
    for (std::size_t j = 0; j < d; ++j) basis.components(c, j) = v(j);
  }
  return basis;
}

std::vector<double> errors_against(const PcaBasis& basis,
                                   const Eigen::MatrixXd& x) {
  Eigen::MatrixXd mean = basis.mean.map();
  Eigen::MatrixXd comp = basis.components.map();
  Eigen::MatrixXd centered = x.rowwise() - mean.row(0);
  // Residual norm after projecting onto the subspace.
  Eigen::MatrixXd coords = centered * comp.transpose();
  Eigen::MatrixXd residual = centered - coords * comp;
  std::vector<double> errs(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    errs[static_cast<std::size_t>(i)] = residual.row(i).squaredNorm();
  return errs;
}

}  // namespace

double hit_ratio(const std::vector<std::vector<std::size_t>>& recs,
                 std::size_t target, std::size_t k) {
  if (recs.empty()) throw ContractError("hit_ratio: no recommendation lists");
  if (k == 0) throw ContractError("hit_ratio: k must be positive");
  std::size_t hits = 0;
  for (const auto& list : recs) {
    if (list.size() > k)
      throw ContractError("hit_ratio: recommendation list longer than k");
    if (std::find(list.begin(), list.end(), target) != list.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(recs.size());
}

DetectorModel fit_detector(const num::Tensor& features, double quantile,
                           std::size_t n_components) {
  const auto n = features.rows();
  const auto d = features.cols();
  if (n == 0 || d == 0) throw ContractError("fit_detector: empty feature matrix");
  if (n < d)
    throw ContractError("fit_detector: fewer rows than feature dimensions");
  if (n_components == 0 || n_components >= d)
    throw ContractError("fit_detector: n_components must be in [1, d)");
  if (!(quantile > 0.0) || !(quantile < 1.0))
    throw ContractError("fit_detector: quantile must be in (0, 1)");

  Eigen::MatrixXd x = features.map();

  // Pass one: fit on everything, drop rows above the error quantile so gross
  // outliers do not drag the basis toward themselves.
  PcaBasis rough = pca_fit(x, n_components);
  std::vector<double> rough_errs = errors_against(rough, x);
  const double cut = quantile_of(rough_errs, quantile);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (rough_errs[i] <= cut) kept.push_back(i);
  if (kept.size() < n_components + 1)
    throw ContractError("fit_detector: too few rows kept after trimming");

  Eigen::MatrixXd xk(static_cast<Eigen::Index>(kept.size()),
                     static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < kept.size(); ++i)
    xk.row(static_cast<Eigen::Index>(i)) =
        x.row(static_cast<Eigen::Index>(kept[i]));

  // Pass two: refit on the kept rows and set the threshold from their errors.
  PcaBasis fine = pca_fit(xk, n_components);
  std::vector<double> kept_errs = errors_against(fine, xk);

  DetectorModel model;
  model.mean = fine.mean;
  model.components = fine.components;
  model.quantile = quantile;
  model.threshold = quantile_of(kept_errs, quantile);
  return model;
}

std::vector<double> reconstruction_errors(const DetectorModel& model,
                                          const num::Tensor& features) {
  if (features.cols() != model.mean.cols())
    throw ShapeError("reconstruction_errors: feature width mismatch");
  if (features.rows() == 0)
    throw ContractError("reconstruction_errors: empty feature matrix");
  PcaBasis basis{model.mean, model.components};
  return errors_against(basis, features.map());
}

std::vector<std::size_t> detect_outliers(const num::Tensor& features,
                                         double quantile,
                                         std::size_t n_components) {
  DetectorModel model = fit_detector(features, quantile, n_components);
  std::vector<double> errs = reconstruction_errors(model, features);
  std::vector<std::size_t> flagged;
  for (std::size_t i = 0; i < errs.size(); ++i)
    if (errs[i] > model.threshold) flagged.push_back(i);
  return flagged;
}

DetectionMetrics detection_metrics(const std::vector<std::size_t>& flagged,
                                   const std::vector<std::size_t>& fakes) {
  if (fakes.empty())
    throw ContractError("detection_metrics: empty ground-truth fake set");
  std::vector<std::size_t> f = flagged;
  std::vector<std::size_t> g = fakes;
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());

  std::vector<std::size_t> both;
  std::set_intersection(f.begin(), f.end(), g.begin(), g.end(),
                        std::back_inserter(both));

  DetectionMetrics m;
  m.true_positives = both.size();
  m.flagged = f.size();
  m.fakes = g.size();
  m.precision = f.empty() ? 0.0
                          : static_cast<double>(m.true_positives) /
                                static_cast<double>(f.size());
  m.recall = static_cast<double>(m.true_positives) /
             static_cast<double>(g.size());
  return m;
}

}  // namespace shillab
