#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demux/classifier.hpp"
#include "demux/saliency.hpp"

namespace demux::eval {

/// Confidence of the explained class as time steps are deleted or inserted.
struct Curve {
  std::vector<double> fractions;
  std::vector<double> confidences;

  double area() const;
};

/// Trapezoidal area under y(x).
double trapezoid(std::span<const double> x, std::span<const double> y);

/// Step indices by descending saliency, ties by ascending index.
std::vector<std::size_t> saliency_order(std::span<const double> saliency);

/// Starting from x, replaces the most salient steps by `reference` one at a
/// time. T + 1 points.
Curve deletion_curve(const models::Classifier& f, std::span<const double> x, std::span<const double> saliency,
                     std::span<const double> reference, std::size_t target);
/// Starting from `reference`, restores x's values in the same order.
Curve insertion_curve(const models::Classifier& f, std::span<const double> x, std::span<const double> saliency,
                      std::span<const double> reference, std::size_t target);

inline double auc_difference(double audc, double auic) { return auic - audc; }

struct IouResult {
  std::vector<double> thresholds;
  /// Mean IC/UC over the non-target classes at each threshold.
  std::vector<double> values;
  double area = 0.0;
};

/// Overlap between the target row's support (|theta| > tau) and every other
/// row's, for tau = 0, 0.1, ..., 1. Needs at least two classes.
IouResult iou_metric(std::span<const double> theta, std::size_t classes, std::size_t target);
IouResult iou_metric(const explain::SaliencyMap& map);

/// Population standard deviation.
double population_std(std::span<const double> values);

/// Spread of the AUC-difference across several maps of the same instance.
double consistency_std(std::span<const explain::SaliencyMap> runs, const models::Classifier& f,
                       std::span<const double> x, std::span<const double> reference);

struct EvalReport {
  std::string method;
  std::string dataset;
  std::size_t instance = 0;
  std::size_t target = 0;
  std::uint64_t seed = 0;
  double audc = 0.0;
  double auic = 0.0;
  double auc_difference = 0.0;
  double iou_area = 0.0;
  std::vector<double> iou_thresholds;
  std::vector<double> iou_values;
  std::optional<double> consistency_std;
};

/// Curves against `reference` for the map's target row plus IoU over all rows.
EvalReport evaluate(const models::Classifier& f, std::span<const double> x, const explain::SaliencyMap& map,
                    std::span<const double> reference);

/// One `key=value` per line; arrays as comma-separated lists.
std::string to_key_value(const EvalReport& r);
EvalReport report_from_key_value(const std::string& text);
std::string to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);

struct AggregateRow {
  std::string method;
  std::string dataset;
  std::size_t count = 0;
  double auc_difference_mean = 0.0;
  double auc_difference_std = 0.0;
  double iou_area_mean = 0.0;
};

/// Groups by (method, dataset) in first-seen order; std is the population std.
std::vector<AggregateRow> aggregate(std::span<const EvalReport> reports);
/// Header `method,dataset,auc_difference_mean,auc_difference_std,iou_area_mean`.
std::string aggregate_table(std::span<const AggregateRow> rows);

}  // namespace demux::eval
