#include "demux/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "demux/errors.hpp"

namespace demux::eval {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt(v[i]);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw DataError(DataError::Kind::NonNumeric, "report field " + key + ": '" + s + "'");
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(parse_double(key, cell));
  return out;
}

Curve sweep(const models::Classifier& f, std::span<const double> start, std::span<const double> fill,
            std::span<const double> saliency, std::size_t target) {
  const std::size_t t_len = start.size();
  if (fill.size() != t_len || saliency.size() != t_len) throw ShapeError("curve: series, saliency and reference lengths differ");
  if (target >= f.num_classes()) throw DomainError("curve: target class out of range");
  const auto order = saliency_order(saliency);
  std::vector<std::vector<double>> steps;
  steps.reserve(t_len + 1);
  std::vector<double> cur(start.begin(), start.end());
  steps.push_back(cur);
  for (std::size_t j = 0; j < t_len; ++j) {
    cur[order[j]] = fill[order[j]];
    steps.push_back(cur);
  }
  const auto probs = f.predict_batch(steps);
  Curve c;
  for (std::size_t j = 0; j <= t_len; ++j) {
    c.fractions.push_back(static_cast<double>(j) / static_cast<double>(t_len));
    c.confidences.push_back(probs[j][target]);
  }
  return c;
}

}  // namespace

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("trapezoid: x and y differ in length");
  double a = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) a += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return a;
}

double Curve::area() const { return trapezoid(fractions, confidences); }

std::vector<std::size_t> saliency_order(std::span<const double> saliency) {
  std::vector<std::size_t> idx(saliency.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return saliency[a] > saliency[b]; });
  return idx;
}

Curve deletion_curve(const models::Classifier& f, std::span<const double> x, std::span<const double> saliency,
                     std::span<const double> reference, std::size_t target) {
  return sweep(f, x, reference, saliency, target);
}

Curve insertion_curve(const models::Classifier& f, std::span<const double> x, std::span<const double> saliency,
                      std::span<const double> reference, std::size_t target) {
  return sweep(f, reference, x, saliency, target);
}

IouResult iou_metric(std::span<const double> theta, std::size_t classes, std::size_t target) {
  if (classes < 2) throw DomainError("IoU needs at least two classes");
  if (theta.size() % classes != 0) throw ShapeError("IoU: theta size is not a multiple of the class count");
  if (target >= classes) throw DomainError("IoU: target class out of range");
  const std::size_t t_len = theta.size() / classes;
  IouResult r;
  for (int k = 0; k <= 10; ++k) {
    const double tau = k / 10.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < classes; ++i) {
      if (i == target) continue;
      std::size_t inter = 0, uni = 0;
      for (std::size_t t = 0; t < t_len; ++t) {
        const bool a = std::fabs(theta[target * t_len + t]) > tau;
        const bool b = std::fabs(theta[i * t_len + t]) > tau;
        inter += a && b;
        uni += a || b;
      }
      acc += uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
    }
    r.thresholds.push_back(tau);
    r.values.push_back(acc / static_cast<double>(classes - 1));
  }
  r.area = trapezoid(r.thresholds, r.values);
  return r;
}

IouResult iou_metric(const explain::SaliencyMap& map) { return iou_metric(map.values, map.num_classes, map.target); }

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

double consistency_std(std::span<const explain::SaliencyMap> runs, const models::Classifier& f,
                       std::span<const double> x, std::span<const double> reference) {
  std::vector<double> diffs;
  for (const auto& m : runs) {
    const auto row = m.row(m.target);
    diffs.push_back(auc_difference(deletion_curve(f, x, row, reference, m.target).area(),
                                   insertion_curve(f, x, row, reference, m.target).area()));
  }
  return population_std(diffs);
}

EvalReport evaluate(const models::Classifier& f, std::span<const double> x, const explain::SaliencyMap& map,
                    std::span<const double> reference) {
  if (map.length != x.size() || map.num_classes != f.num_classes()) throw ShapeError("saliency map does not fit the model");
  EvalReport r;
  r.target = map.target;
  r.seed = map.seed;
  const auto row = map.row(map.target);
  r.audc = deletion_curve(f, x, row, reference, map.target).area();
  r.auic = insertion_curve(f, x, row, reference, map.target).area();
  r.auc_difference = auc_difference(r.audc, r.auic);
  const auto iou = iou_metric(map);
  r.iou_area = iou.area;
  r.iou_thresholds = iou.thresholds;
  r.iou_values = iou.values;
  return r;
}

std::string to_key_value(const EvalReport& r) {
  std::ostringstream os;
  os << "method=" << r.method << "\n"
     << "dataset=" << r.dataset << "\n"
     << "instance=" << r.instance << "\n"
     << "target=" << r.target << "\n"
     << "seed=" << r.seed << "\n"
     << "audc=" << fmt(r.audc) << "\n"
     << "auic=" << fmt(r.auic) << "\n"
     << "auc_difference=" << fmt(r.auc_difference) << "\n"
     << "iou_area=" << fmt(r.iou_area) << "\n"
     << "iou_thresholds=" << join(r.iou_thresholds) << "\n"
     << "iou_values=" << join(r.iou_values) << "\n";
  if (r.consistency_std) os << "consistency_std=" << fmt(*r.consistency_std) << "\n";
  return os.str();
}

EvalReport report_from_key_value(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(DataError::Kind::Invalid, "report line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw DataError(DataError::Kind::Invalid, "report is missing " + k);
    return it->second;
  };
  EvalReport r;
  r.method = need("method");
  r.dataset = need("dataset");
  r.instance = static_cast<std::size_t>(parse_double("instance", need("instance")));
  r.target = static_cast<std::size_t>(parse_double("target", need("target")));
  r.seed = std::stoull(need("seed"));
  r.audc = parse_double("audc", need("audc"));
  r.auic = parse_double("auic", need("auic"));
  r.auc_difference = parse_double("auc_difference", need("auc_difference"));
  r.iou_area = parse_double("iou_area", need("iou_area"));
  r.iou_thresholds = parse_list("iou_thresholds", need("iou_thresholds"));
  r.iou_values = parse_list("iou_values", need("iou_values"));
  if (kv.count("consistency_std")) r.consistency_std = parse_double("consistency_std", kv["consistency_std"]);
  return r;
}

std::string to_json(const EvalReport& r) {
  nlohmann::json j{{"method", r.method},
                   {"dataset", r.dataset},
                   {"instance", r.instance},
                   {"target", r.target},
                   {"seed", r.seed},
                   {"audc", r.audc},
                   {"auic", r.auic},
                   {"auc_difference", r.auc_difference},
                   {"iou_area", r.iou_area},
                   {"iou_thresholds", r.iou_thresholds},
                   {"iou_values", r.iou_values}};
  if (r.consistency_std) j["consistency_std"] = *r.consistency_std;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.instance = j.at("instance").get<std::size_t>();
    r.target = j.at("target").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.audc = j.at("audc").get<double>();
    r.auic = j.at("auic").get<double>();
    r.auc_difference = j.at("auc_difference").get<double>();
    r.iou_area = j.at("iou_area").get<double>();
    r.iou_thresholds = j.at("iou_thresholds").get<std::vector<double>>();
    r.iou_values = j.at("iou_values").get<std::vector<double>>();
    if (j.contains("consistency_std")) r.consistency_std = j["consistency_std"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Kind::Invalid, std::string("bad report JSON: ") + e.what());
  }
  return r;
}

std::vector<AggregateRow> aggregate(std::span<const EvalReport> reports) {
  std::vector<AggregateRow> rows;
  std::vector<std::vector<double>> aucs, ious;
  for (const auto& r : reports) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const AggregateRow& a) { return a.method == r.method && a.dataset == r.dataset; });
    std::size_t k = static_cast<std::size_t>(it - rows.begin());
    if (it == rows.end()) {
      rows.push_back({r.method, r.dataset});
      aucs.emplace_back();
      ious.emplace_back();
    }
    aucs[k].push_back(r.auc_difference);
    ious[k].push_back(r.iou_area);
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double n = static_cast<double>(aucs[k].size());
    rows[k].count = aucs[k].size();
    rows[k].auc_difference_mean = std::accumulate(aucs[k].begin(), aucs[k].end(), 0.0) / n;
    rows[k].auc_difference_std = population_std(aucs[k]);
    rows[k].iou_area_mean = std::accumulate(ious[k].begin(), ious[k].end(), 0.0) / n;
  }
  return rows;
}

std::string aggregate_table(std::span<const AggregateRow> rows) {
  std::string out = "method,dataset,auc_difference_mean,auc_difference_std,iou_area_mean\n";
  for (const auto& r : rows) {
    out += r.method + "," + r.dataset + "," + fmt(r.auc_difference_mean) + "," + fmt(r.auc_difference_std) + "," +
           fmt(r.iou_area_mean) + "\n";
  }
  return out;
}

}  // namespace demux::eval
