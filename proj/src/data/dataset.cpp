#include "demux/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "demux/errors.hpp"

namespace demux::data {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream is(line);
    std::string f;
    while (is >> f) out.push_back(f);
    return out;
  }
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Test: return "test";
    case SplitTag::Unspecified: break;
  }
  return "unspecified";
}

void Dataset::validate() const {
  if (series.empty()) throw DataError(DataError::Kind::Invalid, "dataset '" + name + "' is empty");
  if (labels.size() != series.size()) throw DataError(DataError::Kind::Invalid, "label count differs from instance count");
  const std::size_t t = length();
  if (t == 0) throw DataError(DataError::Kind::Invalid, "series have zero length");
  std::vector<bool> seen(num_classes(), false);
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].size() != t) {
      throw DataError(DataError::Kind::RaggedRows, "instance " + std::to_string(i) + " has length " +
                                                       std::to_string(series[i].size()) + ", expected " +
                                                       std::to_string(t));
    }
    for (double v : series[i]) {
      if (!std::isfinite(v)) throw DataError(DataError::Kind::NonNumeric, "instance " + std::to_string(i) + " has a non-finite value");
    }
    if (labels[i] >= num_classes()) {
      throw DataError(DataError::Kind::InvalidLabels, "instance " + std::to_string(i) + " has label " +
                                                          std::to_string(labels[i]) + " outside 0.." +
                                                          std::to_string(num_classes() - 1));
    }
    seen[labels[i]] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw DataError(DataError::Kind::InvalidLabels, "labels do not cover a contiguous 0-based range");
  }
  if (ground_truth) {
    if (ground_truth->class_masks.size() != num_classes() || ground_truth->shared_mask.size() != t) {
      throw DataError(DataError::Kind::Invalid, "ground truth does not match dataset dimensions");
    }
    for (const auto& m : ground_truth->class_masks) {
      if (m.size() != t) throw DataError(DataError::Kind::Invalid, "ground truth mask length mismatch");
    }
  }
}

std::vector<std::size_t> Dataset::indices_of(std::size_t label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.push_back(i);
  }
  return out;
}

Dataset load_ucr(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::Io, "cannot open dataset file " + path.string());

  std::vector<std::string> raw_labels;
  std::vector<std::vector<double>> rows;
  std::optional<char> delim;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::size_t width_line = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string content = trim(line);
    if (content.empty()) continue;
    if (!delim) {
      delim = content.find('\t') != std::string::npos ? '\t' : content.find(',') != std::string::npos ? ',' : ' ';
    }
    const auto fields = split_fields(content, *delim);
    if (fields.size() < 2) {
      throw DataError(DataError::Kind::RaggedRows, path.string() + ":" + std::to_string(line_no) +
                                                       ": expected a label followed by at least one value");
    }
    const std::size_t t = fields.size() - 1;
    if (rows.empty()) {
      width = t;
      width_line = line_no;
    } else if (t != width) {
      throw DataError(DataError::Kind::RaggedRows,
                      path.string() + ":" + std::to_string(line_no) + ": row has " + std::to_string(t) +
                          " values but line " + std::to_string(width_line) + " has " + std::to_string(width));
    }
    std::vector<double> row(t);
    for (std::size_t j = 0; j < t; ++j) {
      const auto v = parse_number(fields[j + 1]);
      if (!v) {
        throw DataError(DataError::Kind::NonNumeric, path.string() + ":" + std::to_string(line_no) + ": field " +
                                                         std::to_string(j + 2) + " '" + fields[j + 1] +
                                                         "' is not a finite number");
      }
      row[j] = *v;
    }
    if (fields[0].empty()) {
      throw DataError(DataError::Kind::NonNumeric, path.string() + ":" + std::to_string(line_no) + ": empty label");
    }
    raw_labels.push_back(fields[0]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(DataError::Kind::EmptyFile, path.string() + ": no instances");

  // Numeric labels are ordered by value ("1" and "1.0" are the same class);
  // anything else falls back to string order.
  bool numeric = true;
  for (const auto& l : raw_labels) numeric = numeric && parse_number(l).has_value();

  Dataset ds;
  ds.name = path.stem().string();
  ds.series = std::move(rows);
  ds.labels.resize(raw_labels.size());
  if (numeric) {
    std::map<double, std::string> names;
    for (const auto& l : raw_labels) names.emplace(*parse_number(l), l);
    std::map<double, std::size_t> index;
    for (const auto& [value, name] : names) {
      index.emplace(value, ds.label_names.size());
      ds.label_names.push_back(name);
    }
    for (std::size_t i = 0; i < raw_labels.size(); ++i) ds.labels[i] = index.at(*parse_number(raw_labels[i]));
  } else {
    std::map<std::string, std::size_t> index;
    for (const auto& l : raw_labels) index.emplace(l, 0);
    for (auto& [name, k] : index) {
      k = ds.label_names.size();
      ds.label_names.push_back(name);
    }
    for (std::size_t i = 0; i < raw_labels.size(); ++i) ds.labels[i] = index.at(raw_labels[i]);
  }
  const auto stem = ds.name;
  if (stem.size() > 6 && stem.ends_with("_TRAIN")) ds.split = SplitTag::Train;
  if (stem.size() > 5 && stem.ends_with("_TEST")) ds.split = SplitTag::Test;
  return ds;
}

void write_ucr(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(DataError::Kind::Io, "cannot write " + path.string());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.label_names.at(ds.labels[i]);
    for (double v : ds.series[i]) out << '\t' << format_double(v);
    out << '\n';
  }
  if (!out) throw DataError(DataError::Kind::Io, "write failed for " + path.string());
}

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(DataError::Kind::Io, "cannot write " + path.string());
  auto put = [&](const std::vector<bool>& mask) {
    for (std::size_t t = 0; t < mask.size(); ++t) out << (t ? "," : "") << (mask[t] ? '1' : '0');
    out << '\n';
  };
  for (const auto& m : gt.class_masks) put(m);
  put(gt.shared_mask);
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::Io, "cannot open ground-truth file " + path.string());
  std::vector<std::vector<bool>> masks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    std::vector<bool> mask;
    for (const auto& f : split_fields(content, ',')) {
      if (f != "0" && f != "1") {
        throw DataError(DataError::Kind::NonNumeric,
                        path.string() + ":" + std::to_string(line_no) + ": expected 0/1 flag, got '" + f + "'");
      }
      mask.push_back(f == "1");
    }
    if (!masks.empty() && mask.size() != masks.front().size()) {
      throw DataError(DataError::Kind::RaggedRows, path.string() + ":" + std::to_string(line_no) + ": ragged mask");
    }
    masks.push_back(std::move(mask));
  }
  if (masks.size() < 2) throw DataError(DataError::Kind::EmptyFile, path.string() + ": needs class lines and a shared line");
  GroundTruth gt;
  gt.shared_mask = std::move(masks.back());
  masks.pop_back();
  gt.class_masks = std::move(masks);
  return gt;
}

NormalizedSeries znormalize_series(std::span<const double> x) {
  NormalizedSeries out;
  out.values.assign(x.size(), 0.0);
  if (x.empty()) return out;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double sd = std::sqrt(var);
  if (sd <= 1e-12 * std::max(1.0, std::fabs(mean))) {
    out.constant = true;
    return out;
  }
  for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = (x[i] - mean) / sd;
  return out;
}

Dataset znormalize(const Dataset& ds, std::vector<std::size_t>* constant_rows) {
  Dataset out = ds;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto n = znormalize_series(ds.series[i]);
    if (n.constant && constant_rows) constant_rows->push_back(i);
    out.series[i] = std::move(n.values);
  }
  return out;
}

PlantedLayout planted_layout(std::size_t classes, std::size_t length) {
  if (classes < 2) throw DataError(DataError::Kind::Invalid, "planted dataset needs at least 2 classes");
  if (length < 4 * classes) {
    throw DataError(DataError::Kind::Invalid, "planted dataset needs length >= 4 * classes (" +
                                                  std::to_string(4 * classes) + "), got " + std::to_string(length));
  }
  PlantedLayout layout;
  const std::size_t slots = classes + 1;
  layout.width = (length + 2 * slots - 1) / (2 * slots);
  const std::size_t segment = length / slots;
  if (segment < layout.width) throw DataError(DataError::Kind::Invalid, "planted windows do not fit");
  // The shared window takes the middle slot; classes fill the rest in order.
  const std::size_t shared_slot = slots / 2;
  for (std::size_t s = 0; s < slots; ++s) {
    const std::size_t start = s * segment + (segment - layout.width) / 2;
    const Window w{start, start + layout.width};
    if (s == shared_slot) layout.shared_window = w;
    else layout.class_windows.push_back(w);
  }
  return layout;
}

Dataset make_planted_dataset(std::size_t classes, std::size_t length, std::size_t per_class, std::uint64_t seed) {
  const auto layout = planted_layout(classes, length);
  if (per_class == 0) throw DataError(DataError::Kind::Invalid, "planted dataset needs at least one instance per class");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);

  Dataset ds;
  ds.name = "planted_C" + std::to_string(classes) + "_T" + std::to_string(length);
  for (std::size_t c = 0; c < classes; ++c) ds.label_names.push_back(std::to_string(c));

  GroundTruth gt;
  gt.shared_mask.assign(length, false);
  for (std::size_t t = layout.shared_window.begin; t < layout.shared_window.end; ++t) gt.shared_mask[t] = true;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<bool> mask(length, false);
    for (std::size_t t = layout.class_windows[c].begin; t < layout.class_windows[c].end; ++t) mask[t] = true;
    gt.class_masks.push_back(std::move(mask));
  }

  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t n = 0; n < per_class; ++n) {
      std::vector<double> x(length);
      for (auto& v : x) v = noise(rng);
      for (std::size_t t = 0; t < length; ++t) {
        if (gt.class_masks[c][t] || gt.shared_mask[t]) x[t] += 1.0;
      }
      ds.series.push_back(std::move(x));
      ds.labels.push_back(c);
    }
  }
  ds.ground_truth = std::move(gt);
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DataError(DataError::Kind::Invalid, "split fraction must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> first_idx;
  std::vector<std::size_t> second_idx;
  for (std::size_t c = 0; c < ds.num_classes(); ++c) {
    auto idx = ds.indices_of(c);
    if (idx.size() < 2) {
      throw DataError(DataError::Kind::Invalid, "class " + ds.label_names[c] + " has fewer than 2 instances");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<double>(idx.size());
    auto take = static_cast<std::size_t>(std::llround(fraction * n));
    take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    first_idx.insert(first_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    second_idx.insert(second_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(first_idx.begin(), first_idx.end());
  std::sort(second_idx.begin(), second_idx.end());

  auto subset = [&](const std::vector<std::size_t>& idx, SplitTag tag, const char* suffix) {
    Dataset out;
    out.name = ds.name + suffix;
    out.split = tag;
    out.label_names = ds.label_names;
    out.ground_truth = ds.ground_truth;
    for (auto i : idx) {
      out.series.push_back(ds.series[i]);
      out.labels.push_back(ds.labels[i]);
    }
    return out;
  };
  return {subset(first_idx, SplitTag::Train, "_TRAIN"), subset(second_idx, SplitTag::Test, "_TEST")};
}

}  // namespace demux::data
