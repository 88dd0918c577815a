#include "dorsal/stats.hpp"

#include "dorsal/report_io.hpp"
#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

namespace dorsal {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

RegressionFit linear_regression(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("regression inputs differ in length");
  if (x.size() < 2) throw Error("regression needs at least 2 points");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw Error("regression x values are constant");

  RegressionFit fit;
  fit.n = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0.0) {
    warn("regression y values are constant; R^2 reported as 0");
    fit.r_squared = 0.0;
    return fit;
  }
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += r * r;
  }
  fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return fit;
}

AnovaResult one_way_anova(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw Error("ANOVA needs at least 2 groups");
  AnovaResult res;
  res.groups = groups.size();
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) throw Error("ANOVA group is empty");
    res.n += g.size();
    grand += std::accumulate(g.begin(), g.end(), 0.0);
  }
  if (res.n <= res.groups) throw Error("ANOVA within-group degrees of freedom are zero");
  grand /= static_cast<double>(res.n);

  for (const auto& g : groups) {
    const double m = mean_of(g);
    res.ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) {
      res.ss_within += (v - m) * (v - m);
      res.ss_total += (v - grand) * (v - grand);
    }
  }
  const double df_b = static_cast<double>(res.groups - 1);
  const double df_w = static_cast<double>(res.n - res.groups);
  if (res.ss_between == 0.0) {
    res.f_statistic = 0.0;
  } else if (res.ss_within == 0.0) {
    res.f_statistic = std::numeric_limits<double>::infinity();
  } else {
    res.f_statistic = (res.ss_between / df_b) / (res.ss_within / df_w);
  }
  res.eta_squared = res.ss_total > 0.0 ? std::clamp(res.ss_between / res.ss_total, 0.0, 1.0) : 0.0;
  return res;
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw Error("percentile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

PercentileSummary percentile_summary(std::span<const double> values) {
  if (values.empty()) throw Error("percentile summary of an empty sample");
  return {percentile(values, 0.0), percentile(values, 0.25), percentile(values, 0.5), percentile(values, 0.75),
          percentile(values, 1.0)};
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  out.n = values.size();
  if (values.empty()) return out;
  out.mean = mean_of(values);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

double ForceTrace::trial_max() const {
  if (readings.empty()) return 0.0;
  return *std::max_element(readings.begin(), readings.end());
}

ForceTrace parse_force_trace(std::string_view text) {
  ForceTrace trace;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kForceTraceHeader) throw ParseError("force trace header must be '" + std::string(kForceTraceHeader) + "'");
      header = true;
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw ParseError("force trace line " + std::to_string(lineno) + " needs 2 columns");
    try {
      trace.timestamps.push_back(std::stod(cells[0]));
      trace.readings.push_back(std::stod(cells[1]));
    } catch (const std::exception&) {
      throw ParseError("force trace line " + std::to_string(lineno) + " is not numeric");
    }
  }
  if (!header) throw ParseError("force trace is missing its header");
  return trace;
}

ForceTrace load_force_trace(const std::filesystem::path& path) {
  return parse_force_trace(detail::read_text_file(path));
}

std::size_t ClickLabels::click_count() const {
  return static_cast<std::size_t>(std::count_if(segments.begin(), segments.end(), [](const Segment& s) { return s.click; }));
}

ClickLabels label_clicks(const ForceTrace& trace, const ClickConfig& cfg) {
  const std::size_t n = trace.readings.size();
  ClickLabels out;
  out.frames.assign(n, false);
  if (n == 0) return out;

  const double peak = trace.trial_max();
  if (!(peak > 0.0)) {
    warn("force trace has no positive reading; no clicks labelled");
    out.segments.push_back({0, n, false});
    return out;
  }

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = trace.readings[i] / peak;
  const double lowest = -std::numeric_limits<double>::infinity();
  auto at = [&](std::size_t i, std::ptrdiff_t d) {
    const auto j = static_cast<std::ptrdiff_t>(i) + d;
    return (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) ? lowest : x[static_cast<std::size_t>(j)];
  };
  // A strict local maximum, or the first frame of a plateau that is left by
  // a descent.
  auto is_peak = [&](std::size_t i) {
    if (!(x[i] > at(i, -1))) return false;
    std::size_t j = i;
    while (j + 1 < n && x[j + 1] == x[i]) ++j;
    return x[i] > at(j, 1);
  };

  std::size_t i = 0;
  while (i < n) {
    if (!(x[i] > cfg.threshold)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool has_peak = false;
    while (j < n && x[j] > cfg.threshold) {
      has_peak = has_peak || is_peak(j);
      ++j;
    }
    if (has_peak && j - i >= cfg.min_segment_frames) {
      for (std::size_t k = i; k < j; ++k) out.frames[k] = true;
    }
    i = j;
  }

  std::size_t start = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    if (k == n || out.frames[k] != out.frames[start]) {
      out.segments.push_back({start, k, out.frames[start]});
      start = k;
    }
  }
  return out;
}

std::vector<bool> per_click_majority(const std::vector<bool>& preds, const ClickLabels& labels, bool tie_positive) {
  if (labels.segments.empty()) throw Error("no segments to vote over");
  if (preds.size() != labels.frames.size()) throw DimensionError("frame predictions and labels differ in length");
  std::vector<bool> out;
  out.reserve(labels.segments.size());
  for (const auto& s : labels.segments) {
    if (s.end > preds.size() || s.start >= s.end) throw DimensionError("segment outside the prediction range");
    std::size_t pos = 0;
    for (std::size_t k = s.start; k < s.end; ++k) pos += preds[k] ? 1 : 0;
    const std::size_t len = s.length();
    out.push_back(2 * pos > len || (2 * pos == len && tie_positive));
  }
  return out;
}

ClassificationReport classification_report(const std::vector<bool>& predicted, const std::vector<bool>& actual) {
  if (predicted.size() != actual.size()) throw DimensionError("predictions and labels differ in length");
  if (predicted.empty()) throw Error("classification report of an empty sample");
  ClassificationReport rep;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    ++rep.confusion[actual[i] ? 1 : 0][predicted[i] ? 1 : 0];
  }
  const auto n = static_cast<double>(predicted.size());
  rep.accuracy = static_cast<double>(rep.confusion[0][0] + rep.confusion[1][1]) / n;
  for (std::size_t c = 0; c < 2; ++c) {
    ClassMetrics& m = rep.per_class[c];
    const std::size_t tp = rep.confusion[c][c];
    const std::size_t predicted_c = rep.confusion[0][c] + rep.confusion[1][c];
    m.support = rep.confusion[c][0] + rep.confusion[c][1];
    m.precision = predicted_c ? static_cast<double>(tp) / static_cast<double>(predicted_c) : 0.0;
    m.recall = m.support ? static_cast<double>(tp) / static_cast<double>(m.support) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    const double w = static_cast<double>(m.support) / n;
    rep.weighted_precision += w * m.precision;
    rep.weighted_recall += w * m.recall;
    rep.weighted_f1 += w * m.f1;
  }
  return rep;
}

}  // namespace dorsal
