#pragma once

#include "dorsal/common.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace dorsal {

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = slope * x + intercept. When y is constant the
/// fit is flat and R^2 is reported as 0 with a warning.
RegressionFit linear_regression(std::span<const double> x, std::span<const double> y);

struct AnovaResult {
  double ss_between = 0.0;
  double ss_within = 0.0;
  double ss_total = 0.0;
  double f_statistic = 0.0;
  double eta_squared = 0.0;
  std::size_t groups = 0;
  std::size_t n = 0;
};

/// One-way ANOVA. F is +inf when the within-group sum of squares is zero.
AnovaResult one_way_anova(std::span<const std::vector<double>> groups);

struct PercentileSummary {
  double min = 0.0;
  double p25 = 0.0;
  double median = 0.0;
  double p75 = 0.0;
  double max = 0.0;
};

/// Linear interpolation between order statistics (type 7): rank (n - 1) q.
double percentile(std::span<const double> values, double q);
PercentileSummary percentile_summary(std::span<const double> values);

struct MeanSd {
  double mean = 0.0;
  /// Sample standard deviation (n - 1); 0 for a single value.
  double sd = 0.0;
  std::size_t n = 0;
};
MeanSd mean_sd(std::span<const double> values);

// Force traces and click labelling.

struct ForceTrace {
  std::vector<double> timestamps;
  std::vector<double> readings;

  double trial_max() const;
};

inline constexpr std::string_view kForceTraceHeader = "timestamp_s,reading";

/// CSV with header "timestamp_s,reading".
ForceTrace load_force_trace(const std::filesystem::path& path);
ForceTrace parse_force_trace(std::string_view text);

struct Segment {
  std::size_t start = 0;  // inclusive frame index
  std::size_t end = 0;    // exclusive
  bool click = false;

  std::size_t length() const { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct ClickLabels {
  std::vector<bool> frames;
  /// Ordered, non-overlapping and covering every frame: click segments
  /// alternate with the no-click gaps between them.
  std::vector<Segment> segments;

  std::size_t click_count() const;
};

struct ClickConfig {
  /// Fraction of the trial maximum a reading must exceed.
  double threshold = 0.20;
  std::size_t min_segment_frames = 1;
};

/// Normalizes by the trial maximum; every maximal run of frames above the
/// threshold that contains a peak (a strict local maximum, or the first frame
/// of a plateau) and is long enough is a click.
ClickLabels label_clicks(const ForceTrace& trace, const ClickConfig& cfg = {});

/// One vote per segment; `tie_positive` decides an even split.
std::vector<bool> per_click_majority(const std::vector<bool>& frame_predictions, const ClickLabels& labels,
                                     bool tie_positive = true);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassificationReport {
  double accuracy = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  /// confusion[actual][predicted], class 0 = negative.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::array<ClassMetrics, 2> per_class{};
};

/// Binary report; weighted averages use class support. A class with no
/// predictions has precision 0.
ClassificationReport classification_report(const std::vector<bool>& predicted, const std::vector<bool>& actual);

}  // namespace dorsal
