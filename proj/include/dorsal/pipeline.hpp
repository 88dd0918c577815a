#pragma once

#include "dorsal/camera.hpp"
#include "dorsal/hand_model.hpp"
#include "dorsal/metrics.hpp"
#include "dorsal/occlusion.hpp"
#include "dorsal/pose_fitting.hpp"
#include "dorsal/stats.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dorsal {

inline constexpr std::string_view kManifestSchema = "dorsal.manifest/1";
inline constexpr std::string_view kAnnotationSchema = "dorsal.annotations/1";
inline constexpr std::string_view kPredictionSchema = "dorsal.predictions/1";
inline constexpr std::string_view kRunSummarySchema = "dorsal.run_summary/1";
inline constexpr std::string_view kBuiltinTemplate = "builtin:synthetic";

struct FrameAnnotation {
  std::string frame_id;
  std::string subject_id;
  std::string gesture;
  /// Monk scale level 1..10.
  std::optional<int> skin_tone;
  std::optional<KeypointTargets> keypoints3d;
  std::optional<MarkerTargets> markers3d;
  std::optional<HandState> gt_state;
};

/// Throws InvariantError when the frame carries no pose source or an invalid
/// skin tone.
void validate(const FrameAnnotation& frame);

struct PipelineConfig {
  OcclusionConfig occlusion;
  FitConfig fit;
  /// Frames whose scaled mean finger visibility is at or below this value
  /// form the low-visibility subset.
  double low_visibility_cutoff = 0.5;
  AngularError angular_error = AngularError::Geodesic;
  /// Worker threads. Results do not depend on this value.
  int workers = 1;
};

void validate(const PipelineConfig& cfg);

struct RunManifest {
  /// Directory relative paths are resolved against.
  std::filesystem::path base_dir;
  /// A template file, or "builtin:synthetic".
  std::string template_ref = std::string(kBuiltinTemplate);
  std::filesystem::path calibration;
  std::vector<std::filesystem::path> annotations;
  std::optional<std::filesystem::path> predictions;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  PipelineConfig config;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

RunManifest load_manifest(const std::filesystem::path& path);
RunManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);
/// Paths are written as given (relative paths stay relative).
std::string serialize_manifest(const RunManifest& manifest);

/// Throws when a referenced file does not exist.
void check_inputs_exist(const RunManifest& manifest);

RiggedHandTemplate load_template_ref(const RunManifest& manifest);

struct IngestResult {
  std::vector<FrameAnnotation> frames;
  std::size_t malformed = 0;
  /// One message per skipped line, "<source>:<line>: <reason>".
  std::vector<std::string> problems;
};

/// JSONL: the first non-blank line is {"schema": "dorsal.annotations/1"},
/// then one frame per line. Malformed or duplicate frames are skipped and
/// counted; an empty document yields zero frames and a warning; a wrong
/// schema line throws ParseError.
void parse_annotations(std::string_view text, std::string_view source, IngestResult& into);
IngestResult ingest(const RunManifest& manifest);
std::string serialize_annotations(std::span<const FrameAnnotation> frames);

struct Prediction {
  std::string frame_id;
  HandState state;
};

struct PredictionSet {
  std::vector<Prediction> items;
  std::size_t malformed = 0;
  std::vector<std::string> problems;
};

PredictionSet parse_predictions(std::string_view text, std::string_view source);
PredictionSet load_predictions(const std::filesystem::path& path);
std::string serialize_predictions(std::span<const Prediction> predictions);

/// Runs fn(i) for i in [0, n) on `workers` threads. Each index is visited
/// once; callers write results into slot i, so output order never depends on
/// scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

enum class StateSource { GroundTruth, KeypointFit, MarkerFit };
std::string_view state_source_name(StateSource s);

struct FrameAudit {
  std::string frame_id;
  std::string subject_id;
  std::string gesture;
  std::optional<int> skin_tone;
  bool ok = false;
  std::string error;
  StateSource source = StateSource::GroundTruth;
  HandState state;
  std::optional<FitResult> fit;
  VisibilityReport visibility;
};

struct AuditResult {
  std::vector<FrameAudit> frames;
  std::optional<OcclusionAggregate> aggregate;
  std::size_t failed = 0;
  std::size_t malformed = 0;
  std::vector<std::string> ingest_problems;
};

/// Orientation and translation aligning the rest template onto observed
/// points (pose zero), used to start fits near the answer.
HandState rigid_initialization(const RiggedHandTemplate& tmpl, const Points3d& rest_points, const Points3d& observed,
                               const Eigen::VectorXd& weights);

/// Resolves each frame's state (ground truth, or a fit to keypoints, or to
/// markers), poses the mesh and measures visibility. Per-frame failures are
/// recorded and never abort the batch.
AuditResult run_occlusion_audit(const RiggedHandTemplate& tmpl, const CameraRig& rig, const IngestResult& ingested,
                                const PipelineConfig& cfg);

struct FrameMetrics {
  std::string frame_id;
  std::string subject_id;
  std::string gesture;
  std::optional<int> skin_tone;
  StateSource reference = StateSource::GroundTruth;
  double mean_finger_visibility = 0.0;
  bool low_visibility = false;
  MetricReport metrics;
};

struct UnmatchedFrame {
  std::string frame_id;
  std::string reason;
};

struct MetricJoinResult {
  /// Names of the articulated joints, for per-joint tables.
  std::array<std::string, kNumArticulated> joint_names;
  std::vector<FrameMetrics> frames;
  std::vector<UnmatchedFrame> unmatched;
  /// MPJAE (degrees) against scaled mean finger visibility (fraction).
  std::optional<RegressionFit> regression;
  std::optional<AnovaResult> skin_tone_anova;
  std::vector<std::string> notes;
};

/// Joins predictions with audited frames by frame id. Every prediction lands
/// exactly once in `frames` or `unmatched`; audited frames without a
/// prediction are listed as unmatched too.
MetricJoinResult run_metric_join(const RiggedHandTemplate& tmpl, const AuditResult& audit,
                                 const PredictionSet& predictions, const PipelineConfig& cfg);

/// Report writers. Each returns the file names it wrote, relative to out_dir.
std::vector<std::string> write_audit_reports(const AuditResult& audit, const PipelineConfig& cfg,
                                             const std::filesystem::path& out_dir);
std::vector<std::string> write_metric_reports(const MetricJoinResult& join, const PipelineConfig& cfg,
                                              const std::filesystem::path& out_dir);

struct RunSummary {
  std::string command;
  std::uint64_t seed = 0;
  std::string template_ref;
  PipelineConfig config;
  std::size_t frames_total = 0;
  std::size_t frames_ok = 0;
  std::size_t frames_failed = 0;
  std::size_t lines_skipped = 0;
  std::vector<std::string> files;
};

/// run_summary.json: configuration, seed, version and counts. Holds nothing
/// that varies between identical runs (no timestamps, paths or worker count).
void write_run_summary(const RunSummary& summary, const std::filesystem::path& out_dir);

struct SyntheticDatasetConfig {
  int frames = 24;
  int subjects = 4;
  std::uint64_t seed = 0;
  /// Every n-th frame keeps only its keypoints; 0 disables.
  int keypoint_only_every = 0;
  /// Every n-th frame keeps only surface markers; 0 disables.
  int marker_only_every = 0;
  /// Prediction error model: per-joint rotation error of
  /// error_intercept_deg + error_slope_deg * mean finger visibility.
  double error_intercept_deg = 20.0;
  double error_slope_deg = -15.0;
};

struct SyntheticDataset {
  CameraRig rig;
  std::vector<FrameAnnotation> frames;
  std::vector<Prediction> predictions;
  /// Scaled mean finger visibility of each ground-truth frame.
  std::vector<double> visibility;
};

/// Random hand poses seen from a fixed camera, with predictions whose
/// per-joint error depends linearly on occlusion.
SyntheticDataset make_synthetic_dataset(const RiggedHandTemplate& tmpl, const SyntheticDatasetConfig& cfg,
                                        const OcclusionConfig& occlusion = {});

}  // namespace dorsal
