#include "dorsal/cli.hpp"

#include "dorsal/alignment.hpp"
#include "dorsal/feature_delta.hpp"
#include "dorsal/pipeline.hpp"
#include "dorsal/raster.hpp"
#include "dorsal/report_io.hpp"
#include "dorsal/synthetic_hand.hpp"
#include "dorsal/template_io.hpp"
#include "dorsal/version.hpp"
#include "json_util.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <optional>

namespace dorsal {

namespace {

using detail::json;
using detail::ordered_json;

struct RunFlags {
  std::string manifest;
  std::string out;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<int> raster;
  std::optional<double> occl_threshold;
  std::optional<double> visible_threshold;
  std::string predictions;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_predictions) {
  cmd->add_option("--manifest", f.manifest, "Run manifest (JSON)")->required();
  cmd->add_option("--out", f.out, "Output directory (overrides the manifest)");
  cmd->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Seed recorded with the run");
  cmd->add_option("--raster", f.raster, "Visibility raster side length in pixels")->check(CLI::PositiveNumber);
  cmd->add_option("--occl-threshold", f.occl_threshold, "Fully occluded threshold")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--visible-threshold", f.visible_threshold, "Fully visible threshold")->check(CLI::Range(0.0, 1.0));
  if (with_predictions) cmd->add_option("--predictions", f.predictions, "Predictions (overrides the manifest)");
}

RunManifest manifest_with_overrides(const RunFlags& f) {
  RunManifest m = load_manifest(f.manifest);
  if (!f.out.empty()) m.output_dir = std::filesystem::absolute(f.out);
  if (f.workers) m.config.workers = *f.workers;
  if (f.seed) m.seed = *f.seed;
  if (f.raster) m.config.occlusion.raster.width = m.config.occlusion.raster.height = *f.raster;
  if (f.occl_threshold) m.config.occlusion.thresholds.fully_occluded = *f.occl_threshold;
  if (f.visible_threshold) m.config.occlusion.thresholds.fully_visible = *f.visible_threshold;
  if (!f.predictions.empty()) m.predictions = std::filesystem::absolute(f.predictions);
  if (m.output_dir.empty()) throw Error("no output directory: pass --out or set output_dir in the manifest");
  validate(m.config);
  check_inputs_exist(m);
  return m;
}

std::filesystem::path out_dir_of(const RunManifest& m) { return m.resolve(m.output_dir); }

int cmd_audit(const RunFlags& flags, bool with_metrics) {
  const RunManifest m = manifest_with_overrides(flags);
  if (with_metrics && !m.predictions) throw Error("eval needs predictions: pass --predictions or set it in the manifest");
  const RiggedHandTemplate tmpl = load_template_ref(m);
  const CameraRig rig = load_calibration(m.resolve(m.calibration));
  const IngestResult ingested = ingest(m);
  const AuditResult audit = run_occlusion_audit(tmpl, rig, ingested, m.config);
  const auto out = out_dir_of(m);

  RunSummary summary;
  summary.command = with_metrics ? "eval" : "audit";
  summary.seed = m.seed;
  summary.template_ref = m.template_ref;
  summary.config = m.config;
  summary.frames_total = audit.frames.size();
  summary.frames_failed = audit.failed;
  summary.frames_ok = audit.frames.size() - audit.failed;
  summary.lines_skipped = audit.malformed;
  summary.files = write_audit_reports(audit, m.config, out);

  bool partial = audit.failed > 0 || audit.malformed > 0;
  if (with_metrics) {
    const PredictionSet preds = load_predictions(m.resolve(*m.predictions));
    for (const auto& p : preds.problems) warn("skipped prediction: " + p);
    const MetricJoinResult join = run_metric_join(tmpl, audit, preds, m.config);
    const auto files = write_metric_reports(join, m.config, out);
    summary.files.insert(summary.files.end(), files.begin(), files.end());
    summary.lines_skipped += preds.malformed;
    partial = partial || preds.malformed > 0;
    for (const auto& u : join.unmatched) {
      if (u.reason.rfind("metric failed", 0) == 0) partial = true;
    }
    std::cout << "matched " << join.frames.size() << " frames, " << join.unmatched.size() << " unmatched\n";
  }
  write_run_summary(summary, out);
  std::cout << summary.command << ": " << summary.frames_ok << " frames ok, " << summary.frames_failed << " failed, "
            << summary.lines_skipped << " lines skipped -> " << out.string() << "\n";
  return partial ? kExitPartial : kExitOk;
}

int cmd_fit(const RunFlags& flags) {
  const RunManifest m = manifest_with_overrides(flags);
  const RiggedHandTemplate tmpl = load_template_ref(m);
  const IngestResult ingested = ingest(m);
  const auto out = out_dir_of(m);
  std::filesystem::create_directories(out);

  struct Outcome {
    bool attempted = false;
    std::string source;
    std::optional<FitResult> result;
    double rms_mm = 0.0;
    std::string error;
  };
  std::vector<Outcome> outcomes(ingested.frames.size());
  const HandState neutral = HandState::neutral(tmpl.shape_rank());
  const HandMesh rest = pose_mesh(tmpl, neutral);
  parallel_for(ingested.frames.size(), m.config.workers, [&](std::size_t i) {
    const FrameAnnotation& f = ingested.frames[i];
    Outcome& o = outcomes[i];
    try {
      if (f.keypoints3d) {
        o.attempted = true;
        o.source = "keypoints";
        const auto& t = *f.keypoints3d;
        o.result = fit(tmpl, t, rigid_initialization(tmpl, rest.keypoints21, t.points, t.confidence), m.config.fit);
        const Points3d kp = pose_mesh(tmpl, o.result->state).keypoints21;
        double ss = 0.0, w = 0.0;
        for (int k = 0; k < kNumKeypoints; ++k) {
          if (t.confidence(k) <= 0.0) continue;
          ss += (kp.row(k) - t.points.row(k)).squaredNorm();
          w += 1.0;
        }
        o.rms_mm = w > 0.0 ? 1000.0 * std::sqrt(ss / w) : 0.0;
      } else if (f.markers3d) {
        o.attempted = true;
        o.source = "markers";
        const auto& t = *f.markers3d;
        Points3d restm(static_cast<Eigen::Index>(t.vertex_ids.size()), 3);
        for (std::size_t k = 0; k < t.vertex_ids.size(); ++k) {
          const int id = t.vertex_ids[k];
          if (id < 0 || id >= tmpl.num_vertices()) throw DimensionError("vertex_id out of range: " + std::to_string(id));
          restm.row(static_cast<Eigen::Index>(k)) = rest.vertices.row(id);
        }
        const Eigen::VectorXd w = t.confidence.size() ? t.confidence : Eigen::VectorXd::Ones(restm.rows());
        o.result = fit(tmpl, t, rigid_initialization(tmpl, restm, t.points, w), m.config.fit);
        const Points3d v = pose_mesh(tmpl, o.result->state).vertices;
        double ss = 0.0;
        for (std::size_t k = 0; k < t.vertex_ids.size(); ++k) {
          ss += (v.row(t.vertex_ids[k]) - t.points.row(static_cast<Eigen::Index>(k))).squaredNorm();
        }
        o.rms_mm = 1000.0 * std::sqrt(ss / static_cast<double>(t.vertex_ids.size()));
      }
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  std::vector<Prediction> fitted;
  CsvTable table({"frame_id", "source", "objective", "iterations", "converged", "rms_mm", "error"});
  std::size_t failed = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    const auto& id = ingested.frames[i].frame_id;
    if (!o.attempted) {
      table.add_row({id, "none", "", "", "", "", "no keypoints or markers"});
    } else if (!o.result) {
      ++failed;
      table.add_row({id, o.source, "", "", "", "", o.error});
    } else {
      table.add_row({id, o.source, format_number(o.result->final_objective), std::to_string(o.result->iterations),
                     o.result->converged ? "1" : "0", format_number(o.rms_mm), ""});
      fitted.push_back({id, o.result->state});
    }
  }
  table.write(out / "fit_summary.csv");
  detail::write_text_file(out / "fits.jsonl", serialize_predictions(fitted));

  RunSummary summary;
  summary.command = "fit";
  summary.seed = m.seed;
  summary.template_ref = m.template_ref;
  summary.config = m.config;
  summary.frames_total = ingested.frames.size();
  summary.frames_failed = failed;
  summary.frames_ok = fitted.size();
  summary.lines_skipped = ingested.malformed;
  summary.files = {"fit_summary.csv", "fits.jsonl"};
  write_run_summary(summary, out);
  std::cout << "fit: " << fitted.size() << " frames fitted, " << failed << " failed -> " << out.string() << "\n";
  return failed > 0 || ingested.malformed > 0 ? kExitPartial : kExitOk;
}

Points2d read_keypoints2d(const std::filesystem::path& path) {
  const json doc = json::parse(detail::read_text_file(path));
  detail::require_schema(doc, "dorsal.keypoints2d/1");
  const auto pts = detail::read_rows<double>(detail::require(doc, "points"), "points", 2);
  if (pts.rows() != kNumKeypoints) throw ParseError("keypoints2d must hold 21 points");
  return pts;
}

int pnm_maxval(const Raster& r) {
  const float hi = r.data.empty() ? 0.0f : *std::max_element(r.data.begin(), r.data.end());
  return hi > 255.0f ? 65535 : 255;
}

ordered_json matrix_json(const Eigen::Matrix3d& m) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

struct AlignFlags {
  std::string target_image, target_keypoints, reference_image, reference_keypoints, out;
  double margin = 0.15;
  int size = 384;
  double threshold = 3.0;
  int iterations = 2000;
  std::uint64_t seed = 0;
};

int cmd_align(const AlignFlags& f) {
  CropConfig crop;
  crop.margin = f.margin;
  crop.size = f.size;
  const Raster target = read_pnm(f.target_image);
  const Points2d target_kp = read_keypoints2d(f.target_keypoints);
  std::filesystem::create_directories(f.out);

  const CropResult tc = dorsal_crop(target_kp, target, crop);
  write_pnm(std::filesystem::path(f.out) / "target_crop.pgm", tc.image, pnm_maxval(target));

  ordered_json doc;
  doc["schema"] = "dorsal.alignment/1";
  doc["crop_size"] = {crop.size, crop.size};
  doc["margin"] = crop.margin;
  doc["dorsal_keypoints"] = crop.dorsal_keypoints;
  doc["crop_box"] = tc.box;
  doc["image_to_crop"] = matrix_json(tc.image_to_crop.matrix());
  std::vector<std::string> files = {"alignment.json", "target_crop.pgm"};

  if (!f.reference_image.empty() || !f.reference_keypoints.empty()) {
    if (f.reference_image.empty() || f.reference_keypoints.empty()) {
      throw Error("--reference-image and --reference-keypoints must be given together");
    }
    const Raster reference = read_pnm(f.reference_image);
    const Points2d ref_kp = read_keypoints2d(f.reference_keypoints);
    Points2d src(static_cast<Eigen::Index>(crop.dorsal_keypoints.size()), 2), dst(src.rows(), 2);
    for (std::size_t i = 0; i < crop.dorsal_keypoints.size(); ++i) {
      src.row(static_cast<Eigen::Index>(i)) = ref_kp.row(crop.dorsal_keypoints[i]);
      dst.row(static_cast<Eigen::Index>(i)) = target_kp.row(crop.dorsal_keypoints[i]);
    }
    RansacConfig rc;
    rc.inlier_threshold = f.threshold;
    rc.max_iterations = f.iterations;
    rc.seed = f.seed;
    const RansacResult h = estimate_homography(src, dst, rc);
    const Raster ref_crop = warp_grid(tc.image_to_crop * h.model, reference, crop.size, crop.size);
    write_pnm(std::filesystem::path(f.out) / "reference_crop.pgm", ref_crop, pnm_maxval(reference));
    files.emplace_back("reference_crop.pgm");
    ordered_json hj;
    hj["reference_to_target"] = matrix_json(h.model.matrix());
    hj["inliers"] = h.inliers;
    hj["inlier_count"] = h.inlier_count;
    hj["iterations"] = h.iterations;
    hj["inlier_threshold_px"] = rc.inlier_threshold;
    hj["seed"] = rc.seed;
    doc["homography"] = std::move(hj);
  }
  detail::write_text_file(std::filesystem::path(f.out) / "alignment.json", doc.dump(2) + "\n");
  std::cout << "align: wrote " << files.size() << " files -> " << f.out << "\n";
  return kExitOk;
}

int cmd_delta(const std::string& reference, const std::string& target, const std::string& out_dir) {
  FeatureGrid f0 = read_fgrid(reference);
  FeatureGrid ft = read_fgrid(target);
  f0.source = GridSource::Reference;
  ft.source = GridSource::Target;
  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  write_fgrid(out / "delta.fgrid", feature_delta(f0, ft));
  write_fgrid(out / "fused.fgrid", fuse_change_tensor(f0, ft));
  const SimilarityMap map = cosine_map(f0, ft);
  write_pnm(out / "similarity.pgm", similarity_to_image(map));

  CsvTable table({"row", "col", "cosine"},
                 {"grid=" + std::to_string(ft.height) + "x" + std::to_string(ft.width),
                  "patch_size=" + std::to_string(ft.patch_size),
                  "image_size=" + std::to_string(ft.height * ft.patch_size) + "x" +
                      std::to_string(ft.width * ft.patch_size)});
  for (int r = 0; r < ft.height; ++r) {
    for (int c = 0; c < ft.width; ++c) {
      table.add_row({std::to_string(r), std::to_string(c), format_number(map.values(r, c))});
    }
  }
  table.write(out / "similarity.csv");

  ordered_json doc;
  doc["schema"] = "dorsal.delta_summary/1";
  doc["grid"] = {ft.height, ft.width, ft.channels};
  doc["patch_size"] = ft.patch_size;
  doc["fused_channels"] = 3 * ft.channels + 1;
  doc["fused_channel_order"] = {"target_minus_reference", "cosine", "target", "reference"};
  doc["mean_cosine"] = map.values.cast<double>().mean();
  detail::write_text_file(out / "delta_summary.json", doc.dump(2) + "\n");
  std::cout << "delta: " << ft.height << "x" << ft.width << "x" << ft.channels << " -> " << out.string() << "\n";
  return kExitOk;
}

std::vector<bool> read_frame_predictions(const std::filesystem::path& path) {
  const std::string text = detail::read_text_file(path);
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::vector<std::pair<long, bool>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "frame,prediction") throw ParseError("frame predictions header must be 'frame,prediction'");
      header = true;
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 2 || (cells[1] != "0" && cells[1] != "1")) throw ParseError("bad frame prediction row: " + line);
    rows.emplace_back(std::stol(cells[0]), cells[1] == "1");
  }
  std::vector<bool> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<long>(i)) throw ParseError("frame predictions must list frames 0..n-1 in order");
    out[i] = rows[i].second;
  }
  return out;
}

struct ClickFlags {
  std::string trace, predictions, out;
  double threshold = 0.20;
  std::size_t min_frames = 1;
  bool tie_negative = false;
};

int cmd_clicks(const ClickFlags& f) {
  ClickConfig cfg;
  cfg.threshold = f.threshold;
  cfg.min_segment_frames = f.min_frames;
  const ForceTrace trace = load_force_trace(f.trace);
  const ClickLabels labels = label_clicks(trace, cfg);
  const std::filesystem::path out(f.out);
  std::filesystem::create_directories(out);

  CsvTable seg({"start_frame", "end_frame", "click"},
               {"click_threshold=" + format_number(cfg.threshold) + " (fraction of trial maximum, reading > threshold)",
                "min_segment_frames=" + std::to_string(cfg.min_segment_frames), "end_frame is exclusive"});
  for (const auto& s : labels.segments) seg.add_row({std::to_string(s.start), std::to_string(s.end), s.click ? "1" : "0"});
  seg.write(out / "click_segments.csv");

  if (!f.predictions.empty()) {
    const std::vector<bool> frame_preds = read_frame_predictions(f.predictions);
    const std::vector<bool> votes = per_click_majority(frame_preds, labels, !f.tie_negative);
    std::vector<bool> actual;
    for (const auto& s : labels.segments) actual.push_back(s.click);
    const ClassificationReport rep = classification_report(votes, actual);
    ordered_json doc;
    doc["schema"] = "dorsal.click_report/1";
    doc["click_threshold"] = cfg.threshold;
    doc["tie_rule"] = f.tie_negative ? "negative" : "positive";
    doc["segments"] = labels.segments.size();
    doc["clicks"] = labels.click_count();
    doc["accuracy"] = rep.accuracy;
    doc["weighted_precision"] = rep.weighted_precision;
    doc["weighted_recall"] = rep.weighted_recall;
    doc["weighted_f1"] = rep.weighted_f1;
    doc["confusion"] = {{rep.confusion[0][0], rep.confusion[0][1]}, {rep.confusion[1][0], rep.confusion[1][1]}};
    detail::write_text_file(out / "click_report.json", doc.dump(2) + "\n");
  }
  std::cout << "clicks: " << labels.click_count() << " clicks in " << trace.readings.size() << " frames -> "
            << out.string() << "\n";
  return kExitOk;
}

struct SynthFlags {
  std::string out;
  SyntheticDatasetConfig cfg;
  std::string template_path;
};

int cmd_synth(const SynthFlags& f) {
  const RiggedHandTemplate tmpl = f.template_path.empty() ? make_synthetic_hand() : load_template(f.template_path);
  const SyntheticDataset ds = make_synthetic_dataset(tmpl, f.cfg);
  const std::filesystem::path out(f.out);
  std::filesystem::create_directories(out);
  detail::write_text_file(out / "calibration.json", serialize_calibration(ds.rig));
  detail::write_text_file(out / "annotations.jsonl", serialize_annotations(ds.frames));
  detail::write_text_file(out / "predictions.jsonl", serialize_predictions(ds.predictions));
  RunManifest m;
  m.template_ref = f.template_path.empty() ? std::string(kBuiltinTemplate) : f.template_path;
  m.calibration = "calibration.json";
  m.annotations = {"annotations.jsonl"};
  m.predictions = "predictions.jsonl";
  m.output_dir = "reports";
  m.seed = f.cfg.seed;
  detail::write_text_file(out / "manifest.json", serialize_manifest(m));
  std::cout << "synth: " << ds.frames.size() << " frames -> " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Hand self-occlusion audit and dorsal-feature tooling", "dorsal"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunFlags audit_flags, eval_flags, fit_flags;
  auto* audit = app.add_subcommand("audit", "Per-frame finger and dorsum visibility");
  add_run_flags(audit, audit_flags, false);
  auto* fitc = app.add_subcommand("fit", "Fit the hand model to keypoints or markers");
  add_run_flags(fitc, fit_flags, false);
  auto* eval = app.add_subcommand("eval", "Join predictions with visibility and report metrics");
  add_run_flags(eval, eval_flags, true);

  AlignFlags align_flags;
  auto* align = app.add_subcommand("align", "Dorsal crop and reference-to-target homography");
  align->add_option("--target-image", align_flags.target_image, "Target image (PGM)")->required();
  align->add_option("--target-keypoints", align_flags.target_keypoints, "Target 2D keypoints (JSON)")->required();
  align->add_option("--reference-image", align_flags.reference_image, "Reference image (PGM)");
  align->add_option("--reference-keypoints", align_flags.reference_keypoints, "Reference 2D keypoints (JSON)");
  align->add_option("--margin", align_flags.margin, "Crop margin as a fraction of the box diagonal")
      ->check(CLI::NonNegativeNumber);
  align->add_option("--size", align_flags.size, "Crop side length")->check(CLI::Range(2, 16384));
  align->add_option("--ransac-threshold", align_flags.threshold, "Inlier threshold in pixels")
      ->check(CLI::PositiveNumber);
  align->add_option("--ransac-iterations", align_flags.iterations, "RANSAC iteration cap")->check(CLI::PositiveNumber);
  align->add_option("--seed", align_flags.seed, "RANSAC seed");
  align->add_option("--out", align_flags.out, "Output directory")->required();

  std::string delta_ref, delta_tgt, delta_out;
  auto* delta = app.add_subcommand("delta", "Feature delta, cosine map and fused tensor from FGRID files");
  delta->add_option("--reference", delta_ref, "Reference grid F0 (FGRID)")->required();
  delta->add_option("--target", delta_tgt, "Target grid Ft (FGRID)")->required();
  delta->add_option("--out", delta_out, "Output directory")->required();

  ClickFlags click_flags;
  auto* clicks = app.add_subcommand("clicks", "Label clicks in a force trace and score frame predictions");
  clicks->add_option("--trace", click_flags.trace, "Force trace CSV")->required();
  clicks->add_option("--frame-predictions", click_flags.predictions, "CSV of frame,prediction (0/1)");
  clicks->add_option("--threshold", click_flags.threshold, "Fraction of the trial maximum")
      ->check(CLI::Range(0.0, 1.0));
  clicks->add_option("--min-frames", click_flags.min_frames, "Minimum click length in frames");
  clicks->add_flag("--tie-negative", click_flags.tie_negative, "Resolve even votes as no click");
  clicks->add_option("--out", click_flags.out, "Output directory")->required();

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with manifest");
  synth->add_option("--out", synth_flags.out, "Output directory")->required();
  synth->add_option("--frames", synth_flags.cfg.frames, "Frame count")->check(CLI::PositiveNumber);
  synth->add_option("--subjects", synth_flags.cfg.subjects, "Subject count")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_flags.cfg.seed, "Generator seed");
  synth->add_option("--keypoint-only-every", synth_flags.cfg.keypoint_only_every, "Every n-th frame has keypoints only");
  synth->add_option("--marker-only-every", synth_flags.cfg.marker_only_every, "Every n-th frame has markers only");
  synth->add_option("--error-intercept", synth_flags.cfg.error_intercept_deg, "Prediction error at zero visibility");
  synth->add_option("--error-slope", synth_flags.cfg.error_slope_deg, "Prediction error change per unit visibility");
  synth->add_option("--template", synth_flags.template_path, "Template file (default: built-in)");

  std::string export_out;
  auto* exporter = app.add_subcommand("export-template", "Write the built-in template as JSON");
  exporter->add_option("--out", export_out, "Output file")->required();

  std::vector<std::string> argv_rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());
  try {
    app.parse(argv_rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (audit->parsed()) return cmd_audit(audit_flags, false);
    if (eval->parsed()) return cmd_audit(eval_flags, true);
    if (fitc->parsed()) return cmd_fit(fit_flags);
    if (align->parsed()) return cmd_align(align_flags);
    if (delta->parsed()) return cmd_delta(delta_ref, delta_tgt, delta_out);
    if (clicks->parsed()) return cmd_clicks(click_flags);
    if (synth->parsed()) return cmd_synth(synth_flags);
    if (exporter->parsed()) {
      save_template(make_synthetic_hand(), export_out);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}

}  // namespace dorsal
