// dirdet: directed-object detection geometry, NMS, and evaluation tools.
//
// Subcommands:
//   iou    print IoU, DirCorr, DirIoU for two boxes given on the command line
//   curve  CSV sweep of the same three values over the angle difference
//   nms    filter a detection JSONL file with direction-aware suppression
//   eval   score a detection file against a ground-truth file
//   gen    emit a seeded synthetic scene and simulated detections
//
// Exit codes: 0 success, 1 validation/parse error, 2 I/O error. Diagnostics
// go to stderr; data goes to stdout or to --output when given.

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dirdet/annotations.hpp"
#include "dirdet/detection_head.hpp"
#include "dirdet/errors.hpp"
#include "dirdet/evaluation.hpp"
#include "dirdet/geometry.hpp"
#include "dirdet/postprocess.hpp"
#include "dirdet/synthgen.hpp"

namespace {

using dirdet::Angle;
using dirdet::ClassTable;
using dirdet::Detection;
using dirdet::DirectedBox;
using dirdet::LabeledBox;

/// Data sink: --output path when given, stdout otherwise.
class OutputStream {
 public:
  explicit OutputStream(const std::string& path) {
    if (path.empty()) return;
    file_.emplace(path);
    if (!*file_) throw dirdet::IoError("cannot open output file: " + path);
    path_ = path;
  }

  std::ostream& get() { return file_ ? *file_ : std::cout; }

  void finish() {
    get().flush();
    if (!get()) throw dirdet::IoError("failed to write output" +
                                      (path_.empty() ? "" : ": " + path_));
  }

 private:
  std::optional<std::ofstream> file_;
  std::string path_;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dirdet::IoError("cannot open input file: " + path);
  return in;
}

ClassTable load_classes(const std::string& path) {
  if (path.empty()) return ClassTable::defaults();
  return ClassTable::from_json_file(path);
}

DirectedBox box_from_tuple(const std::vector<double>& t) {
  DirectedBox box;
  box.cx = t[0];
  box.cy = t[1];
  box.w = t[2];
  box.h = t[3];
  box.theta = Angle::wrap(t[4]);
  dirdet::validate_box(box);
  return box;
}

/// Shared flags wired into several subcommands.
struct CommonFlags {
  double dir_iou_thresh = 0.3;
  double score_thresh = 0.0;
  std::string classes_path;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output;
};

void add_output_flag(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--output", flags.output, "Write data to this file instead of stdout");
}

void add_classes_flag(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--classes", flags.classes_path,
                  "JSON class-spec file (default: built-in bee/abdomen classes)");
}

// ---------------------------------------------------------------------------
// iou

struct IouArgs {
  std::vector<double> box_a;
  std::vector<double> box_b;
  CommonFlags flags;
};

void run_iou(const IouArgs& args) {
  const DirectedBox a = box_from_tuple(args.box_a);
  const DirectedBox b = box_from_tuple(args.box_b);
  OutputStream out(args.flags.output);
  char line[64];
  std::snprintf(line, sizeof(line), "%.6f %.6f %.6f\n", dirdet::rotated_iou(a, b),
                dirdet::dir_corr(a.theta->radians() - b.theta->radians()),
                dirdet::dir_iou(a, b));
  out.get() << line;
  out.finish();
}

// ---------------------------------------------------------------------------
// curve

struct CurveArgs {
  double width = 40.0;
  double height = 70.0;
  int step_deg = 1;
  CommonFlags flags;
};

void run_curve(const CurveArgs& args) {
  if (args.step_deg <= 0 || 360 % args.step_deg != 0) {
    throw dirdet::ValidationError("--step must be a positive divisor of 360, got " +
                                  std::to_string(args.step_deg));
  }
  DirectedBox a;
  a.w = args.width;
  a.h = args.height;
  a.theta = Angle::wrap(0.0);
  dirdet::validate_box(a);

  OutputStream out(args.flags.output);
  out.get() << "delta_deg,iou,dir_corr,dir_iou\n";
  char line[128];
  for (int deg = 0; deg <= 360; deg += args.step_deg) {
    const double delta = deg * dirdet::kPi / 180.0;
    DirectedBox b = a;
    b.theta = Angle::wrap(delta);
    std::snprintf(line, sizeof(line), "%.6f,%.6f,%.6f,%.6f\n", static_cast<double>(deg),
                  dirdet::rotated_iou(a, b), dirdet::dir_corr(delta), dirdet::dir_iou(a, b));
    out.get() << line;
  }
  out.finish();
}

// ---------------------------------------------------------------------------
// nms

struct NmsArgs {
  std::string input;
  CommonFlags flags;
};

void run_nms(const NmsArgs& args) {
  const ClassTable classes = load_classes(args.flags.classes_path);
  std::ifstream in = open_input(args.input);
  const std::vector<dirdet::DetectionEntry> entries =
      dirdet::parse_detections(in, classes, {}, nullptr);

  // Suppression runs per image; images are processed in id order.
  std::map<std::string, std::vector<Detection>> by_image;
  for (const dirdet::DetectionEntry& e : entries) {
    std::vector<Detection>& dets = by_image[e.image];
    Detection d;
    d.box = dirdet::annotation_to_box(e.record, classes);
    d.class_id = e.record.class_id;
    d.score = e.score;
    d.source_index = static_cast<int>(dets.size());
    dets.push_back(d);
  }

  std::vector<dirdet::DetectionEntry> kept_entries;
  for (const auto& [image, dets] : by_image) {
    const std::vector<Detection> kept =
        dirdet::directed_nms(dets, args.flags.dir_iou_thresh, args.flags.score_thresh);
    for (const Detection& d : kept) {
      dirdet::DetectionEntry e;
      e.image = image;
      e.record.x = d.box.cx;
      e.record.y = d.box.cy;
      e.record.class_id = d.class_id;
      e.record.theta = d.box.theta;
      e.score = d.score;
      kept_entries.push_back(std::move(e));
    }
  }

  OutputStream out(args.flags.output);
  dirdet::write_detections(out.get(), kept_entries);
  out.finish();
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string gt_path;
  std::string det_path;
  CommonFlags flags;
};

void run_eval(const EvalArgs& args) {
  const ClassTable classes = load_classes(args.flags.classes_path);
  std::ifstream gt_in = open_input(args.gt_path);
  const std::vector<dirdet::AnnotationEntry> gt_entries =
      dirdet::parse_annotations(gt_in, classes, {}, nullptr);
  std::ifstream det_in = open_input(args.det_path);
  const std::vector<dirdet::DetectionEntry> det_entries =
      dirdet::parse_detections(det_in, classes, {}, nullptr);

  dirdet::Dataset data;
  for (const dirdet::AnnotationEntry& e : gt_entries) {
    LabeledBox gt;
    gt.box = dirdet::annotation_to_box(e.record, classes);
    gt.class_id = e.record.class_id;
    data[e.image].gts.push_back(gt);
  }
  for (const dirdet::DetectionEntry& e : det_entries) {
    std::vector<Detection>& dets = data[e.image].dets;
    Detection d;
    d.box = dirdet::annotation_to_box(e.record, classes);
    d.class_id = e.record.class_id;
    d.score = e.score;
    d.source_index = static_cast<int>(dets.size());
    dets.push_back(d);
  }

  const dirdet::EvalReport report =
      dirdet::evaluate(data, classes, args.flags.dir_iou_thresh, args.flags.threads);
  std::cout << dirdet::render_report_table(report);
  std::cout.flush();
  if (!std::cout) throw dirdet::IoError("failed to write report table");
  if (!args.flags.output.empty()) {
    OutputStream out(args.flags.output);
    out.get() << dirdet::report_to_json(report);
    out.finish();
  }
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  int bee_count = 20;
  int abd_count = 0;
  int image_size = 512;
  double min_sep = 60.0;
  double center_noise = 0.0;
  double angle_noise = 0.0;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  std::string image_id = "synthetic_0";
  std::string gt_path;
  std::string det_path;
  CommonFlags flags;
};

void run_gen(const GenArgs& args) {
  const ClassTable classes = load_classes(args.flags.classes_path);

  dirdet::SceneConfig scene_cfg;
  scene_cfg.image_size = args.image_size;
  scene_cfg.counts[dirdet::kBeeClassId] = args.bee_count;
  if (args.abd_count > 0) scene_cfg.counts[dirdet::kAbdClassId] = args.abd_count;
  scene_cfg.min_separation = args.min_sep;
  scene_cfg.seed = args.flags.seed;
  const std::vector<LabeledBox> gts = dirdet::generate_scene(scene_cfg, classes);

  dirdet::PerturbConfig perturb_cfg;
  perturb_cfg.center_noise = args.center_noise;
  perturb_cfg.angle_noise = args.angle_noise;
  perturb_cfg.fp_rate = args.fp_rate;
  perturb_cfg.fn_rate = args.fn_rate;
  perturb_cfg.seed = args.flags.seed + 1;  // decoupled from the layout stream
  const std::vector<Detection> dets =
      dirdet::perturb(gts, args.image_size, classes, perturb_cfg);

  std::vector<dirdet::AnnotationEntry> gt_entries;
  gt_entries.reserve(gts.size());
  for (const LabeledBox& gt : gts) {
    dirdet::AnnotationEntry e;
    e.image = args.image_id;
    e.record.x = gt.box.cx;
    e.record.y = gt.box.cy;
    e.record.class_id = gt.class_id;
    e.record.theta = gt.box.theta;
    gt_entries.push_back(std::move(e));
  }
  std::vector<dirdet::DetectionEntry> det_entries;
  det_entries.reserve(dets.size());
  for (const Detection& d : dets) {
    dirdet::DetectionEntry e;
    e.image = args.image_id;
    e.record.x = d.box.cx;
    e.record.y = d.box.cy;
    e.record.class_id = d.class_id;
    e.record.theta = d.box.theta;
    e.score = d.score;
    det_entries.push_back(std::move(e));
  }

  std::ofstream gt_out(args.gt_path);
  if (!gt_out) throw dirdet::IoError("cannot open output file: " + args.gt_path);
  dirdet::write_annotations(gt_out, gt_entries);
  gt_out.flush();
  if (!gt_out) throw dirdet::IoError("failed to write: " + args.gt_path);

  std::ofstream det_out(args.det_path);
  if (!det_out) throw dirdet::IoError("cannot open output file: " + args.det_path);
  dirdet::write_detections(det_out, det_entries);
  det_out.flush();
  if (!det_out) throw dirdet::IoError("failed to write: " + args.det_path);

  std::cerr << "wrote " << gt_entries.size() << " ground truths to " << args.gt_path << " and "
            << det_entries.size() << " detections to " << args.det_path << "\n";
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Directed-object detection geometry, NMS, and evaluation tools"};
  app.require_subcommand(1);

  IouArgs iou_args;
  CLI::App* iou = app.add_subcommand("iou", "IoU, DirCorr, and DirIoU for two boxes");
  iou->add_option("--box-a", iou_args.box_a, "First box as: cx cy w h theta")
      ->expected(5)
      ->required();
  iou->add_option("--box-b", iou_args.box_b, "Second box as: cx cy w h theta")
      ->expected(5)
      ->required();
  add_output_flag(iou, iou_args.flags);

  CurveArgs curve_args;
  CLI::App* curve = app.add_subcommand(
      "curve", "CSV of IoU/DirCorr/DirIoU for same-center boxes over the angle difference");
  curve->add_option("--width", curve_args.width, "Box width in pixels")->capture_default_str();
  curve->add_option("--height", curve_args.height, "Box height in pixels")
      ->capture_default_str();
  curve->add_option("--step", curve_args.step_deg, "Step in degrees; must divide 360")
      ->capture_default_str();
  add_output_flag(curve, curve_args.flags);

  NmsArgs nms_args;
  CLI::App* nms = app.add_subcommand("nms", "Direction-aware NMS over a detection JSONL file");
  nms->add_option("input", nms_args.input, "Detection JSONL file")->required();
  nms->add_option("--dir-iou-thresh", nms_args.flags.dir_iou_thresh,
                  "Suppression threshold on DirIoU")
      ->capture_default_str();
  nms->add_option("--score-thresh", nms_args.flags.score_thresh,
                  "Drop detections scoring below this before suppression")
      ->capture_default_str();
  add_classes_flag(nms, nms_args.flags);
  add_output_flag(nms, nms_args.flags);

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Score detections against ground truth");
  eval->add_option("gt", eval_args.gt_path, "Ground-truth JSONL file")->required();
  eval->add_option("dets", eval_args.det_path, "Detection JSONL file")->required();
  eval->add_option("--dir-iou-thresh", eval_args.flags.dir_iou_thresh,
                   "Match acceptance threshold on DirIoU")
      ->capture_default_str();
  eval->add_option("--threads", eval_args.flags.threads,
                   "Worker threads for per-image matching (output is identical for any count)")
      ->capture_default_str();
  add_classes_flag(eval, eval_args.flags);
  eval->add_option("--output", eval_args.flags.output, "Also write the report as JSON here");

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic scene and detections");
  gen->add_option("--count", gen_args.bee_count, "Number of bees")->capture_default_str();
  gen->add_option("--abd-count", gen_args.abd_count, "Number of abdomens")
      ->capture_default_str();
  gen->add_option("--image-size", gen_args.image_size, "Square image size in pixels")
      ->capture_default_str();
  gen->add_option("--min-sep", gen_args.min_sep, "Minimum center separation in pixels")
      ->capture_default_str();
  gen->add_option("--center-noise", gen_args.center_noise,
                  "Gaussian center noise sigma in pixels")
      ->capture_default_str();
  gen->add_option("--angle-noise", gen_args.angle_noise, "Gaussian angle noise sigma in radians")
      ->capture_default_str();
  gen->add_option("--fp-rate", gen_args.fp_rate, "False positives per ground truth")
      ->capture_default_str();
  gen->add_option("--fn-rate", gen_args.fn_rate, "Drop probability per ground truth")
      ->capture_default_str();
  gen->add_option("--image-id", gen_args.image_id, "Image id written to both files")
      ->capture_default_str();
  gen->add_option("--gt", gen_args.gt_path, "Ground-truth JSONL output path")->required();
  gen->add_option("--dets", gen_args.det_path, "Detection JSONL output path")->required();
  gen->add_option("--seed", gen_args.flags.seed,
                  "Layout seed; the detection stream uses seed+1")
      ->capture_default_str();
  add_classes_flag(gen, gen_args.flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (*iou) run_iou(iou_args);
  if (*curve) run_curve(curve_args);
  if (*nms) run_nms(nms_args);
  if (*eval) run_eval(eval_args);
  if (*gen) run_gen(gen_args);
  return 0;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dirdet::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
