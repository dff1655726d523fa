#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dirdet/annotations.hpp"
#include "dirdet/postprocess.hpp"

namespace dirdet {

/// Outcome for one detection: the matched ground-truth index (or -1) and the
/// best same-class DirIoU among the candidates it was matched against
/// (recorded even for false positives; 0 when no unmatched same-class ground
/// truth remained).
struct DetectionMatch {
  int gt_index = -1;
  double dir_iou = 0.0;
};

struct MatchResult {
  std::vector<DetectionMatch> detections;  // aligned with the input order
  std::vector<bool> gt_matched;            // aligned with the ground truths
};

/// Greedy one-to-one matching for a single image. Walking detections in
/// order, each one claims the still-unmatched same-class ground truth with
/// the highest DirIoU, provided that value reaches `threshold`; everything
/// else is a false positive, and unclaimed ground truths are false negatives.
/// Equal-DirIoU candidates resolve to the lower ground-truth index.
///
/// `dets` must already be sorted by (score descending, source_index
/// ascending); throws std::invalid_argument otherwise, or if `threshold` is
/// outside [0, 1].
MatchResult match_image(std::span<const Detection> dets, std::span<const LabeledBox> gts,
                        double threshold = 0.3);

/// One detection pooled across images for PR accumulation. The (score desc,
/// image asc, source_index asc) key makes the pooled order a total order, so
/// the curve is reproducible regardless of how images were partitioned.
struct PooledDetection {
  double score = 0.0;
  std::string image;
  int source_index = 0;
  bool tp = false;
};

/// One point per detection along the score sweep; fractions in [0, 1].
struct PrPoint {
  double precision = 0.0;
  double recall = 0.0;
};

/// Sorts the pooled detections by the total order above and emits the
/// cumulative precision/recall sequence. `label_count` (the recall
/// denominator) must be positive; throws std::invalid_argument otherwise.
std::vector<PrPoint> pr_curve(std::vector<PooledDetection> dets, int label_count);

/// Area under the monotone precision envelope, integrated over recall at
/// every distinct recall value (continuous interpolation). Returns percent;
/// an empty curve scores 0.
double average_precision(std::span<const PrPoint> curve);

/// Ground truths and detections for one image. Detection order is free;
/// source_index breaks score ties deterministically.
struct ImageSample {
  std::vector<LabeledBox> gts;
  std::vector<Detection> dets;
};

/// Image id -> sample. An image appearing with detections but no ground
/// truths (or vice versa) is simply a sample with one empty side.
using Dataset = std::map<std::string, ImageSample>;

struct ClassReport {
  int class_id = 0;
  std::string name;
  int labels = 0;
  int detections = 0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 0.0;        // percent; 0 when there are no detections
  double recall = 0.0;           // percent; 0 when there are no labels
  std::optional<double> ap;      // percent; absent when labels == 0
};

struct EvalReport {
  double dir_iou_threshold = 0.3;
  // Protocol choices, spelled out so reports from different implementations
  // can be compared meaningfully.
  std::string matching = "greedy score-ordered, best-DirIoU (one-to-one)";
  std::string interpolation = "all-points (continuous)";
  std::vector<ClassReport> classes;
  double map = 0.0;  // percent; mean over classes that have labels
};

/// Full pipeline: per-image matching, per-class PR accumulation, AP, and the
/// unweighted mean AP over classes that have at least one label. Precision
/// and recall are the operating point counting every detection. `threads`
/// distributes per-image matching; the output is identical for any thread
/// count. Throws std::invalid_argument for a non-positive thread count or an
/// out-of-range threshold.
EvalReport evaluate(const Dataset& data, const ClassTable& classes, double threshold = 0.3,
                    int threads = 1);

/// Aligned-column text rendering: one row per class (Labels, Precision,
/// Recall, AP30) and a final mAP line, preceded by a comment line naming the
/// protocol choices.
std::string render_report_table(const EvalReport& report);

/// JSON rendering with the same content as the table plus raw counts.
std::string report_to_json(const EvalReport& report);

}  // namespace dirdet
