#include "dirdet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dirdet/errors.hpp"
#include "dirdet/geometry.hpp"
#include "json.hpp"

namespace dirdet {

namespace {

bool score_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.source_index < b.source_index;
}

bool pooled_order(const PooledDetection& a, const PooledDetection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image != b.image) return a.image < b.image;
  return a.source_index < b.source_index;
}

void validate_threshold(double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("DirIoU threshold must lie in [0, 1], got " +
                                std::to_string(threshold));
  }
}

}  // namespace

MatchResult match_image(std::span<const Detection> dets, std::span<const LabeledBox> gts,
                        double threshold) {
  validate_threshold(threshold);
  if (!std::is_sorted(dets.begin(), dets.end(), score_order)) {
    throw std::invalid_argument(
        "match_image expects detections sorted by (score desc, source_index asc)");
  }

  MatchResult result;
  result.detections.resize(dets.size());
  result.gt_matched.assign(gts.size(), false);

  for (size_t d = 0; d < dets.size(); ++d) {
    double best_iou = 0.0;
    int best_gt = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (result.gt_matched[g] || gts[g].class_id != dets[d].class_id) continue;
      const double iou = dir_iou(dets[d].box, gts[g].box);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(g);
      }
    }
    result.detections[d].dir_iou = best_iou;
    if (best_gt >= 0 && best_iou >= threshold) {
      result.detections[d].gt_index = best_gt;
      result.gt_matched[best_gt] = true;
    }
  }
  return result;
}

std::vector<PrPoint> pr_curve(std::vector<PooledDetection> dets, int label_count) {
  if (label_count <= 0) {
    throw std::invalid_argument("pr_curve needs a positive label count, got " +
                                std::to_string(label_count));
  }
  std::sort(dets.begin(), dets.end(), pooled_order);
  std::vector<PrPoint> curve;
  curve.reserve(dets.size());
  int tp = 0;
  int fp = 0;
  for (const PooledDetection& d : dets) {
    if (d.tp) {
      ++tp;
    } else {
      ++fp;
    }
    curve.push_back({static_cast<double>(tp) / (tp + fp),
                     static_cast<double>(tp) / label_count});
  }
  return curve;
}

double average_precision(std::span<const PrPoint> curve) {
  if (curve.empty()) return 0.0;
  // Monotone envelope: precision at each point becomes the running max from
  // the high-recall end.
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }
  // Integrate over recall increases; flat segments contribute nothing.
  double area = 0.0;
  double prev_recall = 0.0;
  for (size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].recall > prev_recall) {
      area += (curve[i].recall - prev_recall) * envelope[i];
      prev_recall = curve[i].recall;
    }
  }
  return area * 100.0;
}

namespace {

/// Per-image matching output in pooled form, kept per image so threaded and
/// serial execution merge identically. class_ids is aligned with pooled.
struct ImageMatches {
  std::vector<PooledDetection> pooled;
  std::vector<int> class_ids;
};

ImageMatches match_one(const std::string& image, const ImageSample& sample, double threshold) {
  std::vector<Detection> sorted(sample.dets.begin(), sample.dets.end());
  std::sort(sorted.begin(), sorted.end(), score_order);
  const MatchResult match = match_image(sorted, sample.gts, threshold);

  ImageMatches out;
  out.pooled.reserve(sorted.size());
  out.class_ids.reserve(sorted.size());
  for (size_t i = 0; i < sorted.size(); ++i) {
    PooledDetection p;
    p.score = sorted[i].score;
    p.image = image;
    p.source_index = sorted[i].source_index;
    p.tp = match.detections[i].gt_index >= 0;
    out.pooled.push_back(std::move(p));
    out.class_ids.push_back(sorted[i].class_id);
  }
  return out;
}

}  // namespace

EvalReport evaluate(const Dataset& data, const ClassTable& classes, double threshold,
                    int threads) {
  validate_threshold(threshold);
  if (threads <= 0) {
    throw std::invalid_argument("thread count must be positive, got " + std::to_string(threads));
  }

  std::vector<const std::string*> ids;
  std::vector<const ImageSample*> samples;
  ids.reserve(data.size());
  samples.reserve(data.size());
  for (const auto& [id, sample] : data) {
    ids.push_back(&id);
    samples.push_back(&sample);
  }

  // Each image lands in its own slot, so the merge below is independent of
  // which worker ran it.
  std::vector<ImageMatches> per_image(data.size());
  const auto run_range = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      per_image[i] = match_one(*ids[i], *samples[i], threshold);
    }
  };
  const int workers = std::min<int>(threads, static_cast<int>(data.size()));
  if (workers <= 1) {
    run_range(0, data.size());
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const size_t chunk = (data.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const size_t begin = w * chunk;
      const size_t end = std::min(data.size(), begin + chunk);
      pool.emplace_back(run_range, begin, end);
    }
    for (std::thread& t : pool) t.join();
  }

  EvalReport report;
  report.dir_iou_threshold = threshold;

  std::vector<std::optional<double>> defined_aps;
  for (const ClassSpec& spec : classes.specs()) {
    ClassReport cr;
    cr.class_id = spec.id;
    cr.name = spec.name;

    for (const ImageSample* sample : samples) {
      for (const LabeledBox& gt : sample->gts) {
        if (gt.class_id == spec.id) ++cr.labels;
      }
    }
    std::vector<PooledDetection> pooled;
    for (const ImageMatches& im : per_image) {
      for (size_t d = 0; d < im.pooled.size(); ++d) {
        if (im.class_ids[d] == spec.id) pooled.push_back(im.pooled[d]);
      }
    }

    cr.detections = static_cast<int>(pooled.size());
    for (const PooledDetection& p : pooled) {
      if (p.tp) {
        ++cr.tp;
      } else {
        ++cr.fp;
      }
    }
    cr.fn = cr.labels - cr.tp;
    cr.precision = (cr.detections > 0) ? 100.0 * cr.tp / cr.detections : 0.0;
    cr.recall = (cr.labels > 0) ? 100.0 * cr.tp / cr.labels : 0.0;
    if (cr.labels > 0) {
      cr.ap = average_precision(pr_curve(std::move(pooled), cr.labels));
      defined_aps.push_back(cr.ap);
    }
    report.classes.push_back(std::move(cr));
  }

  if (!defined_aps.empty()) {
    double sum = 0.0;
    for (const auto& ap : defined_aps) sum += *ap;
    report.map = sum / static_cast<double>(defined_aps.size());
  }
  return report;
}

std::string render_report_table(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line),
                "# matching: %s; interpolation: %s; dir_iou_threshold: %.2f\n",
                report.matching.c_str(), report.interpolation.c_str(),
                report.dir_iou_threshold);
  out << line;
  std::snprintf(line, sizeof(line), "%-10s %8s %10s %8s %8s\n", "Class", "Labels", "Precision",
                "Recall", "AP30");
  out << line;
  for (const ClassReport& cr : report.classes) {
    if (cr.ap) {
      std::snprintf(line, sizeof(line), "%-10s %8d %10.2f %8.2f %8.2f\n", cr.name.c_str(),
                    cr.labels, cr.precision, cr.recall, *cr.ap);
    } else {
      std::snprintf(line, sizeof(line), "%-10s %8d %10.2f %8.2f %8s\n", cr.name.c_str(),
                    cr.labels, cr.precision, cr.recall, "-");
    }
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-10s %8s %10s %8s %8.2f\n", "mAP", "", "", "", report.map);
  out << line;
  return out.str();
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["dir_iou_threshold"] = report.dir_iou_threshold;
  doc["matching"] = report.matching;
  doc["interpolation"] = report.interpolation;
  doc["classes"] = nlohmann::ordered_json::array();
  for (const ClassReport& cr : report.classes) {
    nlohmann::ordered_json c;
    c["id"] = cr.class_id;
    c["name"] = cr.name;
    c["labels"] = cr.labels;
    c["detections"] = cr.detections;
    c["tp"] = cr.tp;
    c["fp"] = cr.fp;
    c["fn"] = cr.fn;
    c["precision"] = cr.precision;
    c["recall"] = cr.recall;
    if (cr.ap) {
      c["ap"] = *cr.ap;
    } else {
      c["ap"] = nullptr;
    }
    doc["classes"].push_back(std::move(c));
  }
  doc["map"] = report.map;
  return doc.dump(2) + "\n";
}

}  // namespace dirdet
