#pragma once

#include <vector>

#include "dirdet/geometry.hpp"

namespace dirdet {

struct Detection {
  DirectedBox box;
  int class_id = 0;
  double score = 0.0;   // in [0, 1]
  int source_index = 0; // stable identity for deterministic tie-breaking
};

/// Greedy per-class non-maximum suppression under dir_iou.
///
/// Detections scoring below `score_threshold` are dropped, the rest sorted by
/// (score desc, source_index asc). Walking that order, a detection is kept
/// unless its dir_iou with an already-kept detection of the same class reaches
/// `dir_iou_threshold`. Fully overlapping boxes with opposite directions have
/// dir_iou 0 and therefore both survive. The result preserves the keep order.
///
/// Throws std::invalid_argument when a threshold is outside [0, 1].
std::vector<Detection> directed_nms(std::vector<Detection> dets,
                                    double dir_iou_threshold = 0.3,
                                    double score_threshold = 0.0);

}  // namespace dirdet
