#include "dirdet/postprocess.hpp"

#include <algorithm>
#include <stdexcept>

namespace dirdet {

std::vector<Detection> directed_nms(std::vector<Detection> dets, double dir_iou_threshold,
                                    double score_threshold) {
  if (!(dir_iou_threshold >= 0.0 && dir_iou_threshold <= 1.0)) {
    throw std::invalid_argument("dir_iou_threshold must be in [0, 1]");
  }
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw std::invalid_argument("score_threshold must be in [0, 1]");
  }

  std::erase_if(dets, [&](const Detection& d) { return d.score < score_threshold; });
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.source_index < b.source_index;
  });

  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const Detection& d : dets) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_id != d.class_id) continue;
      if (dir_iou(k.box, d.box) >= dir_iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace dirdet
