#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "dirdet/annotations.hpp"
#include "dirdet/postprocess.hpp"

namespace dirdet {

/// Scene layout parameters. `counts` maps class id -> object count; classes
/// are placed in ascending id order so a seed pins the whole layout.
struct SceneConfig {
  int image_size = 512;
  std::map<int, int> counts;
  double min_separation = 0.0;  // pixels, pairwise across all objects
  std::uint64_t seed = 0;
  int max_attempts = 10000;  // total placement draws before giving up
};

/// Places objects with centers uniform over the image and pairwise center
/// distances >= min_separation, by rejection sampling. Directed classes get
/// an angle uniform in [0, 2*pi).
///
/// Draw order (fixed so seeds reproduce exactly): per object, x then y; the
/// angle is drawn only once a position is accepted. Every position draw
/// counts against max_attempts; exceeding the budget throws PackingError.
/// Unknown class ids and negative counts/separation throw ValidationError.
std::vector<LabeledBox> generate_scene(const SceneConfig& cfg, const ClassTable& classes);

/// Detector simulation parameters. Rates are probabilities in [0, 1]; noise
/// sigmas are Gaussian standard deviations (0 disables the draw entirely, so
/// zero-noise outputs carry bit-identical centers/angles).
struct PerturbConfig {
  double center_noise = 0.0;  // pixels
  double angle_noise = 0.0;   // radians
  double fp_rate = 0.0;       // expected false positives per ground truth
  double fn_rate = 0.0;       // drop probability per ground truth
  double tp_score_lo = 0.5;
  double tp_score_hi = 1.0;
  double fp_score_lo = 0.0;
  double fp_score_hi = 0.7;
  std::uint64_t seed = 0;
};

/// Turns ground truths into simulated detections: each surviving object gets
/// Gaussian center/angle noise (angles re-wrapped into [0, 2*pi)) and a
/// Uniform(tp_score_lo, tp_score_hi) score; false positives spawn per ground
/// truth with probability fp_rate, with a uniform position, a class drawn
/// uniformly from the table, and a Uniform(fp_score_lo, fp_score_hi) score.
/// The default score bands overlap so PR curves are nondegenerate.
///
/// Draw order per ground truth (fixed): drop coin; center dx, dy; angle;
/// true-positive score; false-positive coin, then the false positive's
/// class, x, y, angle, and score. Skipped stages consume no draws: a rate of
/// exactly 0 skips its coin, a sigma of 0 skips its noise, undirected
/// classes skip the angle, and a dropped object skips everything but the
/// coins. source_index is the emission order. Centers are not clamped to the
/// image. Invalid rates, negative sigmas, or inverted score bands throw
/// ValidationError.
std::vector<Detection> perturb(std::span<const LabeledBox> gts, int image_size,
                               const ClassTable& classes, const PerturbConfig& cfg);

}  // namespace dirdet
