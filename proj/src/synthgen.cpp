#include "dirdet/synthgen.hpp"

#include <cmath>
#include <random>
#include <string>

#include "dirdet/errors.hpp"
#include "dirdet/geometry.hpp"

namespace dirdet {

std::vector<LabeledBox> generate_scene(const SceneConfig& cfg, const ClassTable& classes) {
  if (cfg.image_size <= 0) {
    throw ValidationError("image size must be positive, got " + std::to_string(cfg.image_size));
  }
  if (cfg.min_separation < 0.0) {
    throw ValidationError("min separation must be non-negative, got " +
                          std::to_string(cfg.min_separation));
  }
  if (cfg.max_attempts <= 0) {
    throw ValidationError("attempt budget must be positive, got " +
                          std::to_string(cfg.max_attempts));
  }
  for (const auto& [class_id, count] : cfg.counts) {
    classes.at(class_id);  // throws for unknown ids
    if (count < 0) {
      throw ValidationError("count for class " + std::to_string(class_id) +
                            " must be non-negative, got " + std::to_string(count));
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coord(0.0, cfg.image_size);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);

  std::vector<LabeledBox> scene;
  const double sep_sq = cfg.min_separation * cfg.min_separation;
  int attempts = 0;
  for (const auto& [class_id, count] : cfg.counts) {
    const ClassSpec& spec = classes.at(class_id);
    for (int i = 0; i < count; ++i) {
      double cx = 0.0;
      double cy = 0.0;
      while (true) {
        if (attempts >= cfg.max_attempts) {
          throw PackingError("could not place " + std::to_string(count) + " objects of class " +
                             std::to_string(class_id) + " with separation " +
                             std::to_string(cfg.min_separation) + " after " +
                             std::to_string(cfg.max_attempts) + " attempts");
        }
        ++attempts;
        cx = coord(rng);
        cy = coord(rng);
        bool clear = true;
        for (const LabeledBox& placed : scene) {
          const double dx = cx - placed.box.cx;
          const double dy = cy - placed.box.cy;
          if (dx * dx + dy * dy < sep_sq) {
            clear = false;
            break;
          }
        }
        if (clear) break;
      }
      LabeledBox obj;
      obj.box.cx = cx;
      obj.box.cy = cy;
      obj.box.w = spec.w;
      obj.box.h = spec.h;
      if (spec.directed) obj.box.theta = Angle::wrap(angle(rng));
      obj.class_id = class_id;
      scene.push_back(obj);
    }
  }
  return scene;
}

namespace {

void validate_rate(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ValidationError(std::string(name) + " must lie in [0, 1], got " +
                          std::to_string(value));
  }
}

void validate_band(double lo, double hi, const char* name) {
  validate_rate(lo, name);
  validate_rate(hi, name);
  if (lo > hi) {
    throw ValidationError(std::string(name) + " band is inverted: " + std::to_string(lo) +
                          " > " + std::to_string(hi));
  }
}

}  // namespace

std::vector<Detection> perturb(std::span<const LabeledBox> gts, int image_size,
                               const ClassTable& classes, const PerturbConfig& cfg) {
  if (image_size <= 0) {
    throw ValidationError("image size must be positive, got " + std::to_string(image_size));
  }
  if (cfg.center_noise < 0.0 || cfg.angle_noise < 0.0) {
    throw ValidationError("noise sigmas must be non-negative");
  }
  validate_rate(cfg.fp_rate, "fp rate");
  validate_rate(cfg.fn_rate, "fn rate");
  validate_band(cfg.tp_score_lo, cfg.tp_score_hi, "tp score");
  validate_band(cfg.fp_score_lo, cfg.fp_score_hi, "fp score");
  if (cfg.fp_rate > 0.0 && classes.specs().empty()) {
    throw ValidationError("cannot draw false positives from an empty class table");
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coord(0.0, image_size);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::uniform_real_distribution<double> tp_score(cfg.tp_score_lo, cfg.tp_score_hi);
  std::uniform_real_distribution<double> fp_score(cfg.fp_score_lo, cfg.fp_score_hi);
  // normal_distribution requires a positive sigma; zero-noise configs skip
  // the draw so the outputs stay bit-identical to the inputs.
  std::normal_distribution<double> center_noise(0.0, std::max(cfg.center_noise, 1e-300));
  std::normal_distribution<double> angle_noise(0.0, std::max(cfg.angle_noise, 1e-300));
  std::uniform_int_distribution<size_t> class_pick(0, classes.specs().size() - 1);

  std::vector<Detection> dets;
  for (const LabeledBox& gt : gts) {
    const bool dropped = cfg.fn_rate > 0.0 && unit(rng) < cfg.fn_rate;
    if (!dropped) {
      Detection d;
      d.box = gt.box;
      if (cfg.center_noise > 0.0) {
        d.box.cx += center_noise(rng);
        d.box.cy += center_noise(rng);
      }
      if (gt.box.theta && cfg.angle_noise > 0.0) {
        d.box.theta = Angle::wrap(gt.box.theta->radians() + angle_noise(rng));
      }
      d.class_id = gt.class_id;
      d.score = tp_score(rng);
      d.source_index = static_cast<int>(dets.size());
      dets.push_back(d);
    }
    if (cfg.fp_rate > 0.0 && unit(rng) < cfg.fp_rate) {
      const ClassSpec& spec = classes.specs()[class_pick(rng)];
      Detection d;
      d.box.cx = coord(rng);
      d.box.cy = coord(rng);
      d.box.w = spec.w;
      d.box.h = spec.h;
      if (spec.directed) d.box.theta = Angle::wrap(angle(rng));
      d.class_id = spec.id;
      d.score = fp_score(rng);
      d.source_index = static_cast<int>(dets.size());
      dets.push_back(d);
    }
  }
  return dets;
}

}  // namespace dirdet
