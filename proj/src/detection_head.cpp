#include "dirdet/detection_head.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dirdet/errors.hpp"
#include "json.hpp"

namespace dirdet {

namespace {

constexpr double kProbClamp = 1e-7;
// Logit magnitude used by encode for saturated probabilities; sigmoid(8) is
// about 0.99966, comfortably inside the clamp band.
constexpr double kSaturatedLogit = 8.0;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

/// -(t*log(p) + (1-t)*log(1-p)) with p clamped to [1e-7, 1 - 1e-7].
double bce(double p, double t) {
  const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return -(t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc));
}

/// d bce(sigmoid(raw), t) / d raw. The sigmoid derivative cancels the
/// denominator of d bce/dp, leaving p - t; inside the clamp band the loss is
/// flat in p, so the gradient is zero there.
double bce_grad_raw(double p, double t) {
  if (p <= kProbClamp || p >= 1.0 - kProbClamp) return 0.0;
  return p - t;
}

/// d bce / d p for callers holding probabilities rather than logits.
double bce_grad_prob(double p, double t) {
  if (p <= kProbClamp || p >= 1.0 - kProbClamp) return 0.0;
  return (p - t) / (p * (1.0 - p));
}

}  // namespace

void validate_grid_size(int image_size) {
  if (image_size <= 0 || image_size % kGridCols != 0) {
    throw std::invalid_argument("image_size must be positive and divisible by " +
                                std::to_string(kGridCols) + ", got " +
                                std::to_string(image_size));
  }
}

ActivatedCell activate(const CellOutput& cell) {
  ActivatedCell out;
  out.offset_x = sigmoid(cell.raw_x);
  out.offset_y = sigmoid(cell.raw_y);
  out.theta = wrap_angle(std::max(0.0, cell.raw_theta));
  out.obj = sigmoid(cell.raw_obj);
  out.abd = sigmoid(cell.raw_abd);
  out.bee = sigmoid(cell.raw_bee);
  return out;
}

ActivatedGrid activate_grid(const GridOutput& grid) {
  validate_grid_size(grid.image_size);
  ActivatedGrid out;
  out.image_size = grid.image_size;
  for (int i = 0; i < kGridCells; ++i) out.cells[i] = activate(grid.cells[i]);
  return out;
}

AssignResult assign_targets(std::span<const LabeledBox> gts, int image_size) {
  validate_grid_size(image_size);
  AssignResult result;
  result.targets.image_size = image_size;
  const double cell = image_size / static_cast<double>(kGridCols);

  // First ground truth into a cell wins; later arrivals are reported as
  // collisions and dropped.
  std::array<int, kGridCells> owner;
  owner.fill(-1);

  for (int i = 0; i < static_cast<int>(gts.size()); ++i) {
    const DirectedBox& box = gts[i].box;
    if (!(box.cx >= 0.0 && box.cx < image_size) || !(box.cy >= 0.0 && box.cy < image_size)) {
      throw ValidationError("ground truth " + std::to_string(i) + " center (" +
                            std::to_string(box.cx) + ", " + std::to_string(box.cy) +
                            ") lies outside [0, " + std::to_string(image_size) + ")");
    }
    const int col = std::min(static_cast<int>(std::floor(box.cx / cell)), kGridCols - 1);
    const int row = std::min(static_cast<int>(std::floor(box.cy / cell)), kGridRows - 1);
    const int idx = row * kGridCols + col;
    if (owner[idx] >= 0) {
      result.collisions.push_back({row, col, owner[idx], i});
      continue;
    }
    owner[idx] = i;
    CellTarget& t = result.targets.cells[idx];
    t.present = true;
    t.offset_x = box.cx / cell - col;
    t.offset_y = box.cy / cell - row;
    t.theta = box.theta;
    t.class_id = gts[i].class_id;
  }
  return result;
}

std::vector<Detection> decode(const GridOutput& grid, double score_threshold,
                              const ClassTable& classes) {
  validate_grid_size(grid.image_size);
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw std::invalid_argument("score_threshold must lie in [0, 1], got " +
                                std::to_string(score_threshold));
  }
  const ClassSpec& bee = classes.at(kBeeClassId);
  const ClassSpec& abd = classes.at(kAbdClassId);
  const double cell = grid.cell_size();

  std::vector<Detection> dets;
  for (int row = 0; row < kGridRows; ++row) {
    for (int col = 0; col < kGridCols; ++col) {
      const ActivatedCell a = activate(grid.at(row, col));
      // Ties prefer the lower class id (bee).
      const ClassSpec& spec = (a.bee >= a.abd) ? bee : abd;
      const double score = a.obj * std::max(a.bee, a.abd);
      if (score < score_threshold) continue;

      Detection d;
      const Vec2 center = cell_center(row, col, a.offset_x, a.offset_y, cell);
      d.box.cx = center.x;
      d.box.cy = center.y;
      d.box.w = spec.w;
      d.box.h = spec.h;
      if (spec.directed) d.box.theta = Angle::wrap(a.theta);
      d.class_id = spec.id;
      d.score = score;
      d.source_index = static_cast<int>(dets.size());
      dets.push_back(d);
    }
  }
  return dets;
}

GridOutput encode(const TargetGrid& targets) {
  validate_grid_size(targets.image_size);
  GridOutput grid;
  grid.image_size = targets.image_size;
  for (int i = 0; i < kGridCells; ++i) {
    const CellTarget& t = targets.cells[i];
    CellOutput& c = grid.cells[i];
    if (!t.present) {
      c.raw_obj = -kSaturatedLogit;
      c.raw_abd = -kSaturatedLogit;
      c.raw_bee = -kSaturatedLogit;
      continue;
    }
    if (!(t.offset_x > 0.0 && t.offset_x < 1.0) || !(t.offset_y > 0.0 && t.offset_y < 1.0)) {
      throw ValidationError("encode: cell " + std::to_string(i) + " offsets (" +
                            std::to_string(t.offset_x) + ", " + std::to_string(t.offset_y) +
                            ") must lie strictly inside (0, 1)");
    }
    if (t.class_id != kBeeClassId && t.class_id != kAbdClassId) {
      throw ValidationError("encode: cell " + std::to_string(i) + " has class id " +
                            std::to_string(t.class_id) +
                            " but the head only carries channels for classes " +
                            std::to_string(kBeeClassId) + " and " + std::to_string(kAbdClassId));
    }
    c.raw_x = logit(t.offset_x);
    c.raw_y = logit(t.offset_y);
    c.raw_theta = t.theta ? t.theta->radians() : 0.0;
    c.raw_obj = kSaturatedLogit;
    c.raw_abd = (t.class_id == kAbdClassId) ? kSaturatedLogit : -kSaturatedLogit;
    c.raw_bee = (t.class_id == kBeeClassId) ? kSaturatedLogit : -kSaturatedLogit;
  }
  return grid;
}

LossXY loss_xy(std::span<const Vec2> pred, std::span<const Vec2> target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("loss_xy: pred and target sizes differ");
  }
  LossXY out;
  out.grad.assign(pred.size(), Vec2{});
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double dx = pred[i].x - target[i].x;
    const double dy = pred[i].y - target[i].y;
    sum += dx * dx + dy * dy;
    out.grad[i] = {2.0 * dx / n, 2.0 * dy / n};
  }
  out.value = sum / n;
  return out;
}

LossTheta loss_theta(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("loss_theta: pred and target sizes differ");
  }
  LossTheta out;
  out.grad.assign(pred.size(), 0.0);
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += 1.0 - std::cos(d);
    out.grad[i] = std::sin(d) / n;
  }
  out.value = sum / n;
  return out;
}

ObjClsLoss loss_obj_cls(const ActivatedGrid& pred, const TargetGrid& targets) {
  ObjClsLoss out;
  int assigned = 0;
  for (int i = 0; i < kGridCells; ++i) {
    if (targets.cells[i].present) ++assigned;
  }
  const double n_cells = static_cast<double>(kGridCells);
  const double n_cls = 2.0 * assigned;
  double obj_sum = 0.0;
  double cls_sum = 0.0;
  for (int i = 0; i < kGridCells; ++i) {
    const ActivatedCell& a = pred.cells[i];
    const CellTarget& t = targets.cells[i];
    const double t_obj = t.present ? 1.0 : 0.0;
    obj_sum += bce(a.obj, t_obj);
    out.d_obj[i] = bce_grad_prob(a.obj, t_obj) / n_cells;
    if (!t.present) continue;

    const double t_abd = (t.class_id == kAbdClassId) ? 1.0 : 0.0;
    const double t_bee = (t.class_id == kBeeClassId) ? 1.0 : 0.0;
    cls_sum += bce(a.abd, t_abd) + bce(a.bee, t_bee);
    out.d_abd[i] = bce_grad_prob(a.abd, t_abd) / n_cls;
    out.d_bee[i] = bce_grad_prob(a.bee, t_bee) / n_cls;
  }
  out.obj = obj_sum / n_cells;
  out.cls = (assigned > 0) ? cls_sum / n_cls : 0.0;
  return out;
}

double total_loss(const LossComponents& components, const LossWeights& weights) {
  if (weights.xy < 0.0 || weights.theta < 0.0 || weights.cls < 0.0 || weights.obj < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  return weights.xy * components.xy + weights.theta * components.theta +
         weights.cls * components.cls + weights.obj * components.obj;
}

GridLoss grid_loss(const GridOutput& raw, const TargetGrid& targets, const LossWeights& weights) {
  validate_grid_size(raw.image_size);
  if (raw.image_size != targets.image_size) {
    throw std::invalid_argument("grid_loss: prediction and target image sizes differ");
  }
  // Validate the weights before doing any work.
  (void)total_loss(LossComponents{}, weights);

  GridLoss out;
  out.d_raw.image_size = raw.image_size;

  int assigned = 0;
  int directed = 0;
  for (int i = 0; i < kGridCells; ++i) {
    if (!targets.cells[i].present) continue;
    ++assigned;
    if (targets.cells[i].theta) ++directed;
  }
  const double n_cells = static_cast<double>(kGridCells);
  const double n_cls = 2.0 * assigned;
  double xy_sum = 0.0;
  double theta_sum = 0.0;
  double obj_sum = 0.0;
  double cls_sum = 0.0;

  for (int i = 0; i < kGridCells; ++i) {
    const CellOutput& c = raw.cells[i];
    const ActivatedCell a = activate(c);
    const CellTarget& t = targets.cells[i];
    CellOutput& g = out.d_raw.cells[i];

    const double t_obj = t.present ? 1.0 : 0.0;
    obj_sum += bce(a.obj, t_obj);
    g.raw_obj = weights.obj * bce_grad_raw(a.obj, t_obj) / n_cells;
    if (!t.present) continue;

    const double dx = a.offset_x - t.offset_x;
    const double dy = a.offset_y - t.offset_y;
    xy_sum += dx * dx + dy * dy;
    // Chain the sigmoid derivative p * (1 - p) onto the squared-error term.
    g.raw_x = weights.xy * 2.0 * dx / assigned * a.offset_x * (1.0 - a.offset_x);
    g.raw_y = weights.xy * 2.0 * dy / assigned * a.offset_y * (1.0 - a.offset_y);

    if (t.theta) {
      const double d = a.theta - t.theta->radians();
      theta_sum += 1.0 - std::cos(d);
      // ReLU gate: the angle only responds to the raw channel above zero.
      const double relu_gate = (c.raw_theta > 0.0) ? 1.0 : 0.0;
      g.raw_theta = weights.theta * std::sin(d) / directed * relu_gate;
    }

    const double t_abd = (t.class_id == kAbdClassId) ? 1.0 : 0.0;
    const double t_bee = (t.class_id == kBeeClassId) ? 1.0 : 0.0;
    cls_sum += bce(a.abd, t_abd) + bce(a.bee, t_bee);
    g.raw_abd = weights.cls * bce_grad_raw(a.abd, t_abd) / n_cls;
    g.raw_bee = weights.cls * bce_grad_raw(a.bee, t_bee) / n_cls;
  }
  out.components.obj = obj_sum / n_cells;
  out.components.xy = (assigned > 0) ? xy_sum / assigned : 0.0;
  out.components.theta = (directed > 0) ? theta_sum / directed : 0.0;
  out.components.cls = (assigned > 0) ? cls_sum / n_cls : 0.0;
  out.total = total_loss(out.components, weights);
  return out;
}

namespace {

double channel(const CellOutput& c, int ch) {
  switch (ch) {
    case 0: return c.raw_x;
    case 1: return c.raw_y;
    case 2: return c.raw_theta;
    case 3: return c.raw_obj;
    case 4: return c.raw_abd;
    default: return c.raw_bee;
  }
}

void set_channel(CellOutput& c, int ch, double v) {
  switch (ch) {
    case 0: c.raw_x = v; break;
    case 1: c.raw_y = v; break;
    case 2: c.raw_theta = v; break;
    case 3: c.raw_obj = v; break;
    case 4: c.raw_abd = v; break;
    default: c.raw_bee = v; break;
  }
}

}  // namespace

void write_grid_json(std::ostream& out, const GridOutput& grid) {
  validate_grid_size(grid.image_size);
  nlohmann::ordered_json doc;
  doc["image_size"] = grid.image_size;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int row = 0; row < kGridRows; ++row) {
    nlohmann::ordered_json cols = nlohmann::ordered_json::array();
    for (int col = 0; col < kGridCols; ++col) {
      const CellOutput& c = grid.cells[row * kGridCols + col];
      cols.push_back({c.raw_x, c.raw_y, c.raw_theta, c.raw_obj, c.raw_abd, c.raw_bee});
    }
    rows.push_back(std::move(cols));
  }
  doc["grid"] = std::move(rows);
  out << doc.dump() << '\n';
  if (!out) throw IoError("failed to write grid JSON");
}

GridOutput read_grid_json(std::istream& in) {
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ParseError("grid JSON: malformed JSON");
  if (!doc.is_object() || !doc.contains("image_size") || !doc.contains("grid")) {
    throw ParseError("grid JSON: expected an object with 'image_size' and 'grid'");
  }
  if (!doc["image_size"].is_number_integer()) {
    throw ParseError("grid JSON: 'image_size' must be an integer");
  }
  GridOutput grid;
  grid.image_size = doc["image_size"].get<int>();
  try {
    validate_grid_size(grid.image_size);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("grid JSON: ") + e.what());
  }
  const nlohmann::json& rows = doc["grid"];
  if (!rows.is_array() || rows.size() != kGridRows) {
    throw ParseError("grid JSON: 'grid' must be an array of " + std::to_string(kGridRows) +
                     " rows");
  }
  for (int row = 0; row < kGridRows; ++row) {
    const nlohmann::json& cols = rows[row];
    if (!cols.is_array() || cols.size() != kGridCols) {
      throw ParseError("grid JSON: row " + std::to_string(row) + " must hold " +
                       std::to_string(kGridCols) + " cells");
    }
    for (int col = 0; col < kGridCols; ++col) {
      const nlohmann::json& cell = cols[col];
      if (!cell.is_array() || cell.size() != kCellChannels) {
        throw ParseError("grid JSON: cell (" + std::to_string(row) + ", " + std::to_string(col) +
                         ") must hold " + std::to_string(kCellChannels) + " channels");
      }
      CellOutput& c = grid.cells[row * kGridCols + col];
      for (int ch = 0; ch < kCellChannels; ++ch) {
        if (!cell[ch].is_number()) {
          throw ParseError("grid JSON: cell (" + std::to_string(row) + ", " +
                           std::to_string(col) + ") channel " + std::to_string(ch) +
                           " must be a number");
        }
        set_channel(c, ch, cell[ch].get<double>());
      }
    }
  }
  return grid;
}

void write_grid_binary(std::ostream& out, const GridOutput& grid) {
  validate_grid_size(grid.image_size);
  for (int i = 0; i < kGridCells; ++i) {
    for (int ch = 0; ch < kCellChannels; ++ch) {
      const double v = channel(grid.cells[i], ch);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  if (!out) throw IoError("failed to write grid binary");
}

GridOutput read_grid_binary(std::istream& in, int image_size) {
  validate_grid_size(image_size);
  GridOutput grid;
  grid.image_size = image_size;
  constexpr size_t kBytes = static_cast<size_t>(kGridCells) * kCellChannels * sizeof(double);
  std::string buf(kBytes, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(kBytes));
  if (static_cast<size_t>(in.gcount()) != kBytes) {
    throw IoError("grid binary: expected " + std::to_string(kBytes) + " bytes, got " +
                  std::to_string(in.gcount()));
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw IoError("grid binary: trailing data after " + std::to_string(kBytes) + " bytes");
  }
  const double* values = reinterpret_cast<const double*>(buf.data());
  for (int i = 0; i < kGridCells; ++i) {
    for (int ch = 0; ch < kCellChannels; ++ch) {
      set_channel(grid.cells[i], ch, values[i * kCellChannels + ch]);
    }
  }
  return grid;
}

}  // namespace dirdet
