#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dirdet/annotations.hpp"
#include "dirdet/geometry.hpp"
#include "dirdet/postprocess.hpp"

namespace dirdet {

inline constexpr int kGridRows = 16;
inline constexpr int kGridCols = 16;
inline constexpr int kGridCells = kGridRows * kGridCols;
inline constexpr int kCellChannels = 6;

// The single head emits one prediction vector per cell with channel order
// (x, y, theta, obj, abd, bee). The class channels are bound to fixed ids:
// "bee" is class 1 and "abd" is class 2; the class table supplies their box
// sizes, names, and directedness.
inline constexpr int kBeeClassId = 1;
inline constexpr int kAbdClassId = 2;

/// Raw (pre-activation) per-cell network outputs.
struct CellOutput {
  double raw_x = 0.0;
  double raw_y = 0.0;
  double raw_theta = 0.0;
  double raw_obj = 0.0;
  double raw_abd = 0.0;
  double raw_bee = 0.0;
};

/// Raw 16x16 head output. image_size must be divisible by 16.
struct GridOutput {
  std::array<CellOutput, kGridCells> cells{};
  int image_size = 512;

  CellOutput& at(int row, int col) { return cells[row * kGridCols + col]; }
  const CellOutput& at(int row, int col) const { return cells[row * kGridCols + col]; }
  double cell_size() const { return image_size / static_cast<double>(kGridCols); }
};

/// Throws std::invalid_argument unless image_size is positive and divisible
/// by the grid dimension.
void validate_grid_size(int image_size);

/// Activated per-cell values: sigmoid offsets and probabilities, ReLU-then-
/// wrap angle.
struct ActivatedCell {
  double offset_x = 0.0;  // [0, 1], fraction of the cell from its left edge
  double offset_y = 0.0;  // [0, 1], fraction of the cell from its top edge
  double theta = 0.0;     // [0, 2*pi)
  double obj = 0.0;
  double abd = 0.0;
  double bee = 0.0;
};

ActivatedCell activate(const CellOutput& cell);

struct ActivatedGrid {
  std::array<ActivatedCell, kGridCells> cells{};
  int image_size = 512;
  const ActivatedCell& at(int row, int col) const { return cells[row * kGridCols + col]; }
};

ActivatedGrid activate_grid(const GridOutput& grid);

/// Regression target for one cell: fractional offsets of the assigned
/// object's center, its class, and (for directed classes) the angle.
struct CellTarget {
  bool present = false;
  double offset_x = 0.0;  // [0, 1]
  double offset_y = 0.0;  // [0, 1]
  std::optional<Angle> theta;
  int class_id = 0;
};

struct TargetGrid {
  std::array<CellTarget, kGridCells> cells{};
  int image_size = 512;

  CellTarget& at(int row, int col) { return cells[row * kGridCols + col]; }
  const CellTarget& at(int row, int col) const { return cells[row * kGridCols + col]; }
};

/// Two ground truths landed in the same cell; the first in input order wins.
struct CellCollision {
  int row = 0;
  int col = 0;
  int kept_index = 0;
  int dropped_index = 0;
};

struct AssignResult {
  TargetGrid targets;
  std::vector<CellCollision> collisions;
};

/// Assigns each ground truth to the cell containing its center:
/// col = floor(cx / cell), row = floor(cy / cell), offsets the fractional
/// parts. Centers must lie in [0, image_size) on both axes.
AssignResult assign_targets(std::span<const LabeledBox> gts, int image_size);

/// Cell-local offsets to absolute center coordinates.
inline Vec2 cell_center(int row, int col, double offset_x, double offset_y, double cell_size) {
  return {(col + offset_x) * cell_size, (row + offset_y) * cell_size};
}

/// Activates every cell and emits one detection per cell whose confidence
/// (obj times best class probability) reaches `score_threshold`. Box size and
/// directedness come from the class table entry of the argmax class.
std::vector<Detection> decode(const GridOutput& grid, double score_threshold,
                              const ClassTable& classes);

/// Inverse of decode for round-trip testing: builds raw outputs that activate
/// exactly back to `targets`. Offsets must lie strictly inside (0, 1); the
/// obj/class logits are driven to +-8 (sigmoid 0.99966 / 0.00034).
GridOutput encode(const TargetGrid& targets);

/// Mean squared center-offset error over assigned cells, with gradient
/// 2 * (pred - target) / N per coordinate. Empty input gives 0 with no terms.
struct LossXY {
  double value = 0.0;
  std::vector<Vec2> grad;  // d value / d pred, aligned with the input
};
LossXY loss_xy(std::span<const Vec2> pred, std::span<const Vec2> target);

/// Mean cosine distance 1 - cos(pred - target) over directed cells, with
/// gradient sin(pred - target) / N. Continuous across the 0 / 2*pi boundary.
struct LossTheta {
  double value = 0.0;
  std::vector<double> grad;
};
LossTheta loss_theta(std::span<const double> pred, std::span<const double> target);

/// Binary cross-entropy pieces: objectness averaged over all cells (target 1
/// where a cell is assigned, else 0) and one-vs-all classification averaged
/// over assigned cells x classes. Probabilities are clamped to
/// [1e-7, 1 - 1e-7] inside the logs. Gradients are with respect to the
/// probabilities; entries of unassigned cells are 0 in d_abd / d_bee.
struct ObjClsLoss {
  double obj = 0.0;
  double cls = 0.0;
  std::array<double, kGridCells> d_obj{};
  std::array<double, kGridCells> d_abd{};
  std::array<double, kGridCells> d_bee{};
};
ObjClsLoss loss_obj_cls(const ActivatedGrid& pred, const TargetGrid& targets);

struct LossWeights {
  double xy = 0.1;
  double theta = 0.1;
  double cls = 0.3;
  double obj = 1.0;
};

struct LossComponents {
  double xy = 0.0;
  double theta = 0.0;
  double cls = 0.0;
  double obj = 0.0;
};

/// Weighted sum of the loss components. Throws ConfigError for negative
/// weights.
double total_loss(const LossComponents& components, const LossWeights& weights);

/// Full loss over one grid with the gradient chained down to every raw
/// channel (d_raw reuses the CellOutput layout as a gradient holder).
struct GridLoss {
  LossComponents components;  // unweighted
  double total = 0.0;
  GridOutput d_raw;
};
GridLoss grid_loss(const GridOutput& raw, const TargetGrid& targets, const LossWeights& weights);

// Grid tensor exchange: shape 16x16x6 in row-major cell order with channel
// order (x, y, theta, obj, abd, bee). The binary form is flat little-endian
// float64 with no header; the JSON form wraps the nested array together with
// the image size.
void write_grid_json(std::ostream& out, const GridOutput& grid);
GridOutput read_grid_json(std::istream& in);
void write_grid_binary(std::ostream& out, const GridOutput& grid);
GridOutput read_grid_binary(std::istream& in, int image_size = 512);

}  // namespace dirdet
