#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dirdet/errors.hpp"
#include "dirdet/geometry.hpp"

namespace dirdet {

/// Fixed-size box model for one object class. All instances of the class
/// share (w, h); only directed classes carry an angle.
struct ClassSpec {
  int id = 0;
  std::string name;
  double w = 0.0;
  double h = 0.0;
  bool directed = false;
};

class ClassTable {
 public:
  ClassTable() = default;
  explicit ClassTable(std::vector<ClassSpec> specs);

  /// The honeybee dataset classes: bee (id 1, 40x70, directed) and
  /// abdomen (id 2, 40x40, direction-free).
  static ClassTable defaults();

  /// Loads a JSON array of {id, name, w, h, directed} objects.
  static ClassTable from_json_text(const std::string& text);
  static ClassTable from_json_file(const std::string& path);

  const ClassSpec* find(int id) const;
  const ClassSpec& at(int id) const;  // throws ValidationError for unknown ids
  const std::vector<ClassSpec>& specs() const { return specs_; }

 private:
  std::vector<ClassSpec> specs_;
};

/// One ground-truth tuple: center, class id, and (for directed classes) the
/// direction angle.
struct AnnotationRecord {
  double x = 0.0;
  double y = 0.0;
  int class_id = 0;
  std::optional<Angle> theta;
};

struct AnnotationEntry {
  std::string image;
  AnnotationRecord record;
};

struct DetectionEntry {
  std::string image;
  AnnotationRecord record;
  double score = 0.0;
};

/// A materialized annotation: the class's fixed-size box plus the class id.
struct LabeledBox {
  DirectedBox box;
  int class_id = 0;
};

struct ParseOptions {
  /// When set, records whose theta presence disagrees with the class's
  /// directedness are repaired (stray theta dropped) or skipped (missing
  /// theta) with a warning instead of raising ParseError.
  bool lenient = false;
};

/// Reads JSON Lines of {"image", "x", "y", "t", "theta"?}. Line numbers are
/// 1-based in all errors and warnings; blank lines are skipped.
std::vector<AnnotationEntry> parse_annotations(std::istream& in, const ClassTable& classes,
                                               const ParseOptions& opts = {},
                                               std::vector<std::string>* warnings = nullptr);

/// Same schema plus a required "score" in [0, 1].
std::vector<DetectionEntry> parse_detections(std::istream& in, const ClassTable& classes,
                                             const ParseOptions& opts = {},
                                             std::vector<std::string>* warnings = nullptr);

void write_annotations(std::ostream& out, std::span<const AnnotationEntry> entries);
void write_detections(std::ostream& out, std::span<const DetectionEntry> entries);

/// Expands a record into the class's uniform box at the annotated center.
DirectedBox annotation_to_box(const AnnotationRecord& rec, const ClassTable& classes);

}  // namespace dirdet
