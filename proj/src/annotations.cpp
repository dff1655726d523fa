#include "dirdet/annotations.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace dirdet {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void warn(std::vector<std::string>* warnings, int line, const std::string& msg) {
  if (warnings) warnings->push_back("line " + std::to_string(line) + ": " + msg);
}

double require_number(const json& obj, const char* key, int line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw ParseError(line, std::string("missing or non-numeric \"") + key + "\"");
  }
  double v = it->get<double>();
  if (!std::isfinite(v)) {
    throw ParseError(line, std::string("non-finite \"") + key + "\"");
  }
  return v;
}

json parse_line(const std::string& text, int line) {
  json obj = json::parse(text, nullptr, false);
  if (obj.is_discarded()) throw ParseError(line, "malformed JSON");
  if (!obj.is_object()) throw ParseError(line, "expected a JSON object");
  return obj;
}

struct LineRecord {
  std::string image;
  AnnotationRecord record;
  bool skip = false;  // lenient repair decided to drop this record
};

LineRecord read_record(const json& obj, const ClassTable& classes, const ParseOptions& opts,
                       int line, std::vector<std::string>* warnings) {
  LineRecord out;
  auto img = obj.find("image");
  if (img == obj.end() || !img->is_string()) {
    throw ParseError(line, "missing or non-string \"image\"");
  }
  out.image = img->get<std::string>();

  out.record.x = require_number(obj, "x", line);
  out.record.y = require_number(obj, "y", line);

  auto t = obj.find("t");
  if (t == obj.end() || !t->is_number_integer()) {
    throw ParseError(line, "missing or non-integer \"t\"");
  }
  out.record.class_id = t->get<int>();
  const ClassSpec* spec = classes.find(out.record.class_id);
  if (spec == nullptr) {
    throw ParseError(line, "unknown class id t=" + std::to_string(out.record.class_id));
  }

  auto theta = obj.find("theta");
  const bool has_theta = theta != obj.end() && !theta->is_null();
  if (has_theta) {
    if (!theta->is_number()) throw ParseError(line, "non-numeric \"theta\"");
    double v = theta->get<double>();
    if (!std::isfinite(v)) throw ParseError(line, "non-finite \"theta\"");
    if (!spec->directed) {
      if (!opts.lenient) {
        throw ParseError(line, "theta given for direction-free class \"" + spec->name + "\"");
      }
      warn(warnings, line, "dropping theta for direction-free class \"" + spec->name + "\"");
    } else {
      out.record.theta = Angle::wrap(v);
    }
  } else if (spec->directed) {
    if (!opts.lenient) {
      throw ParseError(line, "missing theta for directed class \"" + spec->name + "\"");
    }
    warn(warnings, line, "skipping record: missing theta for directed class \"" + spec->name + "\"");
    out.skip = true;
  }
  return out;
}

template <typename Fn>
void for_each_line(std::istream& in, Fn fn) {
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(text, line);
  }
}

ordered_json record_to_json(const std::string& image, const AnnotationRecord& rec) {
  ordered_json obj;
  obj["image"] = image;
  obj["x"] = rec.x;
  obj["y"] = rec.y;
  obj["t"] = rec.class_id;
  if (rec.theta) obj["theta"] = rec.theta->radians();
  return obj;
}

}  // namespace

ClassTable::ClassTable(std::vector<ClassSpec> specs) : specs_(std::move(specs)) {
  for (size_t i = 0; i < specs_.size(); ++i) {
    const ClassSpec& s = specs_[i];
    if (!(s.w > 0.0) || !(s.h > 0.0)) {
      throw ValidationError("class \"" + s.name + "\": box extents must be positive");
    }
    for (size_t j = 0; j < i; ++j) {
      if (specs_[j].id == s.id) {
        throw ValidationError("duplicate class id " + std::to_string(s.id));
      }
    }
  }
}

ClassTable ClassTable::defaults() {
  return ClassTable({{1, "bee", 40.0, 70.0, true}, {2, "abdomen", 40.0, 40.0, false}});
}

ClassTable ClassTable::from_json_text(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    throw ParseError("class config must be a JSON array");
  }
  std::vector<ClassSpec> specs;
  for (const json& item : doc) {
    if (!item.is_object()) throw ParseError("class config entries must be objects");
    ClassSpec s;
    try {
      s.id = item.at("id").get<int>();
      s.name = item.at("name").get<std::string>();
      s.w = item.at("w").get<double>();
      s.h = item.at("h").get<double>();
      s.directed = item.at("directed").get<bool>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad class config entry: ") + e.what());
    }
    specs.push_back(std::move(s));
  }
  return ClassTable(std::move(specs));
}

ClassTable ClassTable::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open class config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

const ClassSpec* ClassTable::find(int id) const {
  for (const ClassSpec& s : specs_) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

const ClassSpec& ClassTable::at(int id) const {
  const ClassSpec* s = find(id);
  if (s == nullptr) throw ValidationError("unknown class id " + std::to_string(id));
  return *s;
}

std::vector<AnnotationEntry> parse_annotations(std::istream& in, const ClassTable& classes,
                                               const ParseOptions& opts,
                                               std::vector<std::string>* warnings) {
  std::vector<AnnotationEntry> out;
  for_each_line(in, [&](const std::string& text, int line) {
    json obj = parse_line(text, line);
    LineRecord rec = read_record(obj, classes, opts, line, warnings);
    if (rec.skip) return;
    out.push_back({std::move(rec.image), rec.record});
  });
  return out;
}

std::vector<DetectionEntry> parse_detections(std::istream& in, const ClassTable& classes,
                                             const ParseOptions& opts,
                                             std::vector<std::string>* warnings) {
  std::vector<DetectionEntry> out;
  for_each_line(in, [&](const std::string& text, int line) {
    json obj = parse_line(text, line);
    LineRecord rec = read_record(obj, classes, opts, line, warnings);
    if (rec.skip) return;
    double score = require_number(obj, "score", line);
    if (score < 0.0 || score > 1.0) {
      throw ParseError(line, "score must be in [0, 1]");
    }
    out.push_back({std::move(rec.image), rec.record, score});
  });
  return out;
}

void write_annotations(std::ostream& out, std::span<const AnnotationEntry> entries) {
  for (const AnnotationEntry& e : entries) {
    out << record_to_json(e.image, e.record).dump() << '\n';
  }
}

void write_detections(std::ostream& out, std::span<const DetectionEntry> entries) {
  for (const DetectionEntry& e : entries) {
    ordered_json obj = record_to_json(e.image, e.record);
    obj["score"] = e.score;
    out << obj.dump() << '\n';
  }
}

DirectedBox annotation_to_box(const AnnotationRecord& rec, const ClassTable& classes) {
  const ClassSpec& spec = classes.at(rec.class_id);
  DirectedBox box;
  box.cx = rec.x;
  box.cy = rec.y;
  box.w = spec.w;
  box.h = spec.h;
  if (spec.directed) box.theta = rec.theta;
  return box;
}

}  // namespace dirdet
