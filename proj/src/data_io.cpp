#include "rotdet/data_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "rotdet/errors.hpp"

namespace rotdet {
namespace {

using nlohmann::json;

constexpr const char* kAnnotationFormat = "rotdet-annotations";
constexpr const char* kPredictionFormat = "rotdet-predictions";
constexpr double kAngleQuantum = 1e10;  // saved degrees are multiples of 1e-10

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
  }
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing '" + key + "'");
  return *it;
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) throw ParseError(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

std::int64_t integer(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer()) throw ParseError(where + ": '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

const json& array(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_array()) throw ParseError(where + ": '" + key + "' must be an array");
  return v;
}

void check_header(const json& doc, const char* format) {
  const std::string where = "document";
  const json& f = field(doc, "format", where);
  if (!f.is_string() || f.get<std::string>() != format) {
    throw ValidationError(std::string("expected format '") + format + "'");
  }
  const auto version = integer(doc, "version", where);
  if (version != kSchemaVersion) {
    throw ValidationError("unsupported schema version " + std::to_string(version));
  }
  if (doc.contains("angle_unit") && doc["angle_unit"] != "degrees") {
    throw ValidationError("only 'degrees' is supported as angle_unit");
  }
}

RotatedBoxd read_box(const json& obj, const std::string& where) {
  RotatedBoxd box{number(obj, "cx", where), number(obj, "cy", where), number(obj, "w", where),
                  number(obj, "h", where), degrees_to_radians(number(obj, "angle", where))};
  try {
    return canonicalize(box);
  } catch (const InvalidBoxError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

double saved_degrees(double radians) {
  double deg = std::round(radians_to_degrees(radians) * kAngleQuantum) / kAngleQuantum;
  if (deg >= 90.0) deg -= 180.0;
  if (deg < -90.0) deg += 180.0;
  return deg;
}

void write_box(json& obj, const RotatedBoxd& box) {
  const RotatedBoxd c = canonicalize(box);
  obj["cx"] = c.cx;
  obj["cy"] = c.cy;
  obj["w"] = c.w;
  obj["h"] = c.h;
  obj["angle"] = saved_degrees(c.theta);
}

std::string dump(const json& doc) { return doc.dump(1, '\t') + "\n"; }

std::string location(const std::string& video, std::size_t f, const char* list, std::size_t r) {
  std::ostringstream os;
  os << "video '" << video << "' frame #" << f << " " << list << "[" << r << "]";
  return os.str();
}

}  // namespace

double degrees_to_radians(double degrees) { return degrees / 180.0 * std::numbers::pi; }
double radians_to_degrees(double radians) { return radians / std::numbers::pi * 180.0; }

AnnotationSet parse_annotations(std::string_view text) {
  const json doc = parse_json(text);
  check_header(doc, kAnnotationFormat);
  AnnotationSet set;
  std::set<std::string> names;
  for (const json& jv : array(doc, "videos", "document")) {
    AnnotatedVideo video;
    const json& name = field(jv, "name", "video");
    if (!name.is_string()) throw ValidationError("video: 'name' must be a string");
    video.name = name.get<std::string>();
    if (!names.insert(video.name).second) throw ValidationError("duplicate video '" + video.name + "'");
    const std::string vwhere = "video '" + video.name + "'";
    video.image_width = static_cast<int>(integer(jv, "image_width", vwhere));
    video.image_height = static_cast<int>(integer(jv, "image_height", vwhere));
    if (video.image_width <= 0 || video.image_height <= 0) throw ValidationError(vwhere + ": image size must be positive");

    std::set<std::int64_t> frame_keys;
    const json& frames = array(jv, "frames", vwhere);
    for (std::size_t f = 0; f < frames.size(); ++f) {
      AnnotatedFrame frame;
      const std::string fwhere = vwhere + " frame #" + std::to_string(f);
      frame.index = integer(frames[f], "frame", fwhere);
      if (!frame_keys.insert(frame.index).second) {
        throw ValidationError(fwhere + ": duplicate frame key " + std::to_string(frame.index));
      }
      std::set<std::int64_t> ids;
      const json& objects = array(frames[f], "objects", fwhere);
      for (std::size_t r = 0; r < objects.size(); ++r) {
        const std::string where = location(video.name, f, "objects", r);
        Annotation a;
        a.person_id = integer(objects[r], "person_id", where);
        if (!ids.insert(a.person_id).second) {
          throw ValidationError(where + ": person_id " + std::to_string(a.person_id) + " repeated within the frame");
        }
        a.box = read_box(objects[r], where);
        frame.objects.push_back(a);
      }
      video.frames.push_back(std::move(frame));
    }
    set.videos.push_back(std::move(video));
  }
  return set;
}

std::string annotations_to_string(const AnnotationSet& set) {
  json doc;
  doc["format"] = kAnnotationFormat;
  doc["version"] = kSchemaVersion;
  doc["angle_unit"] = "degrees";
  doc["videos"] = json::array();
  for (const auto& video : set.videos) {
    json jv;
    jv["name"] = video.name;
    jv["image_width"] = video.image_width;
    jv["image_height"] = video.image_height;
    jv["frames"] = json::array();
    for (const auto& frame : video.frames) {
      json jf;
      jf["frame"] = frame.index;
      jf["objects"] = json::array();
      for (const auto& a : frame.objects) {
        json jo;
        jo["person_id"] = a.person_id;
        write_box(jo, a.box);
        jf["objects"].push_back(std::move(jo));
      }
      jv["frames"].push_back(std::move(jf));
    }
    doc["videos"].push_back(std::move(jv));
  }
  return dump(doc);
}

PredictionSet parse_predictions(std::string_view text) {
  const json doc = parse_json(text);
  check_header(doc, kPredictionFormat);
  PredictionSet set;
  std::set<std::string> names;
  for (const json& jv : array(doc, "videos", "document")) {
    PredictedVideo video;
    const json& name = field(jv, "name", "video");
    if (!name.is_string()) throw ValidationError("video: 'name' must be a string");
    video.name = name.get<std::string>();
    if (!names.insert(video.name).second) throw ValidationError("duplicate video '" + video.name + "'");
    const std::string vwhere = "video '" + video.name + "'";
    std::set<std::int64_t> frame_keys;
    const json& frames = array(jv, "frames", vwhere);
    for (std::size_t f = 0; f < frames.size(); ++f) {
      PredictedFrame frame;
      const std::string fwhere = vwhere + " frame #" + std::to_string(f);
      frame.index = integer(frames[f], "frame", fwhere);
      if (!frame_keys.insert(frame.index).second) {
        throw ValidationError(fwhere + ": duplicate frame key " + std::to_string(frame.index));
      }
      const json& dets = array(frames[f], "detections", fwhere);
      for (std::size_t r = 0; r < dets.size(); ++r) {
        const std::string where = location(video.name, f, "detections", r);
        Detection d;
        d.box = read_box(dets[r], where);
        d.conf = number(dets[r], "conf", where);
        if (!(d.conf >= 0 && d.conf <= 1)) throw ValidationError(where + ": conf must lie in [0, 1]");
        frame.detections.push_back(d);
      }
      video.frames.push_back(std::move(frame));
    }
    set.videos.push_back(std::move(video));
  }
  return set;
}

std::string predictions_to_string(const PredictionSet& set) {
  json doc;
  doc["format"] = kPredictionFormat;
  doc["version"] = kSchemaVersion;
  doc["angle_unit"] = "degrees";
  doc["videos"] = json::array();
  for (const auto& video : set.videos) {
    json jv;
    jv["name"] = video.name;
    jv["frames"] = json::array();
    for (const auto& frame : video.frames) {
      json jf;
      jf["frame"] = frame.index;
      jf["detections"] = json::array();
      for (const auto& d : frame.detections) {
        json jd;
        write_box(jd, d.box);
        jd["conf"] = d.conf;
        jf["detections"].push_back(std::move(jd));
      }
      jv["frames"].push_back(std::move(jf));
    }
    doc["videos"].push_back(std::move(jv));
  }
  return dump(doc);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

AnnotationSet load_annotations(const std::filesystem::path& path) { return parse_annotations(read_text_file(path)); }

void save_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
  write_text_file(path, annotations_to_string(set));
}

PredictionSet load_predictions(const std::filesystem::path& path) { return parse_predictions(read_text_file(path)); }

void save_predictions(const PredictionSet& set, const std::filesystem::path& path) {
  write_text_file(path, predictions_to_string(set));
}

AnnotationSet import_coco_rotated(std::string_view text, const std::string& video_name) {
  const json doc = parse_json(text);
  AnnotatedVideo video;
  video.name = video_name;
  std::map<std::int64_t, AnnotatedFrame> frames;
  for (const json& img : array(doc, "images", "document")) {
    const auto id = integer(img, "id", "image");
    const int w = static_cast<int>(integer(img, "width", "image " + std::to_string(id)));
    const int h = static_cast<int>(integer(img, "height", "image " + std::to_string(id)));
    if (video.image_width == 0) {
      video.image_width = w;
      video.image_height = h;
    } else if (w != video.image_width || h != video.image_height) {
      throw ValidationError("image " + std::to_string(id) + ": all frames of a video must share one size");
    }
    frames[id].index = id;
  }
  const json& anns = array(doc, "annotations", "document");
  for (std::size_t r = 0; r < anns.size(); ++r) {
    const std::string where = "annotations[" + std::to_string(r) + "]";
    const auto image_id = integer(anns[r], "image_id", where);
    const auto it = frames.find(image_id);
    if (it == frames.end()) throw ValidationError(where + ": unknown image_id " + std::to_string(image_id));
    const json& bbox = array(anns[r], "bbox", where);
    if (bbox.size() != 5 || !std::all_of(bbox.begin(), bbox.end(), [](const json& v) { return v.is_number(); })) {
      throw ValidationError(where + ": 'bbox' must be [cx, cy, w, h, degrees]");
    }
    Annotation a;
    a.person_id = anns[r].contains("person_id") ? integer(anns[r], "person_id", where)
                                                : static_cast<std::int64_t>(it->second.objects.size());
    RotatedBoxd box{bbox[0].get<double>(), bbox[1].get<double>(), bbox[2].get<double>(), bbox[3].get<double>(),
                    degrees_to_radians(bbox[4].get<double>())};
    try {
      a.box = canonicalize(box);
    } catch (const InvalidBoxError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    it->second.objects.push_back(a);
  }
  for (auto& [id, frame] : frames) video.frames.push_back(std::move(frame));
  AnnotationSet set;
  set.videos.push_back(std::move(video));
  return set;
}

nlohmann::json report_to_json(const EvalReport& report) {
  json doc;
  doc["format"] = "rotdet-eval-report";
  doc["version"] = kSchemaVersion;
  doc["ap50"] = report.ap50;
  doc["precision"] = report.precision;
  doc["recall"] = report.recall;
  doc["f_measure"] = report.f_measure;
  doc["pooled"] = report.pooled;
  doc["iou_threshold"] = report.iou_threshold;
  doc["conf_threshold"] = report.conf_threshold;
  doc["pr_curve"] = json::array();
  for (const auto& p : report.pr_curve) doc["pr_curve"].push_back({{"threshold", p.threshold}, {"recall", p.recall}, {"precision", p.precision}});
  doc["per_video"] = json::array();
  for (const auto& v : report.per_video) {
    doc["per_video"].push_back({{"name", v.name},
                                {"ap50", v.ap50},
                                {"precision", v.precision},
                                {"recall", v.recall},
                                {"f_measure", v.f_measure},
                                {"num_gts", v.num_gts},
                                {"num_preds", v.num_preds}});
  }
  return doc;
}

EvalReport report_from_json(const nlohmann::json& doc) {
  check_header(doc, "rotdet-eval-report");
  EvalReport r;
  const std::string where = "report";
  r.ap50 = number(doc, "ap50", where);
  r.precision = number(doc, "precision", where);
  r.recall = number(doc, "recall", where);
  r.f_measure = number(doc, "f_measure", where);
  r.pooled = field(doc, "pooled", where).get<bool>();
  r.iou_threshold = number(doc, "iou_threshold", where);
  r.conf_threshold = number(doc, "conf_threshold", where);
  for (const json& p : array(doc, "pr_curve", where)) {
    r.pr_curve.push_back({number(p, "threshold", "pr point"), number(p, "recall", "pr point"), number(p, "precision", "pr point")});
  }
  for (const json& v : array(doc, "per_video", where)) {
    VideoReport vr;
    vr.name = field(v, "name", "per_video").get<std::string>();
    vr.ap50 = number(v, "ap50", vr.name);
    vr.precision = number(v, "precision", vr.name);
    vr.recall = number(v, "recall", vr.name);
    vr.f_measure = number(v, "f_measure", vr.name);
    vr.num_gts = static_cast<std::size_t>(integer(v, "num_gts", vr.name));
    vr.num_preds = static_cast<std::size_t>(integer(v, "num_preds", vr.name));
    r.per_video.push_back(std::move(vr));
  }
  return r;
}

std::string pr_curve_csv(const std::vector<PrPoint>& curve) {
  std::string out = "recall,precision,threshold\n";
  char line[128];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", p.recall, p.precision, p.threshold);
    out += line;
  }
  return out;
}

}  // namespace rotdet
