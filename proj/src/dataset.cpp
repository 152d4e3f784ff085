#include "rotdet/dataset.hpp"

#include <algorithm>

namespace rotdet {

std::vector<RotatedBoxd> AnnotatedFrame::boxes() const {
  std::vector<RotatedBoxd> out;
  out.reserve(objects.size());
  for (const auto& o : objects) out.push_back(o.box);
  return out;
}

std::size_t AnnotationSet::object_count() const {
  std::size_t n = 0;
  for (const auto& v : videos)
    for (const auto& f : v.frames) n += f.objects.size();
  return n;
}

const AnnotatedVideo* AnnotationSet::find(const std::string& name) const {
  const auto it = std::find_if(videos.begin(), videos.end(), [&](const auto& v) { return v.name == name; });
  return it == videos.end() ? nullptr : &*it;
}

std::size_t PredictionSet::detection_count() const {
  std::size_t n = 0;
  for (const auto& v : videos)
    for (const auto& f : v.frames) n += f.detections.size();
  return n;
}

const PredictedVideo* PredictionSet::find(const std::string& name) const {
  const auto it = std::find_if(videos.begin(), videos.end(), [&](const auto& v) { return v.name == name; });
  return it == videos.end() ? nullptr : &*it;
}

std::vector<Detection> PredictionSet::all_detections() const {
  std::vector<Detection> out;
  for (const auto& v : videos)
    for (const auto& f : v.frames) out.insert(out.end(), f.detections.begin(), f.detections.end());
  return out;
}

}  // namespace rotdet
