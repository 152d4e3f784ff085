#include "rotdet/postprocess.hpp"

#include <algorithm>
#include <tuple>

#include "rotdet/errors.hpp"

namespace rotdet {

void NmsConfig::validate() const {
  if (!(conf_threshold >= 0 && conf_threshold <= 1) || !(iou_threshold >= 0 && iou_threshold <= 1)) {
    throw ConfigError("NMS thresholds must lie in [0, 1]");
  }
}

std::vector<Detection> confidence_filter(std::span<const Detection> dets, double threshold) {
  std::vector<Detection> out;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
               [threshold](const Detection& d) { return d.conf >= threshold; });
  return out;
}

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.conf != b.conf) return a.conf > b.conf;
  return std::tie(a.box.cy, a.box.cx, a.box.w, a.box.h, a.box.theta) <
         std::tie(b.box.cy, b.box.cx, b.box.w, b.box.h, b.box.theta);
}

std::vector<Detection> nms(std::span<const Detection> dets, const NmsConfig& cfg) {
  cfg.validate();
  std::vector<Detection> ranked(dets.begin(), dets.end());
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);

  std::vector<Detection> kept;
  std::vector<bool> suppressed(ranked.size(), false);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(ranked[i]);
    for (std::size_t j = i + 1; j < ranked.size(); ++j) {
      if (!suppressed[j] && iou(ranked[i].box, ranked[j].box) > cfg.iou_threshold) suppressed[j] = true;
    }
  }
  return kept;
}

std::vector<Detection> postprocess(std::span<const Detection> dets, const NmsConfig& cfg) {
  const auto confident = confidence_filter(dets, cfg.conf_threshold);
  return nms(confident, cfg);
}

}  // namespace rotdet
