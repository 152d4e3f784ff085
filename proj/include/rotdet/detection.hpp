#pragma once

#include "rotdet/geometry.hpp"

namespace rotdet {

/// A predicted box with its confidence score in [0, 1].
struct Detection {
  RotatedBoxd box;
  double conf = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline Detection canonicalized(const Detection& det) { return {canonicalize(det.box), det.conf}; }

}  // namespace rotdet
