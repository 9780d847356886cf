#pragma once

#include <span>
#include <vector>

#include "ddsl/calib/captures.hpp"
#include "ddsl/core/error.hpp"
#include "ddsl/core/image.hpp"

namespace ddsl::calib {

/// Mean over the ROI of the channel-summed intensity.
inline double roi_mean(const RgbImage& img, const Mask& roi) {
  if (roi.size() != img.pixel_count()) throw ParamError("region of interest does not match the image size");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < roi.size(); ++i)
    if (roi[i]) {
      for (int c = 0; c < img.channels(); ++c) sum += img.plane(c)[i];
      ++n;
    }
  if (n == 0) throw ParamError("empty region of interest");
  return sum / static_cast<double>(n);
}

/// First/zero-order intensity ratio per band. `zero_order` holds either one
/// image shared by all bands or one image per band.
inline std::vector<double> estimate_eta(std::span<const RgbImage> zero_order, std::span<const RgbImage> first_order,
                                        const Mask& zero_roi, const Mask& first_roi) {
  if (first_order.empty()) throw ParamError("no first-order images");
  if (zero_order.size() != 1 && zero_order.size() != first_order.size())
    throw ParamError("need one zero-order image, or one per band");
  std::vector<double> eta(first_order.size());
  for (std::size_t j = 0; j < first_order.size(); ++j) {
    const double zero = roi_mean(zero_order[zero_order.size() == 1 ? 0 : j], zero_roi);
    if (zero == 0.0) throw DivisionError("zero-order intensity is 0");
    eta[j] = roi_mean(first_order[j], first_roi) / zero;
  }
  return eta;
}

/// Both orders captured side by side in each band image.
inline std::vector<double> estimate_eta(const EtaCaptureSet& set) {
  return estimate_eta(set.images, set.images, set.zero_roi, set.first_roi);
}

}  // namespace ddsl::calib
