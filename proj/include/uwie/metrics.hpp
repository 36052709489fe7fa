#pragma once

#include "uwie/tensor.hpp"

namespace uwie {

// Evaluation metrics. Double-precision internally regardless of image type;
// deterministic. The differentiable counterparts used in training live in
// losses.hpp; the naive oracles live in reference.hpp.

// 10*log10(1/max(MSE,1e-12)) capped at cap_db. Expects values in [0,1].
double psnr(const Image& out, const Image& target, double cap_db = 120.0);

// Mean local SSIM over 11x11 Gaussian windows (sigma 1.5, valid positions),
// K1=0.01 K2=0.03 L=1, averaged over channels. Requires extents >= 11.
double ssim(const Image& out, const Image& target);

}  // namespace uwie
