#pragma once

#include "mesr/media.hpp"

#include <vector>

namespace mesr::imgproc {

/// Separable 5-tap binomial blur ([1 4 6 4 1]/16) with mirrored borders.
Frame blur5(const Frame& in);

/// Blur then keep every other sample; output is ceil(w/2) x ceil(h/2).
Frame pyr_down(const Frame& in);

/// Zero-insertion upsampling to (width, height) followed by the binomial blur scaled by 4.
Frame pyr_up(const Frame& in, int width, int height);

/// Gaussian pyramid; level 0 is the input.
std::vector<Frame> gaussian_pyramid(const Frame& in, int levels);

/// Central differences (f(x+1) - f(x-1)) / 2 with replicated borders.
Frame diff_x(const Frame& in);
Frame diff_y(const Frame& in);

/// Bilinear resize to exactly (width, height), sampling pixel centres.
Frame resize(const Frame& in, int width, int height);

}  // namespace mesr::imgproc
