#pragma once

#include "mesr/media.hpp"

#include <vector>

namespace mesr {

struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> u;  // x displacement, px
    std::vector<double> v;  // y displacement, px (image rows grow downward)
};

/// Horn-Schunck settings. Smoothness weight applies to intensities in [0,1].
struct FlowParams {
    double smoothness = 0.05;
    int iterations = 100;  // per pyramid level
    int levels = 2;
    int warps = 5;         // re-linearizations per level; iterations are split across them
};

/// Coarse-to-fine Horn-Schunck flow such that frame(x + w(x)) ~ reference(x).
FlowField horn_schunck(const Frame& reference, const Frame& frame, const FlowParams& params = {});

}  // namespace mesr
