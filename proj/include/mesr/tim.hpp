#pragma once

#include "mesr/media.hpp"

#include <vector>

namespace mesr {

/// Temporal interpolation model of one clip.
///
/// Frames are embedded on the curve traced by the Laplacian eigenvectors of the path graph
/// P_n. Eigenvector k (k = 1..n-1) sampled at node j is cos(pi k (j + 1/2) / n); letting
/// t = j / (n-1) vary continuously gives the curve y_k(t) = cos(pi k ((n-1) t + 1/2) / n).
/// A linear map from these n-1 coordinates to the mean-centred frames is fitted by least
/// squares; with the full n-1 dimensions it reproduces every input frame exactly.
class TimModel {
public:
    TimModel() = default;

    std::size_t source_length() const { return n_; }
    std::size_t dimension() const { return coefficients_.size(); }

    /// Curve coordinates at t in [0, 1].
    std::vector<double> embed(double t) const;

    /// Pixels at curve position t, not clamped.
    Frame evaluate(double t) const;

    friend TimModel tim_fit(const FrameSequence& clip);

private:
    std::size_t n_ = 0;
    int width_ = 0;
    int height_ = 0;
    double fps_ = 0.0;
    std::string id_;
    std::vector<double> mean_;
    std::vector<std::vector<double>> coefficients_;  // one pixel vector per basis function

    friend FrameSequence tim_resample(const TimModel& model, std::size_t target_len);
};

/// Path-graph basis value y_k(t) for a graph of n nodes.
double tim_basis(std::size_t n, std::size_t k, double t);

TimModel tim_fit(const FrameSequence& clip);

/// target_len frames at t_j = j / (target_len - 1), clamped to [0,1].
FrameSequence tim_resample(const TimModel& model, std::size_t target_len);

/// Convenience: fit then resample.
FrameSequence tim_interpolate(const FrameSequence& clip, std::size_t target_len);

inline constexpr std::size_t kDefaultTimLength = 10;

}  // namespace mesr
