#include "mesr/tim.hpp"

#include "mesr/error.hpp"

#include <cmath>
#include <numbers>

namespace mesr {

double tim_basis(std::size_t n, std::size_t k, double t) {
    const double nn = static_cast<double>(n);
    return std::cos(std::numbers::pi * static_cast<double>(k) * ((nn - 1.0) * t + 0.5) / nn);
}

std::vector<double> TimModel::embed(double t) const {
    std::vector<double> y(coefficients_.size());
    for (std::size_t k = 1; k <= y.size(); ++k) y[k - 1] = tim_basis(n_, k, t);
    return y;
}

Frame TimModel::evaluate(double t) const {
    std::vector<double> px = mean_;
    const std::vector<double> y = embed(t);
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double c = y[k];
        const auto& w = coefficients_[k];
        for (std::size_t i = 0; i < px.size(); ++i) px[i] += c * w[i];
    }
    return Frame(width_, height_, std::move(px));
}

TimModel tim_fit(const FrameSequence& clip) {
    const std::size_t n = clip.size();
    if (n < 2) throw ValidationError("TIM needs at least two frames");

    TimModel m;
    m.n_ = n;
    m.width_ = clip.width();
    m.height_ = clip.height();
    m.fps_ = clip.fps();
    m.id_ = clip.id();

    const std::size_t d = clip[0].size();
    m.mean_.assign(d, 0.0);
    for (const Frame& f : clip.frames())
        for (std::size_t i = 0; i < d; ++i) m.mean_[i] += f.pixels()[i];
    for (double& v : m.mean_) v /= static_cast<double>(n);

    // The embedding rows are orthogonal over the samples, so the least-squares map is a
    // projection: W_k = sum_j y_k(t_j) (x_j - mean) / sum_j y_k(t_j)^2.
    m.coefficients_.assign(n - 1, std::vector<double>(d, 0.0));
    for (std::size_t k = 1; k < n; ++k) {
        auto& w = m.coefficients_[k - 1];
        double norm = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double t = static_cast<double>(j) / static_cast<double>(n - 1);
            const double y = tim_basis(n, k, t);
            norm += y * y;
            const auto px = clip[j].pixels();
            for (std::size_t i = 0; i < d; ++i) w[i] += y * (px[i] - m.mean_[i]);
        }
        for (double& v : w) v /= norm;
    }
    return m;
}

FrameSequence tim_resample(const TimModel& model, std::size_t target_len) {
    if (target_len < 2) throw ValidationError("TIM target length must be >= 2");
    std::vector<Frame> frames;
    frames.reserve(target_len);
    for (std::size_t j = 0; j < target_len; ++j) {
        Frame f = model.evaluate(static_cast<double>(j) / static_cast<double>(target_len - 1));
        f.clamp_unit();
        frames.push_back(std::move(f));
    }
    // Same duration, new sample count.
    const double fps = model.fps_ * static_cast<double>(target_len - 1) / static_cast<double>(model.n_ - 1);
    return FrameSequence(std::move(frames), fps, model.id_);
}

FrameSequence tim_interpolate(const FrameSequence& clip, std::size_t target_len) {
    return tim_resample(tim_fit(clip), target_len);
}

}  // namespace mesr
