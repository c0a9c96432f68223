#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace gwap {

using TagId = std::string;

/// Player-drawn axis-aligned rectangle with the tags attached to it.
///
/// Pixels are half-open: the ROI covers [x, x+width) x [y, y+height), so two
/// rectangles that merely touch share no area. Width and height must be
/// positive and a tag may appear at most once.
class Roi {
public:
    Roi(std::int64_t x, std::int64_t y, std::int64_t width, std::int64_t height,
        std::vector<TagId> tags = {})
        : x_(x), y_(y), width_(width), height_(height), tags_(std::move(tags)) {
        if (width_ <= 0 || height_ <= 0) {
            throw InvalidArgument("ROI must have positive width and height, got " +
                                  std::to_string(width_) + "x" + std::to_string(height_));
        }
        for (std::size_t i = 0; i < tags_.size(); ++i) {
            if (tags_[i].empty()) throw InvalidArgument("ROI tag must be non-empty");
            for (std::size_t j = 0; j < i; ++j) {
                if (tags_[i] == tags_[j]) {
                    throw InvalidArgument("duplicate tag '" + tags_[i] + "' on ROI");
                }
            }
        }
    }

    std::int64_t x() const noexcept { return x_; }
    std::int64_t y() const noexcept { return y_; }
    std::int64_t width() const noexcept { return width_; }
    std::int64_t height() const noexcept { return height_; }
    std::int64_t right() const noexcept { return x_ + width_; }
    std::int64_t bottom() const noexcept { return y_ + height_; }
    const std::vector<TagId>& tags() const noexcept { return tags_; }

    bool has_tag(const TagId& tag) const {
        return std::find(tags_.begin(), tags_.end(), tag) != tags_.end();
    }

    /// Same rectangle with a different tag set.
    Roi with_tags(std::vector<TagId> tags) const {
        return Roi(x_, y_, width_, height_, std::move(tags));
    }

    friend bool operator==(const Roi&, const Roi&) = default;

private:
    std::int64_t x_;
    std::int64_t y_;
    std::int64_t width_;
    std::int64_t height_;
    std::vector<TagId> tags_;
};

inline std::int64_t roi_area(const Roi& r) noexcept { return r.width() * r.height(); }

inline std::int64_t intersection_area(const Roi& a, const Roi& b) noexcept {
    const std::int64_t w = std::min(a.right(), b.right()) - std::max(a.x(), b.x());
    const std::int64_t h = std::min(a.bottom(), b.bottom()) - std::max(a.y(), b.y());
    return (w > 0 && h > 0) ? w * h : 0;
}

struct ImageSize {
    std::int64_t width = 0;
    std::int64_t height = 0;
};

struct ClampResult {
    std::optional<Roi> roi; ///< empty when the ROI lies entirely outside the image
    bool clamped = false;   ///< true when the rectangle had to be changed
};

/// Restricts an ROI to the image rectangle [0, width) x [0, height).
inline ClampResult clamp_to_image(const Roi& r, ImageSize image) {
    const std::int64_t x0 = std::clamp<std::int64_t>(r.x(), 0, image.width);
    const std::int64_t y0 = std::clamp<std::int64_t>(r.y(), 0, image.height);
    const std::int64_t x1 = std::clamp<std::int64_t>(r.right(), 0, image.width);
    const std::int64_t y1 = std::clamp<std::int64_t>(r.bottom(), 0, image.height);
    if (x1 <= x0 || y1 <= y0) return {std::nullopt, true};
    const bool changed = x0 != r.x() || y0 != r.y() || x1 != r.right() || y1 != r.bottom();
    if (!changed) return {r, false};
    return {Roi(x0, y0, x1 - x0, y1 - y0, r.tags()), true};
}

} // namespace gwap
