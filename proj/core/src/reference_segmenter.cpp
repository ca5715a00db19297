// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <deque>
#include <stdexcept>

#include <fmt/format.h>

#include "promptseg/segmenter.hpp"

namespace promptseg {

namespace {

constexpr std::array<std::array<int, 2>, 8> kNeighbours{
    {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

// Seeded region growing with a running mean. A pixel joins when
// |I - mean| <= tolerance, compared exactly as |I·n - sum| <= tolerance·n.
void grow_from(const SliceImage& image, const BinaryMask2D& allowed, Pixel seed, int tolerance,
               BinaryMask2D& out) {
    if (!allowed.at(seed.x, seed.y)) {
        return;
    }
    BinaryMask2D visited(image.width, image.height);
    std::deque<Pixel> queue{seed};
    visited.set(seed.x, seed.y);
    std::int64_t sum = image.gray(seed.x, seed.y);
    std::int64_t n = 1;
    while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        out.set(p.x, p.y);
        for (const auto& [dx, dy] : kNeighbours) {
            const int x = p.x + dx;
            const int y = p.y + dy;
            if (!allowed.contains(x, y) || visited.at(x, y) || !allowed.at(x, y)) {
                continue;
            }
            const std::int64_t value = image.gray(x, y);
            if (std::llabs(value * n - sum) > static_cast<std::int64_t>(tolerance) * n) {
                continue;
            }
            visited.set(x, y);
            sum += value;
            ++n;
            queue.push_back({x, y});
        }
    }
}

// Box-only request: pixels of the box at or above a threshold that moves
// with the tolerance around the box mean.
BinaryMask2D box_threshold(const SliceImage& image, const BinaryMask2D& allowed, const BoxPrompt& box,
                           int tolerance, int mid_tolerance) {
    std::int64_t sum = 0;
    std::int64_t n = 0;
    for (int y = box.min.y; y <= box.max.y; ++y) {
        for (int x = box.min.x; x <= box.max.x; ++x) {
            sum += image.gray(x, y);
            ++n;
        }
    }
    // value >= mean + (mid - t)  <=>  value·n >= sum + (mid - t)·n
    const std::int64_t offset = static_cast<std::int64_t>(mid_tolerance - tolerance) * n;
    BinaryMask2D out(image.width, image.height);
    for (int y = box.min.y; y <= box.max.y; ++y) {
        for (int x = box.min.x; x <= box.max.x; ++x) {
            if (allowed.at(x, y) && static_cast<std::int64_t>(image.gray(x, y)) * n >= sum + offset) {
                out.set(x, y);
            }
        }
    }
    return out;
}

// Splits `region` between foreground and background seeds by simultaneous
// breadth-first growth. Background fronts only advance over pixels within
// `tolerance` of their seed's intensity; foreground fronts win ties. Returns
// the pixels claimed by background seeds.
BinaryMask2D background_claim(const SliceImage& image, const BinaryMask2D& region,
                              const std::vector<Pixel>& fg_seeds, const std::vector<Pixel>& bg_seeds,
                              int tolerance) {
    struct Front {
        Pixel p;
        bool background;
        int reference;
    };
    const int w = image.width;
    std::vector<std::int8_t> owner(region.size(), 0);  // 0 free, 1 fg, 2 bg
    auto own = [&](int x, int y) -> std::int8_t& { return owner[static_cast<std::size_t>(y) * w + x]; };

    std::deque<Front> queue;
    for (const auto& b : bg_seeds) {
        if (own(b.x, b.y) == 0) {
            own(b.x, b.y) = 2;
        }
    }
    for (const auto& f : fg_seeds) {
        if (region.at(f.x, f.y) && own(f.x, f.y) == 0) {
            own(f.x, f.y) = 1;
            queue.push_back({f, false, 0});
        }
    }
    for (const auto& b : bg_seeds) {
        queue.push_back({b, true, image.gray(b.x, b.y)});
    }

    while (!queue.empty()) {
        const Front front = queue.front();
        queue.pop_front();
        for (const auto& [dx, dy] : kNeighbours) {
            const int x = front.p.x + dx;
            const int y = front.p.y + dy;
            if (!region.contains(x, y) || !region.at(x, y) || own(x, y) != 0) {
                continue;
            }
            if (front.background && std::abs(static_cast<int>(image.gray(x, y)) - front.reference) > tolerance) {
                continue;
            }
            own(x, y) = front.background ? 2 : 1;
            queue.push_back({{x, y}, front.background, front.reference});
        }
    }

    BinaryMask2D claimed(image.width, region.height());
    for (std::size_t i = 0; i < owner.size(); ++i) {
        if (owner[i] == 2) {
            claimed.set(static_cast<int>(i % w), static_cast<int>(i / w));
        }
    }
    return claimed;
}

}  // namespace

ReferenceSegmenter::ReferenceSegmenter(ReferenceTolerances tolerances) : tolerances_(tolerances) {
    for (const int t : tolerances_.levels) {
        if (t < 0) {
            throw std::invalid_argument("reference backend: tolerances must be non-negative");
        }
    }
}

std::string ReferenceSegmenter::model_id() const {
    return fmt::format("reference-rg-{}-{}-{}", tolerances_.levels[0], tolerances_.levels[1], tolerances_.levels[2]);
}

BinaryMask2D ReferenceSegmenter::segment(const SegmentationRequest& request, int tolerance) const {
    validate_request(request);
    const auto& image = request.image;

    BinaryMask2D allowed(image.width, image.height, !request.box.has_value());
    if (request.box) {
        const auto& b = *request.box;
        for (int y = b.min.y; y <= b.max.y; ++y) {
            for (int x = b.min.x; x <= b.max.x; ++x) {
                allowed.set(x, y);
            }
        }
    }

    std::vector<Pixel> fg;
    std::vector<Pixel> bg;
    for (const auto& p : request.points) {
        (p.label == PromptLabel::Foreground ? fg : bg).push_back({p.x, p.y});
    }

    auto grow = [&]() {
        if (fg.empty()) {
            if (!request.box) {
                return BinaryMask2D(image.width, image.height);
            }
            return box_threshold(image, allowed, *request.box, tolerance, tolerances_.levels[1]);
        }
        BinaryMask2D region(image.width, image.height);
        for (const auto& seed : fg) {
            grow_from(image, allowed, seed, tolerance, region);
        }
        return region;
    };

    // Each round carves out the sub-regions claimed by background points that
    // the previous growth swallowed, then grows again. Every round consumes at
    // least one background point, so this terminates.
    std::vector<bool> consumed(bg.size(), false);
    BinaryMask2D region = grow();
    for (;;) {
        std::vector<Pixel> inside;
        for (std::size_t i = 0; i < bg.size(); ++i) {
            if (!consumed[i] && region.at(bg[i].x, bg[i].y)) {
                consumed[i] = true;
                inside.push_back(bg[i]);
            }
        }
        if (inside.empty()) {
            break;
        }
        const BinaryMask2D claimed = background_claim(image, region, fg, inside, tolerance);
        for (std::size_t i = 0; i < claimed.size(); ++i) {
            if (claimed[i]) {
                allowed.set(static_cast<int>(i % image.width), static_cast<int>(i / image.width), false);
            }
        }
        for (const auto& b : inside) {
            allowed.set(b.x, b.y, false);
        }
        region = grow();
    }
    return region;
}

PredictionTriple ReferenceSegmenter::predict(const SegmentationRequest& request) const {
    PredictionTriple triple;
    for (std::size_t i = 0; i < 3; ++i) {
        triple.masks[i] = segment(request, tolerances_.levels[i]);
    }
    for (std::size_t i = 0; i < 3; ++i) {
        triple.predicted_iou[i] = iou(triple.masks[i], triple.masks[1]);
    }
    return triple;
}

}  // namespace promptseg
