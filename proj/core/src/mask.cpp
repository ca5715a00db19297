// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace {

void require_same_shape(const BinaryMask2D& a, const BinaryMask2D& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionMismatchError(fmt::format("{}: mask dimensions differ ({}x{} vs {}x{})", op, a.width(),
                                                 a.height(), b.width(), b.height()));
    }
}

std::int64_t floor_div(std::int64_t num, std::int64_t den) {
    std::int64_t q = num / den;
    if ((num % den != 0) && ((num < 0) != (den < 0))) {
        --q;
    }
    return q;
}

// Union-find over provisional labels of the first labelling pass.
class DisjointSet {
public:
    std::int32_t make() {
        parent_.push_back(static_cast<std::int32_t>(parent_.size()));
        return parent_.back();
    }

    std::int32_t find(std::int32_t x) {
        std::int32_t root = x;
        while (parent_[root] != root) {
            root = parent_[root];
        }
        while (parent_[x] != root) {
            std::int32_t next = parent_[x];
            parent_[x] = root;
            x = next;
        }
        return root;
    }

    void join(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return;
        }
        // Keep the smaller provisional label as root.
        if (b < a) {
            std::swap(a, b);
        }
        parent_[b] = a;
    }

private:
    std::vector<std::int32_t> parent_;
};

}  // namespace

BinaryMask2D::BinaryMask2D(int width, int height, bool fill)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)),
            fill ? 1 : 0) {
    if (width < 0 || height < 0) {
        throw std::invalid_argument("BinaryMask2D: negative dimensions");
    }
}

BinaryMask2D::BinaryMask2D(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
    if (width < 0 || height < 0 ||
        bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DimensionMismatchError(
            fmt::format("BinaryMask2D: {} bits for a {}x{} mask", bits_.size(), width, height));
    }
    for (auto& b : bits_) {
        b = b ? 1 : 0;
    }
}

std::size_t BinaryMask2D::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::size_t intersection_count(const BinaryMask2D& a, const BinaryMask2D& b) {
    require_same_shape(a, b, "intersection");
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        n += static_cast<std::size_t>(a.bits()[i] & b.bits()[i]);
    }
    return n;
}

std::size_t union_count(const BinaryMask2D& a, const BinaryMask2D& b) {
    require_same_shape(a, b, "union");
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        n += static_cast<std::size_t>(a.bits()[i] | b.bits()[i]);
    }
    return n;
}

double iou(const BinaryMask2D& a, const BinaryMask2D& b) {
    require_same_shape(a, b, "iou");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += static_cast<std::size_t>(a.bits()[i] & b.bits()[i]);
        uni += static_cast<std::size_t>(a.bits()[i] | b.bits()[i]);
    }
    if (uni == 0) {
        return 1.0;
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double dice(const BinaryMask2D& a, const BinaryMask2D& b) {
    require_same_shape(a, b, "dice");
    const std::size_t inter = intersection_count(a, b);
    const std::size_t total = a.count() + b.count();
    if (total == 0) {
        return 1.0;
    }
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

BinaryMask2D intersection(const BinaryMask2D& a, const BinaryMask2D& b) {
    require_same_shape(a, b, "intersection");
    std::vector<std::uint8_t> bits(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        bits[i] = a.bits()[i] & b.bits()[i];
    }
    return {a.width(), a.height(), std::move(bits)};
}

BinaryMask2D difference(const BinaryMask2D& a, const BinaryMask2D& b) {
    require_same_shape(a, b, "difference");
    std::vector<std::uint8_t> bits(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        bits[i] = a.bits()[i] & static_cast<std::uint8_t>(1 - b.bits()[i]);
    }
    return {a.width(), a.height(), std::move(bits)};
}

double area(const BinaryMask2D& mask, PixelSpacing spacing) {
    return static_cast<double>(mask.count()) * spacing.x * spacing.y;
}

// Meijster, Roerdink & Hesselink lower-envelope EDT on a grid padded by one
// false pixel on every side, so the image border acts as background.
std::vector<std::int64_t> squared_distance_transform(const BinaryMask2D& mask) {
    const int w = mask.width();
    const int h = mask.height();
    if (w == 0 || h == 0) {
        return {};
    }
    const int pw = w + 2;
    const int ph = h + 2;
    auto inside = [&](int px, int py) {
        return px >= 1 && py >= 1 && px <= w && py <= h && mask.at(px - 1, py - 1);
    };

    // Column pass: vertical distance to the nearest false pixel. Every
    // padded column starts and ends with a false pixel, so g is finite.
    std::vector<std::int64_t> g(static_cast<std::size_t>(pw) * ph);
    auto G = [&](int x, int y) -> std::int64_t& { return g[static_cast<std::size_t>(y) * pw + x]; };
    for (int x = 0; x < pw; ++x) {
        G(x, 0) = inside(x, 0) ? 1 : 0;
        for (int y = 1; y < ph; ++y) {
            G(x, y) = inside(x, y) ? G(x, y - 1) + 1 : 0;
        }
        for (int y = ph - 2; y >= 0; --y) {
            if (G(x, y + 1) < G(x, y)) {
                G(x, y) = G(x, y + 1) + 1;
            }
        }
    }

    // Row pass: lower envelope of parabolas (x - i)² + g(i)².
    std::vector<std::int64_t> out(static_cast<std::size_t>(w) * h);
    std::vector<int> s(pw);
    std::vector<int> t(pw);
    for (int y = 1; y <= h; ++y) {
        auto gy = [&](int i) { return G(i, y); };
        auto f = [&](int x, int i) {
            const std::int64_t dx = x - i;
            return dx * dx + gy(i) * gy(i);
        };
        auto sep = [&](int i, int u) {
            const std::int64_t num = static_cast<std::int64_t>(u) * u - static_cast<std::int64_t>(i) * i +
                                     gy(u) * gy(u) - gy(i) * gy(i);
            return floor_div(num, 2 * static_cast<std::int64_t>(u - i));
        };
        int q = 0;
        s[0] = 0;
        t[0] = 0;
        for (int u = 1; u < pw; ++u) {
            while (q >= 0 && f(t[q], s[q]) > f(t[q], u)) {
                --q;
            }
            if (q < 0) {
                q = 0;
                s[0] = u;
            } else {
                const std::int64_t next = 1 + sep(s[q], u);
                if (next < pw) {
                    ++q;
                    s[q] = u;
                    t[q] = static_cast<int>(next);
                }
            }
        }
        for (int u = pw - 1; u >= 0; --u) {
            if (u >= 1 && u <= w) {
                out[static_cast<std::size_t>(y - 1) * w + (u - 1)] = f(u, s[q]);
            }
            if (u == t[q]) {
                --q;
            }
        }
    }
    return out;
}

std::vector<double> distance_transform(const BinaryMask2D& mask) {
    const auto squared = squared_distance_transform(mask);
    std::vector<double> out(squared.size());
    std::transform(squared.begin(), squared.end(), out.begin(),
                   [](std::int64_t d2) { return std::sqrt(static_cast<double>(d2)); });
    return out;
}

Pixel interior_center(const BinaryMask2D& mask) {
    if (mask.empty_mask()) {
        throw EmptyMaskError("interior_center: empty mask");
    }
    const auto squared = squared_distance_transform(mask);
    // Row-major scan with a strict comparison keeps the smallest (row, col).
    std::size_t best = 0;
    for (std::size_t i = 1; i < squared.size(); ++i) {
        if (squared[i] > squared[best]) {
            best = i;
        }
    }
    const auto w = static_cast<std::size_t>(mask.width());
    return {static_cast<int>(best % w), static_cast<int>(best / w)};
}

ComponentLabels connected_components(const BinaryMask2D& mask, Connectivity connectivity) {
    const int w = mask.width();
    const int h = mask.height();
    ComponentLabels result{w, h, std::vector<std::int32_t>(mask.size(), 0), {}};
    auto label_at = [&](int x, int y) -> std::int32_t& {
        return result.labels[static_cast<std::size_t>(y) * w + x];
    };

    // First pass: provisional labels (1-based) from the already-visited
    // neighbours, equivalences recorded in the disjoint set.
    DisjointSet sets;
    sets.make();  // slot 0 is background
    const bool eight = connectivity == Connectivity::Eight;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) {
                continue;
            }
            std::int32_t current = 0;
            auto visit = [&](int nx, int ny) {
                if (nx < 0 || ny < 0 || nx >= w) {
                    return;
                }
                const std::int32_t neighbour = label_at(nx, ny);
                if (neighbour == 0) {
                    return;
                }
                if (current == 0) {
                    current = neighbour;
                } else {
                    sets.join(current, neighbour);
                }
            };
            visit(x - 1, y);
            visit(x, y - 1);
            if (eight) {
                visit(x - 1, y - 1);
                visit(x + 1, y - 1);
            }
            if (current == 0) {
                current = sets.make();
            }
            label_at(x, y) = current;
        }
    }

    // Second pass: resolve roots and renumber in order of first appearance.
    std::vector<std::int32_t> final_id;
    for (auto& label : result.labels) {
        if (label == 0) {
            continue;
        }
        const std::int32_t root = sets.find(label);
        if (static_cast<std::size_t>(root) >= final_id.size()) {
            final_id.resize(static_cast<std::size_t>(root) + 1, 0);
        }
        if (final_id[root] == 0) {
            result.sizes.push_back(0);
            final_id[root] = static_cast<std::int32_t>(result.sizes.size());
        }
        label = final_id[root];
        ++result.sizes[static_cast<std::size_t>(label) - 1];
    }
    return result;
}

BinaryMask2D largest_component(const BinaryMask2D& mask, Connectivity connectivity) {
    const auto components = connected_components(mask, connectivity);
    if (components.region_count() == 0) {
        return mask;
    }
    const auto largest = std::max_element(components.sizes.begin(), components.sizes.end());
    const auto id = static_cast<std::int32_t>(largest - components.sizes.begin()) + 1;
    std::vector<std::uint8_t> bits(mask.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        bits[i] = components.labels[i] == id ? 1 : 0;
    }
    return {mask.width(), mask.height(), std::move(bits)};
}

RleMask rle_encode(const BinaryMask2D& mask) {
    RleMask rle{mask.width(), mask.height(), {}};
    std::uint8_t value = 0;
    std::int64_t run = 0;
    for (const auto bit : mask.bits()) {
        if (bit != value) {
            rle.counts.push_back(run);
            value = bit;
            run = 0;
        }
        ++run;
    }
    rle.counts.push_back(run);
    return rle;
}

BinaryMask2D rle_decode(const RleMask& rle) {
    if (rle.width < 0 || rle.height < 0) {
        throw MalformedRleError("RLE: negative dimensions");
    }
    const auto expected = static_cast<std::int64_t>(rle.width) * rle.height;
    std::int64_t total = 0;
    for (std::size_t i = 0; i < rle.counts.size(); ++i) {
        const auto c = rle.counts[i];
        if (c < 0) {
            throw MalformedRleError(fmt::format("RLE: negative run length at index {}", i));
        }
        if (c == 0 && i != 0) {
            throw MalformedRleError(fmt::format("RLE: zero-length run at index {}", i));
        }
        total += c;
        if (total > expected) {
            break;
        }
    }
    if (total != expected) {
        throw MalformedRleError(
            fmt::format("RLE: runs cover {} pixels, expected {}x{}={}", total, rle.width, rle.height, expected));
    }
    std::vector<std::uint8_t> bits;
    bits.reserve(static_cast<std::size_t>(expected));
    std::uint8_t value = 0;
    for (const auto c : rle.counts) {
        bits.insert(bits.end(), static_cast<std::size_t>(c), value);
        value ^= 1;
    }
    return {rle.width, rle.height, std::move(bits)};
}

void to_json(nlohmann::json& j, const RleMask& rle) {
    j = nlohmann::json{{"width", rle.width}, {"height", rle.height}, {"counts", rle.counts}};
}

void from_json(const nlohmann::json& j, RleMask& rle) {
    if (!j.is_object() || !j.contains("width") || !j.contains("height") || !j.contains("counts")) {
        throw MalformedRleError("RLE: expected object with width, height, counts");
    }
    const auto& w = j.at("width");
    const auto& h = j.at("height");
    const auto& counts = j.at("counts");
    if (!w.is_number_integer() || !h.is_number_integer() || !counts.is_array()) {
        throw MalformedRleError("RLE: width/height must be integers and counts an array");
    }
    rle.width = w.get<int>();
    rle.height = h.get<int>();
    rle.counts.clear();
    rle.counts.reserve(counts.size());
    for (const auto& c : counts) {
        if (!c.is_number_integer()) {
            throw MalformedRleError("RLE: non-integer run length");
        }
        rle.counts.push_back(c.get<std::int64_t>());
    }
}

}  // namespace promptseg
