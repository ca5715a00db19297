// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <bit>

#include "promptseg/stats.hpp"

namespace promptseg::testing {

BinaryMask2D random_mask(std::mt19937& rng, int width, int height, double density) {
    std::bernoulli_distribution bit(density);
    BinaryMask2D m(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            m.set(x, y, bit(rng));
        }
    }
    return m;
}

BinaryMask2D random_blobs(std::mt19937& rng, int width, int height, int count) {
    BinaryMask2D m(width, height);
    std::uniform_int_distribution<int> px(0, width - 1);
    std::uniform_int_distribution<int> py(0, height - 1);
    std::uniform_int_distribution<int> pr(1, std::max(1, std::min(width, height) / 4));
    for (int i = 0; i < count; ++i) {
        const int cx = px(rng);
        const int cy = py(rng);
        const int r = pr(rng);
        const bool disc = i % 2 == 0;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const bool inside = disc ? (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r
                                         : std::abs(x - cx) <= r && std::abs(y - cy) <= r / 2;
                if (inside) {
                    m.set(x, y);
                }
            }
        }
    }
    return m;
}

std::vector<std::int64_t> brute_squared_distance(const BinaryMask2D& mask) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<std::int64_t> out(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) {
                continue;
            }
            // Nearest pixel just outside the grid.
            const std::int64_t edge = std::min({x + 1, w - x, y + 1, h - y});
            std::int64_t best = edge * edge;
            for (int v = 0; v < h; ++v) {
                for (int u = 0; u < w; ++u) {
                    if (!mask.at(u, v)) {
                        const std::int64_t dx = u - x;
                        const std::int64_t dy = v - y;
                        best = std::min(best, dx * dx + dy * dy);
                    }
                }
            }
            out[static_cast<std::size_t>(y) * w + x] = best;
        }
    }
    return out;
}

std::vector<std::int32_t> flood_fill_labels(const BinaryMask2D& mask, bool eight_connected) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<std::int32_t> labels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
    std::int32_t next = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y) || labels[static_cast<std::size_t>(y) * w + x] != 0) {
                continue;
            }
            ++next;
            std::deque<Pixel> queue{{x, y}};
            labels[static_cast<std::size_t>(y) * w + x] = next;
            while (!queue.empty()) {
                const Pixel p = queue.front();
                queue.pop_front();
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if ((dx == 0 && dy == 0) || (!eight_connected && dx != 0 && dy != 0)) {
                            continue;
                        }
                        const int nx = p.x + dx;
                        const int ny = p.y + dy;
                        if (!mask.contains(nx, ny) || !mask.at(nx, ny)) {
                            continue;
                        }
                        auto& l = labels[static_cast<std::size_t>(ny) * w + nx];
                        if (l == 0) {
                            l = next;
                            queue.push_back({nx, ny});
                        }
                    }
                }
            }
        }
    }
    return labels;
}

Volume brute_majority(const Volume& a, const Volume& b, const Volume& c) {
    Volume out(a.dims(), a.spacing(), VolumeKind::Label, 0.0f);
    const auto& d = a.dims();
    for (int z = 0; z < d[2]; ++z) {
        for (int y = 0; y < d[1]; ++y) {
            for (int x = 0; x < d[0]; ++x) {
                const int votes = (a.at(x, y, z) != 0.0f) + (b.at(x, y, z) != 0.0f) + (c.at(x, y, z) != 0.0f);
                out.set(x, y, z, votes >= 2 ? 1.0f : 0.0f);
            }
        }
    }
    return out;
}

namespace {

double two_sided(const std::vector<double>& null_stats, double observed) {
    const double eps = 1e-9;
    double lower = 0.0;
    double upper = 0.0;
    for (const double s : null_stats) {
        lower += s <= observed + eps ? 1.0 : 0.0;
        upper += s >= observed - eps ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(null_stats.size());
    return std::min(1.0, 2.0 * std::min(lower / n, upper / n));
}

}  // namespace

double enumerate_rank_sum_p(std::span<const double> a, std::span<const double> b) {
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = stats::average_ranks(pooled);
    const std::size_t n = pooled.size();
    double observed = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        observed += ranks[i];
    }
    std::vector<double> null_stats;
    for (std::uint32_t subset = 0; subset < (1u << n); ++subset) {
        if (static_cast<std::size_t>(std::popcount(subset)) != a.size()) {
            continue;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if ((subset >> i) & 1u) {
                s += ranks[i];
            }
        }
        null_stats.push_back(s);
    }
    return two_sided(null_stats, observed);
}

double enumerate_signed_rank_p(std::span<const double> differences) {
    std::vector<double> d;
    for (const double v : differences) {
        if (v != 0.0) {
            d.push_back(v);
        }
    }
    std::vector<double> magnitude(d.size());
    std::transform(d.begin(), d.end(), magnitude.begin(), [](double v) { return std::abs(v); });
    const auto ranks = stats::average_ranks(magnitude);
    double observed = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        observed += d[i] > 0 ? ranks[i] : 0.0;
    }
    std::vector<double> null_stats;
    for (std::uint32_t signs = 0; signs < (1u << d.size()); ++signs) {
        double s = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if ((signs >> i) & 1u) {
                s += ranks[i];
            }
        }
        null_stats.push_back(s);
    }
    return two_sided(null_stats, observed);
}

Volume random_binary_volume(std::mt19937& rng, Dims3 dims, double density) {
    std::bernoulli_distribution bit(density);
    Volume v(dims, {1.0, 1.0, 1.0}, VolumeKind::Label, 0.0f);
    for (auto& x : v.mutable_data()) {
        x = bit(rng) ? 1.0f : 0.0f;
    }
    return v;
}

}  // namespace promptseg::testing
