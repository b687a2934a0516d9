// Copyright 2026 The Planlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "planlab/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "planlab/random.hpp"

namespace planlab {

std::vector<MotionSegment> segment_trajectory(std::span<const Pose2> poses) {
    std::vector<MotionSegment> segments;
    if (poses.size() < 2) return segments;
    segments.reserve(poses.size() - 1);
    for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
        const Vec2 local = poses[i].to_local(poses[i + 1].position());
        segments.push_back({local.x, local.y, wrap_angle(poses[i + 1].heading - poses[i].heading)});
    }
    return segments;
}

std::vector<MotionSegment> segment_trajectory(const AgentTrack& track) {
    std::vector<Pose2> poses = track.history;
    if (track.future_gt) poses.insert(poses.end(), track.future_gt->begin(), track.future_gt->end());
    return segment_trajectory(poses);
}

Pose2 apply_segment(const Pose2& base, const MotionSegment& seg) {
    const Vec2 world = base.to_world({seg.dx, seg.dy});
    return {world.x, world.y, wrap_angle(base.heading + seg.dheading)};
}

double corner_distance(const MotionSegment& a, const MotionSegment& b, const BoxDims& dims) {
    const Pose2 pa = apply_segment(Pose2{}, a);
    const Pose2 pb = apply_segment(Pose2{}, b);
    const auto ca = oriented_box_corners(pa, dims);
    const auto cb = oriented_box_corners(pb, dims);
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) sum += (ca[i] - cb[i]).norm();
    return 0.25 * sum;
}

namespace {

// Deduplicated view of the sample set used during greedy selection. Cluster
// centers are always actual input samples; coverage is re-measured exactly on
// the full input, so binning only steers which candidate gets picked.
struct BinSet {
    std::vector<MotionSegment> rep;   // representative segment per bin
    std::vector<int> rep_index;       // original sample index of the representative
    std::vector<double> weight;       // samples per bin
};

BinSet build_bins(std::span<const MotionSegment> samples, double quantum, double heading_scale) {
    BinSet bins;
    std::map<std::tuple<long long, long long, long long>, int> index;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const MotionSegment& s = samples[i];
        const auto key = std::make_tuple(static_cast<long long>(std::floor(s.dx / quantum)),
                                         static_cast<long long>(std::floor(s.dy / quantum)),
                                         static_cast<long long>(std::floor(s.dheading * heading_scale / quantum)));
        auto [it, inserted] = index.try_emplace(key, static_cast<int>(bins.rep.size()));
        if (inserted) {
            bins.rep.push_back(s);
            bins.rep_index.push_back(static_cast<int>(i));
            bins.weight.push_back(1.0);
        } else {
            bins.weight[static_cast<std::size_t>(it->second)] += 1.0;
        }
    }
    return bins;
}

// Spatial hash over (dx, dy). corner_distance >= |translation delta|, so a
// 3x3 cell neighborhood at cell size eps is a sound candidate prefilter.
struct TranslationGrid {
    double cell{1.0};
    std::map<std::pair<long long, long long>, std::vector<int>> cells;

    void build(const BinSet& bins, double eps) {
        cell = std::max(eps, 1e-9);
        cells.clear();
        for (std::size_t i = 0; i < bins.rep.size(); ++i) {
            cells[key(bins.rep[i])].push_back(static_cast<int>(i));
        }
    }
    std::pair<long long, long long> key(const MotionSegment& s) const {
        return {static_cast<long long>(std::floor(s.dx / cell)),
                static_cast<long long>(std::floor(s.dy / cell))};
    }
    template <typename Fn>
    void for_neighbors(const MotionSegment& s, Fn&& fn) const {
        const auto [cx, cy] = key(s);
        for (long long dx = -1; dx <= 1; ++dx) {
            for (long long dy = -1; dy <= 1; ++dy) {
                const auto it = cells.find({cx + dx, cy + dy});
                if (it == cells.end()) continue;
                for (int idx : it->second) fn(idx);
            }
        }
    }
};

std::vector<int> greedy_cover(const BinSet& bins, int K, double eps, const BoxDims& dims) {
    const std::size_t n = bins.rep.size();
    TranslationGrid grid;
    grid.build(bins, eps);
    std::vector<char> covered(n, 0);
    double remaining = std::accumulate(bins.weight.begin(), bins.weight.end(), 0.0);

    const auto gain_of = [&](int b) {
        double gain = 0.0;
        grid.for_neighbors(bins.rep[static_cast<std::size_t>(b)], [&](int j) {
            if (covered[static_cast<std::size_t>(j)]) return;
            if (corner_distance(bins.rep[static_cast<std::size_t>(b)],
                                bins.rep[static_cast<std::size_t>(j)], dims) <= eps) {
                gain += bins.weight[static_cast<std::size_t>(j)];
            }
        });
        return gain;
    };

    // Lazy greedy: cached gains only shrink, so a fresh top entry is optimal.
    // Ties resolve to the smallest original sample index.
    struct Entry {
        double gain;
        int bin;
        int version;
        bool operator<(const Entry& o) const {
            if (gain != o.gain) return gain < o.gain;
            return bin > o.bin;
        }
    };
    std::priority_queue<Entry> heap;
    for (std::size_t b = 0; b < n; ++b) {
        heap.push({gain_of(static_cast<int>(b)), static_cast<int>(b), 0});
    }

    std::vector<int> selected;
    int version = 0;
    while (static_cast<int>(selected.size()) < K && remaining > 0.0 && !heap.empty()) {
        Entry top = heap.top();
        heap.pop();
        if (covered[static_cast<std::size_t>(top.bin)] && top.gain <= 0.0) continue;
        if (top.version != version) {
            top.gain = gain_of(top.bin);
            top.version = version;
            if (top.gain > 0.0) heap.push(top);
            continue;
        }
        if (top.gain <= 0.0) break;
        selected.push_back(top.bin);
        ++version;
        grid.for_neighbors(bins.rep[static_cast<std::size_t>(top.bin)], [&](int j) {
            if (covered[static_cast<std::size_t>(j)]) return;
            if (corner_distance(bins.rep[static_cast<std::size_t>(top.bin)],
                                bins.rep[static_cast<std::size_t>(j)], dims) <= eps) {
                covered[static_cast<std::size_t>(j)] = 1;
                remaining -= bins.weight[static_cast<std::size_t>(j)];
            }
        });
    }
    return selected;
}

double coverage_fraction(std::span<const MotionSegment> segments,
                         const std::vector<MotionSegment>& centers, double eps,
                         const BoxDims& dims) {
    if (segments.empty()) return 1.0;
    std::size_t covered = 0;
    for (const MotionSegment& s : segments) {
        for (const MotionSegment& c : centers) {
            const double ddx = s.dx - c.dx, ddy = s.dy - c.dy;
            if (ddx * ddx + ddy * ddy > eps * eps) continue;  // translation lower bound
            if (corner_distance(s, c, dims) <= eps) {
                ++covered;
                break;
            }
        }
    }
    return static_cast<double>(covered) / static_cast<double>(segments.size());
}

}  // namespace

Vocabulary build_vocabulary(std::span<const MotionSegment> segments, int K, const BoxDims& dims,
                            std::uint64_t seed, AgentCategory category, double dt,
                            const VocabularyBuildOptions& options) {
    if (segments.empty()) throw std::invalid_argument("build_vocabulary: no segments");
    if (K < 1) throw std::invalid_argument("build_vocabulary: K must be >= 1");
    if (!dims.valid()) throw std::invalid_argument("build_vocabulary: invalid ref dims");

    // Optional clustering subsample; candidates stay actual input samples.
    std::vector<MotionSegment> pool;
    if (options.max_cluster_samples > 0 &&
        segments.size() > static_cast<std::size_t>(options.max_cluster_samples)) {
        std::vector<std::size_t> idx(segments.size());
        std::iota(idx.begin(), idx.end(), 0);
        SplitRng rng = SplitRng::derive(seed, {fnv1a64("vocab-subsample")});
        for (int i = 0; i < options.max_cluster_samples; ++i) {
            const std::size_t j =
                static_cast<std::size_t>(i) +
                static_cast<std::size_t>(rng.next_u64() % (idx.size() - static_cast<std::size_t>(i)));
            std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
        }
        idx.resize(static_cast<std::size_t>(options.max_cluster_samples));
        std::sort(idx.begin(), idx.end());
        pool.reserve(idx.size());
        for (std::size_t i : idx) pool.push_back(segments[i]);
    } else {
        pool.assign(segments.begin(), segments.end());
    }

    const double heading_scale = 0.5 * std::hypot(dims.length, dims.width);

    // One disk centered on segments[0] with radius hi covers everything, so
    // the bisection upper bound is always feasible.
    double hi = 0.0;
    for (const MotionSegment& s : segments) {
        hi = std::max(hi, corner_distance(s, segments[0], dims));
    }
    hi = std::max(hi, options.eps_tolerance);
    double lo = 0.0;

    const auto solve_at = [&](double eps) {
        const BinSet bins = build_bins(pool, std::max(eps / 8.0, 1e-9), heading_scale);
        const std::vector<int> picked = greedy_cover(bins, K, eps, dims);
        std::vector<MotionSegment> centers;
        centers.reserve(picked.size());
        for (int b : picked) centers.push_back(bins.rep[static_cast<std::size_t>(b)]);
        return centers;
    };

    std::vector<MotionSegment> best_centers = solve_at(hi);
    while (hi - lo > options.eps_tolerance) {
        const double mid = 0.5 * (lo + hi);
        std::vector<MotionSegment> centers = solve_at(mid);
        if (coverage_fraction(segments, centers, mid, dims) >= options.coverage_target) {
            hi = mid;
            best_centers = std::move(centers);
        } else {
            lo = mid;
        }
    }

    Vocabulary vocab;
    vocab.category = category;
    vocab.disk_radius_eps = hi;
    vocab.ref_dims = dims;
    vocab.dt = dt;
    vocab.tokens.reserve(best_centers.size());
    for (std::size_t i = 0; i < best_centers.size(); ++i) {
        vocab.tokens.push_back({static_cast<int>(i), best_centers[i]});
    }
    return vocab;
}

double vocabulary_coverage(std::span<const MotionSegment> segments, const Vocabulary& vocab) {
    std::vector<MotionSegment> centers;
    centers.reserve(vocab.tokens.size());
    for (const MotionToken& t : vocab.tokens) centers.push_back(t.segment);
    return coverage_fraction(segments, centers, vocab.disk_radius_eps, vocab.ref_dims);
}

std::vector<int> encode(std::span<const MotionSegment> segments, const Vocabulary& vocab) {
    if (vocab.tokens.empty()) throw std::invalid_argument("encode: empty vocabulary");
    std::vector<int> ids;
    ids.reserve(segments.size());
    for (const MotionSegment& s : segments) {
        int best = 0;
        double best_d = kInfinity;
        for (const MotionToken& t : vocab.tokens) {
            const double d = corner_distance(s, t.segment, vocab.ref_dims);
            if (d < best_d) {
                best_d = d;
                best = t.id;
            }
        }
        ids.push_back(best);
    }
    return ids;
}

std::vector<int> encode(const AgentTrack& track, const Vocabulary& vocab) {
    const std::vector<MotionSegment> segments = segment_trajectory(track);
    return encode(segments, vocab);
}

std::vector<Pose2> decode(const Pose2& start, std::span<const int> ids, const Vocabulary& vocab) {
    std::vector<Pose2> poses;
    poses.reserve(ids.size());
    Pose2 current = start;
    for (int id : ids) {
        if (id < 0 || id >= vocab.size()) {
            throw std::out_of_range("decode: token id out of range");
        }
        current = apply_segment(current, vocab.tokens[static_cast<std::size_t>(id)].segment);
        poses.push_back(current);
    }
    return poses;
}

}  // namespace planlab
