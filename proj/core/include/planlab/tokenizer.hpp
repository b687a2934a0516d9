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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "planlab/scenario.hpp"

namespace planlab {

/// One token interval of motion expressed in the frame of the starting pose:
/// dx forward, dy left, dheading CCW.
struct MotionSegment {
    double dx{0.0};
    double dy{0.0};
    double dheading{0.0};
};

struct MotionToken {
    int id{0};
    MotionSegment segment;
};

/// Discrete motion alphabet for one agent category.
struct Vocabulary {
    AgentCategory category{AgentCategory::kVehicle};
    std::vector<MotionToken> tokens;
    double disk_radius_eps{0.0};
    BoxDims ref_dims;
    double dt{0.5};

    int size() const { return static_cast<int>(tokens.size()); }
};

/// Per-category vocabularies; categories without data stay empty.
struct VocabularySet {
    std::vector<Vocabulary> by_category{std::vector<Vocabulary>(kNumAgentCategories)};

    const Vocabulary& for_category(AgentCategory c) const {
        return by_category[static_cast<int>(c)];
    }
    Vocabulary& for_category(AgentCategory c) { return by_category[static_cast<int>(c)]; }
};

/// Expresses pose[i+1] in the frame of pose[i] for every consecutive pair.
/// Fewer than 2 poses yields an empty list.
std::vector<MotionSegment> segment_trajectory(std::span<const Pose2> poses);
std::vector<MotionSegment> segment_trajectory(const AgentTrack& track);

/// Applies one segment in the local frame of `base`.
Pose2 apply_segment(const Pose2& base, const MotionSegment& seg);

/// Mean L2 distance between the 4 box corners at the two segment endpoint
/// poses, both segments anchored at the identity start pose.
double corner_distance(const MotionSegment& a, const MotionSegment& b, const BoxDims& dims);

struct VocabularyBuildOptions {
    double coverage_target{0.99};
    double eps_tolerance{0.01};  // bisection stops within 1 cm
    /// Clustering subsample cap; <= 0 means use every sample. The final
    /// coverage report is always measured on the full input.
    int max_cluster_samples{0};
};

/// Greedy K-disk cover: repeatedly pick the sample whose eps-disk covers the
/// most uncovered samples, stopping at K tokens or full coverage; eps is the
/// smallest radius (within eps_tolerance) reaching the coverage target.
/// Deterministic for fixed (segments, K, dims, seed).
Vocabulary build_vocabulary(std::span<const MotionSegment> segments, int K, const BoxDims& dims,
                            std::uint64_t seed, AgentCategory category, double dt,
                            const VocabularyBuildOptions& options = {});

/// Fraction of segments within vocab eps of some token.
double vocabulary_coverage(std::span<const MotionSegment> segments, const Vocabulary& vocab);

/// Nearest token per segment by corner distance; ties break to the smaller id.
std::vector<int> encode(std::span<const MotionSegment> segments, const Vocabulary& vocab);
/// Encodes track.future_gt (requires it); throws if absent or vocab empty.
std::vector<int> encode(const AgentTrack& track, const Vocabulary& vocab);

/// Chains token segments in successive local frames. Output excludes `start`.
std::vector<Pose2> decode(const Pose2& start, std::span<const int> ids, const Vocabulary& vocab);

}  // namespace planlab
