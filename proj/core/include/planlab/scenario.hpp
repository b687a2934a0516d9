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

#include <optional>
#include <string>
#include <vector>

#include "planlab/geometry.hpp"

namespace planlab {

enum class AgentCategory : int { kVehicle = 0, kPedestrian = 1, kCyclist = 2 };
inline constexpr int kNumAgentCategories = 3;

const char* to_string(AgentCategory c);
AgentCategory agent_category_from_string(const std::string& s);

struct StaticObstacle {
    Pose2 pose;
    BoxDims dims;
};

struct SceneMap {
    DrivableArea drivable;
    Polyline route_centerline;
    double speed_limit{0.0};  // m/s
    std::vector<StaticObstacle> static_obstacles;
};

struct AgentTrack {
    AgentCategory category{AgentCategory::kVehicle};
    BoxDims dims;
    std::vector<Pose2> history;  // uniformly spaced at scenario dt; last entry is the current pose
    std::optional<std::vector<Pose2>> future_gt;

    const Pose2& current_pose() const { return history.back(); }
};

/// One planning problem: map, agents (ego at index 0), token interval and horizon.
struct Scenario {
    std::string id;
    SceneMap map;
    std::vector<AgentTrack> agents;
    double dt{0.5};
    int horizon{16};

    const AgentTrack& ego() const { return agents.front(); }

    /// Throws std::invalid_argument when any structural invariant fails.
    void validate() const;
};

}  // namespace planlab
