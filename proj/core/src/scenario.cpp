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

#include "planlab/scenario.hpp"

#include <stdexcept>

namespace planlab {

const char* to_string(AgentCategory c) {
    switch (c) {
        case AgentCategory::kVehicle: return "vehicle";
        case AgentCategory::kPedestrian: return "pedestrian";
        case AgentCategory::kCyclist: return "cyclist";
    }
    return "unknown";
}

AgentCategory agent_category_from_string(const std::string& s) {
    if (s == "vehicle") return AgentCategory::kVehicle;
    if (s == "pedestrian") return AgentCategory::kPedestrian;
    if (s == "cyclist") return AgentCategory::kCyclist;
    throw std::invalid_argument("unknown agent category: " + s);
}

void Scenario::validate() const {
    if (agents.empty()) throw std::invalid_argument("Scenario: agents must be non-empty");
    if (agents.front().category != AgentCategory::kVehicle) {
        throw std::invalid_argument("Scenario: ego (agent 0) must be a vehicle");
    }
    if (horizon < 1) throw std::invalid_argument("Scenario: horizon must be >= 1");
    if (dt <= 0.0) throw std::invalid_argument("Scenario: dt must be > 0");
    if (map.speed_limit <= 0.0) throw std::invalid_argument("Scenario: speed_limit must be > 0");
    if (map.route_centerline.vertices().size() < 2) {
        throw std::invalid_argument("Scenario: route centerline missing");
    }
    for (const auto& agent : agents) {
        if (agent.history.empty()) throw std::invalid_argument("Scenario: agent history empty");
        if (!agent.dims.valid()) throw std::invalid_argument("Scenario: agent dims must be > 0");
        for (const Pose2& p : agent.history) {
            if (p.heading <= -kPi || p.heading > kPi) {
                throw std::invalid_argument("Scenario: heading not normalized into (-pi, pi]");
            }
        }
    }
    for (const auto& obs : map.static_obstacles) {
        if (!obs.dims.valid()) throw std::invalid_argument("Scenario: obstacle dims must be > 0");
    }
}

}  // namespace planlab
