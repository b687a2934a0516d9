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

// Hand-built scenarios and vocabularies shared by the policy/rollout/trainer
// tests; independent of the scenario generator.

#pragma once

#include <cmath>
#include <vector>

#include "planlab/policy.hpp"
#include "planlab/scenario.hpp"
#include "planlab/tokenizer.hpp"

namespace planlab::testing {

/// Grid vocabulary: dx in {0, 0.5, ..., 7.5} x dheading in {-0.1, 0, 0.1}.
inline VocabularySet grid_vocab() {
    VocabularySet set;
    Vocabulary v;
    v.category = AgentCategory::kVehicle;
    v.ref_dims = {4.6, 2.0};
    v.dt = 0.5;
    v.disk_radius_eps = 0.3;
    int id = 0;
    for (int i = 0; i < 16; ++i) {
        for (int j = -1; j <= 1; ++j) {
            v.tokens.push_back({id++, {0.5 * i, 0.0, 0.1 * j}});
        }
    }
    set.for_category(AgentCategory::kVehicle) = v;
    return set;
}

/// Straight two-lane road; ego eastbound on y = -1.75 at `speed`, optional
/// lead vehicle ahead and oncoming vehicle on y = +1.75.
inline Scenario straight_scenario(int n_other_agents, double speed = 8.0, int horizon = 6,
                                  int history_steps = 2) {
    Scenario s;
    s.id = "fixture_straight";
    s.dt = 0.5;
    s.horizon = horizon;
    s.map.speed_limit = 10.0;
    s.map.drivable.outer = Polygon({{-40, -3.5}, {260, -3.5}, {260, 3.5}, {-40, 3.5}});
    s.map.route_centerline = Polyline({{-40, -1.75}, {260, -1.75}});

    const auto make_track = [&](double x0, double y, double v, double heading) {
        AgentTrack t;
        t.category = AgentCategory::kVehicle;
        t.dims = {4.6, 2.0};
        const double dir = std::cos(heading);
        for (int i = -history_steps; i <= 0; ++i) {
            t.history.push_back({x0 + dir * v * 0.5 * i, y, heading});
        }
        std::vector<Pose2> fut;
        for (int i = 1; i <= horizon; ++i) fut.push_back({x0 + dir * v * 0.5 * i, y, heading});
        t.future_gt = fut;
        return t;
    };

    s.agents.push_back(make_track(0.0, -1.75, speed, 0.0));
    if (n_other_agents >= 1) s.agents.push_back(make_track(25.0, -1.75, 0.6 * speed, 0.0));
    if (n_other_agents >= 2) s.agents.push_back(make_track(80.0, 1.75, 0.8 * speed, kPi));
    for (int i = 3; i <= n_other_agents; ++i) {
        s.agents.push_back(make_track(25.0 + 20.0 * i, -1.75, 0.5 * speed, 0.0));
    }
    s.validate();
    return s;
}

inline ModelConfig tiny_config(int vocab_size = 48) {
    ModelConfig cfg;
    cfg.num_layers = 2;
    cfg.model_dim = 16;
    cfg.num_heads = 2;
    cfg.vocab_size = vocab_size;
    cfg.max_agents = 6;
    cfg.max_steps = 16;
    cfg.neighbor_radius = 60.0;
    cfg.map_radius = 40.0;
    cfg.map_point_spacing = 10.0;
    return cfg;
}

/// Applies a rigid transform to every spatial quantity of a scenario.
inline Scenario transform_scenario(const Scenario& in, double angle, Vec2 shift) {
    const double c = std::cos(angle), sn = std::sin(angle);
    const auto xf_pt = [&](Vec2 p) { return Vec2{c * p.x - sn * p.y + shift.x, sn * p.x + c * p.y + shift.y}; };
    const auto xf_pose = [&](const Pose2& p) {
        const Vec2 q = xf_pt(p.position());
        return Pose2{q.x, q.y, wrap_angle(p.heading + angle)};
    };
    Scenario out = in;
    std::vector<Vec2> ring;
    for (Vec2 p : in.map.drivable.outer.vertices()) ring.push_back(xf_pt(p));
    out.map.drivable.outer = Polygon(ring);
    out.map.drivable.holes.clear();
    for (const Polygon& hole : in.map.drivable.holes) {
        std::vector<Vec2> hr;
        for (Vec2 p : hole.vertices()) hr.push_back(xf_pt(p));
        out.map.drivable.holes.emplace_back(hr, /*expect_ccw=*/false);
    }
    std::vector<Vec2> line;
    for (Vec2 p : in.map.route_centerline.vertices()) line.push_back(xf_pt(p));
    out.map.route_centerline = Polyline(line);
    for (std::size_t i = 0; i < out.map.static_obstacles.size(); ++i) {
        out.map.static_obstacles[i].pose = xf_pose(in.map.static_obstacles[i].pose);
    }
    for (std::size_t a = 0; a < out.agents.size(); ++a) {
        for (std::size_t i = 0; i < out.agents[a].history.size(); ++i) {
            out.agents[a].history[i] = xf_pose(in.agents[a].history[i]);
        }
        if (out.agents[a].future_gt) {
            for (std::size_t i = 0; i < out.agents[a].future_gt->size(); ++i) {
                (*out.agents[a].future_gt)[i] = xf_pose((*in.agents[a].future_gt)[i]);
            }
        }
    }
    return out;
}

}  // namespace planlab::testing
