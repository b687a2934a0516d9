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

#include "planlab/scenario_gen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "planlab/concurrency.hpp"
#include "planlab/random.hpp"

namespace planlab {

void GeneratorConfig::validate() const {
    if (num_scenarios < 0) throw std::invalid_argument("GeneratorConfig: num_scenarios < 0");
    if (templates.empty()) throw std::invalid_argument("GeneratorConfig: no templates");
    if (speeding_injection_rate < 0.0 || speeding_injection_rate > 1.0 || obstacle_rate < 0.0 ||
        obstacle_rate > 1.0) {
        throw std::invalid_argument("GeneratorConfig: rates must be in [0,1]");
    }
    if (min_other_agents < 0 || max_other_agents < min_other_agents) {
        throw std::invalid_argument("GeneratorConfig: bad agent count range");
    }
    if (min_speed_limit <= 0.0 || max_speed_limit < min_speed_limit) {
        throw std::invalid_argument("GeneratorConfig: bad speed limit range");
    }
    if (dt <= 0.0 || horizon < 1 || history_steps < 1) {
        throw std::invalid_argument("GeneratorConfig: bad time grid");
    }
}

namespace {

constexpr double kSimDt = 0.05;
constexpr BoxDims kCarDims{4.6, 2.0};
constexpr double kLaneHalf = 1.75;
constexpr double kRoadHalf = 3.5;

struct ScriptedAgent {
    Polyline route;
    double start_s{0.0};
    double start_speed{0.0};
    double target_speed{0.0};
    BoxDims dims{kCarDims};
    bool follows_leader{false};   // gap-keeps against agents sharing its route tag
    int route_tag{0};             // agents with equal tags share a lane
};

struct SimState {
    Pose2 pose;
    double speed{0.0};
};

struct RoadLayout {
    DrivableArea drivable;
    Polyline route;  // ego route (the scenario reference route)
    std::vector<StaticObstacle> obstacles;
    std::vector<ScriptedAgent> agents;  // ego first
    double speed_limit{0.0};
};

Pose2 pose_on(const Polyline& route, double s) {
    const Vec2 p = route.point_at(s);
    const Vec2 t = route.tangent_at(s);
    return {p.x, p.y, std::atan2(t.y, t.x)};
}

/// Gap-keeping longitudinal target plus pure-pursuit lateral tracking,
/// integrated as a unicycle. Caps keep compliant experts comfortable.
SimState step_agent(const SimState& st, const ScriptedAgent& agent, double gap_to_lead,
                    double lead_speed, double accel_limit) {
    const CenterlineProjection proj = project_to_centerline(st.pose.position(), agent.route);
    double v_des = agent.target_speed;
    if (agent.follows_leader && gap_to_lead < 80.0) {
        constexpr double kStandoff = 7.0;
        const double v_safe = std::sqrt(std::max(
            0.0, lead_speed * lead_speed + 2.0 * accel_limit * std::max(0.0, gap_to_lead - kStandoff)));
        v_des = std::min(v_des, v_safe);
    }
    const double accel = std::clamp((v_des - st.speed) / 1.0, -accel_limit, accel_limit);

    const double lookahead = std::max(5.0, 0.9 * st.speed);
    const double target_s = std::min(proj.s + lookahead, agent.route.total_length());
    const Vec2 target = agent.route.point_at(target_s);
    const Vec2 local = st.pose.to_local(target);
    const double alpha = std::atan2(local.y, std::max(local.x, 0.5));
    double yaw_rate = 2.0 * st.speed * std::sin(alpha) / lookahead;
    const double yaw_cap = std::min(0.6, st.speed > 0.5 ? 2.8 / st.speed : 0.6);
    yaw_rate = std::clamp(yaw_rate, -yaw_cap, yaw_cap);

    SimState next;
    next.speed = std::max(0.0, st.speed + accel * kSimDt);
    const double heading = st.pose.heading + yaw_rate * kSimDt;
    next.pose.x = st.pose.x + next.speed * std::cos(heading) * kSimDt;
    next.pose.y = st.pose.y + next.speed * std::sin(heading) * kSimDt;
    next.pose.heading = wrap_angle(heading);
    return next;
}

std::vector<std::vector<Pose2>> simulate(const RoadLayout& layout, int record_steps, double dt,
                                         double accel_limit) {
    const std::size_t n = layout.agents.size();
    std::vector<SimState> states(n);
    for (std::size_t i = 0; i < n; ++i) {
        states[i].pose = pose_on(layout.agents[i].route, layout.agents[i].start_s);
        states[i].speed = layout.agents[i].start_speed;
    }
    std::vector<std::vector<Pose2>> recorded(n);
    for (std::size_t i = 0; i < n; ++i) recorded[i].push_back(states[i].pose);

    const int substeps = static_cast<int>(std::round(dt / kSimDt));
    for (int step = 0; step < record_steps; ++step) {
        for (int sub = 0; sub < substeps; ++sub) {
            std::vector<SimState> next(n);
            for (std::size_t i = 0; i < n; ++i) {
                double gap = kInfinity, lead_speed = 0.0;
                if (layout.agents[i].follows_leader) {
                    const double s_i =
                        project_to_centerline(states[i].pose.position(), layout.agents[i].route).s;
                    for (std::size_t j = 0; j < n; ++j) {
                        if (j == i || layout.agents[j].route_tag != layout.agents[i].route_tag) continue;
                        const double s_j =
                            project_to_centerline(states[j].pose.position(), layout.agents[i].route).s;
                        const double d = s_j - s_i -
                                         0.5 * (layout.agents[i].dims.length + layout.agents[j].dims.length);
                        if (s_j > s_i && d < gap) {
                            gap = d;
                            lead_speed = states[j].speed;
                        }
                    }
                }
                next[i] = step_agent(states[i], layout.agents[i], gap, lead_speed, accel_limit);
            }
            states = std::move(next);
        }
        for (std::size_t i = 0; i < n; ++i) recorded[i].push_back(states[i].pose);
    }
    return recorded;
}

Polygon rect_ring(double x0, double x1, double y0, double y1) {
    return Polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

RoadLayout build_straight(SplitRng& rng, const GeneratorConfig& cfg, int n_others,
                          bool injected) {
    RoadLayout layout;
    layout.speed_limit = rng.uniform(cfg.min_speed_limit, cfg.max_speed_limit);
    layout.drivable.outer = rect_ring(-10.0, 200.0, -kRoadHalf, kRoadHalf);
    layout.route = Polyline({{-10.0, -kLaneHalf}, {200.0, -kLaneHalf}});
    const Polyline opp_route({{200.0, kLaneHalf}, {-10.0, kLaneHalf}});

    const double target = injected ? cfg.speeding_factor * layout.speed_limit
                                   : cfg.expert_speed_margin * layout.speed_limit;
    ScriptedAgent ego;
    ego.route = layout.route;
    ego.start_s = rng.uniform(12.0, 28.0);
    ego.target_speed = target;
    ego.start_speed = target * rng.uniform(0.9, 1.0);
    ego.follows_leader = true;
    ego.route_tag = 0;
    layout.agents.push_back(ego);

    for (int i = 0; i < n_others; ++i) {
        ScriptedAgent other;
        if (i == 0) {  // lead vehicle
            other.route = layout.route;
            other.start_s = ego.start_s + rng.uniform(25.0, 60.0);
            other.target_speed = rng.uniform(0.45, 0.85) * layout.speed_limit;
            other.start_speed = other.target_speed;
            other.follows_leader = true;
            other.route_tag = 0;
        } else {  // oncoming traffic
            other.route = opp_route;
            other.start_s = rng.uniform(40.0, 130.0);
            other.target_speed = rng.uniform(0.6, 0.95) * layout.speed_limit;
            other.start_speed = other.target_speed;
            other.follows_leader = i > 1;
            other.route_tag = 1;
        }
        layout.agents.push_back(other);
    }

    if (rng.bernoulli(cfg.obstacle_rate)) {
        const double x = rng.uniform(60.0, 160.0);
        layout.obstacles.push_back({{x, -3.15, 0.0}, {0.8, 0.5}});
    }
    return layout;
}

RoadLayout build_curve(SplitRng& rng, const GeneratorConfig& cfg, int n_others, bool injected) {
    RoadLayout layout;
    const double radius = rng.uniform(38.0, 60.0);
    const double ego_radius = radius - kLaneHalf;
    // Lateral-acceleration-safe limit on the inner lane.
    layout.speed_limit =
        std::min(rng.uniform(cfg.min_speed_limit, cfg.max_speed_limit), std::sqrt(2.4 * ego_radius));
    const double span = 150.0 / radius;

    const auto arc_points = [&](double r, double a0, double a1, int steps) {
        std::vector<Vec2> pts;
        pts.reserve(static_cast<std::size_t>(steps) + 1);
        for (int i = 0; i <= steps; ++i) {
            const double a = a0 + (a1 - a0) * static_cast<double>(i) / steps;
            pts.push_back({r * std::cos(a), r * std::sin(a)});
        }
        return pts;
    };
    // CCW travel; drivable is the annular sector between the two lane edges.
    const int arc_steps = 48;
    std::vector<Vec2> ring = arc_points(radius + kRoadHalf, -0.08, span + 0.08, arc_steps);
    const std::vector<Vec2> inner = arc_points(radius - kRoadHalf, -0.08, span + 0.08, arc_steps);
    ring.insert(ring.end(), inner.rbegin(), inner.rend());
    layout.drivable.outer = Polygon(std::move(ring));

    layout.route = Polyline(arc_points(ego_radius, -0.05, span + 0.05, arc_steps));
    std::vector<Vec2> opp = arc_points(radius + kLaneHalf, -0.05, span + 0.05, arc_steps);
    std::reverse(opp.begin(), opp.end());
    const Polyline opp_route(std::move(opp));

    double target = injected ? cfg.speeding_factor * layout.speed_limit
                             : cfg.expert_speed_margin * layout.speed_limit;
    if (injected) {
        target = std::min(target, std::sqrt(3.2 * ego_radius));
        target = std::max(target, 1.1 * layout.speed_limit);
    }
    ScriptedAgent ego;
    ego.route = layout.route;
    ego.start_s = rng.uniform(6.0, 18.0);
    ego.target_speed = target;
    ego.start_speed = target * rng.uniform(0.9, 1.0);
    ego.follows_leader = true;
    ego.route_tag = 0;
    layout.agents.push_back(ego);

    for (int i = 0; i < n_others; ++i) {
        ScriptedAgent other;
        if (i == 0) {
            other.route = layout.route;
            other.start_s = ego.start_s + rng.uniform(25.0, 50.0);
            other.target_speed = rng.uniform(0.45, 0.85) * layout.speed_limit;
            other.start_speed = other.target_speed;
            other.follows_leader = true;
            other.route_tag = 0;
        } else {
            other.route = opp_route;
            other.start_s = rng.uniform(30.0, 100.0);
            other.target_speed = rng.uniform(0.6, 0.9) * layout.speed_limit;
            other.start_speed = other.target_speed;
            other.follows_leader = i > 1;
            other.route_tag = 1;
        }
        layout.agents.push_back(other);
    }
    return layout;
}

RoadLayout build_intersection(SplitRng& rng, const GeneratorConfig& cfg, int n_others,
                              bool injected) {
    RoadLayout layout;
    layout.speed_limit = rng.uniform(cfg.min_speed_limit, cfg.max_speed_limit);
    const double ext = 110.0;
    // Plus-shaped drivable region (CCW).
    layout.drivable.outer = Polygon({{-ext, -kRoadHalf},
                                     {-kRoadHalf, -kRoadHalf},
                                     {-kRoadHalf, -ext},
                                     {kRoadHalf, -ext},
                                     {kRoadHalf, -kRoadHalf},
                                     {ext, -kRoadHalf},
                                     {ext, kRoadHalf},
                                     {kRoadHalf, kRoadHalf},
                                     {kRoadHalf, ext},
                                     {-kRoadHalf, ext},
                                     {-kRoadHalf, kRoadHalf},
                                     {-ext, kRoadHalf}});
    layout.route = Polyline({{-ext, -kLaneHalf}, {ext, -kLaneHalf}});
    const Polyline opp_route({{ext, kLaneHalf}, {-ext, kLaneHalf}});
    const Polyline cross_route({{kLaneHalf, -ext}, {kLaneHalf, ext}});

    const double target = injected ? cfg.speeding_factor * layout.speed_limit
                                   : cfg.expert_speed_margin * layout.speed_limit;
    ScriptedAgent ego;
    ego.route = layout.route;
    const double ego_x0 = rng.uniform(15.0, 40.0);  // distance from route start
    ego.start_s = ego_x0;
    ego.target_speed = target;
    ego.start_speed = target * rng.uniform(0.9, 1.0);
    ego.follows_leader = true;
    ego.route_tag = 0;
    layout.agents.push_back(ego);

    for (int i = 0; i < n_others; ++i) {
        ScriptedAgent other;
        if (i == 0) {
            // Crossing vehicle, timed to clear the conflict zone away from the ego.
            other.route = cross_route;
            other.target_speed = rng.uniform(0.6, 0.9) * layout.speed_limit;
            other.start_speed = other.target_speed;
            other.follows_leader = false;
            other.route_tag = 2;
            const double t_ego = (ext - kLaneHalf - ego.start_s) / std::max(ego.start_speed, 1.0);
            const double gap_s = rng.uniform(3.0, 5.5) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
            const double t_cross = std::max(1.0, t_ego + gap_s);
            other.start_s = std::max(5.0, (ext - kLaneHalf) - other.start_speed * t_cross);
        } else if (i == 1) {
            other.route = layout.route;
            other.start_s = ego.start_s + rng.uniform(25.0, 60.0);
            other.target_speed = rng.uniform(0.5, 0.85) * layout.speed_limit;
            other.start_speed = other.target_speed;
            other.follows_leader = true;
            other.route_tag = 0;
        } else {
            other.route = opp_route;
            other.start_s = rng.uniform(40.0, 120.0);
            other.target_speed = rng.uniform(0.6, 0.9) * layout.speed_limit;
            other.start_speed = other.target_speed;
            other.follows_leader = false;
            other.route_tag = 1;
        }
        layout.agents.push_back(other);
    }

    if (rng.bernoulli(cfg.obstacle_rate)) {
        const double x = rng.uniform(20.0, 80.0);
        layout.obstacles.push_back({{x, -3.15, 0.0}, {0.8, 0.5}});
    }
    return layout;
}

bool validate_expert(const Scenario& scenario, bool injected, const RewardConfig& cfg) {
    const int steps = scenario.horizon;
    EvalTrack ego;
    ego.dims = scenario.ego().dims;
    ego.poses.push_back(scenario.ego().current_pose());
    ego.poses.insert(ego.poses.end(), scenario.ego().future_gt->begin(),
                     scenario.ego().future_gt->end());
    std::vector<EvalTrack> others;
    for (std::size_t n = 1; n < scenario.agents.size(); ++n) {
        EvalTrack other;
        other.dims = scenario.agents[n].dims;
        other.poses.push_back(scenario.agents[n].current_pose());
        other.poses.insert(other.poses.end(), scenario.agents[n].future_gt->begin(),
                           scenario.agents[n].future_gt->end());
        others.push_back(std::move(other));
    }
    const RewardBreakdown rb =
        evaluate_rewards(ego, scenario.map, others, ego.poses, scenario.dt, cfg);
    if (!rb.all_safe()) return false;
    if (rb.comfort < 1.0) return false;
    if (injected && rb.speed >= 1.0) return false;
    if (!injected && rb.speed < 1.0) return false;
    // Other agents must stay on the road too (their futures feed pretraining).
    for (std::size_t n = 1; n < scenario.agents.size(); ++n) {
        for (int t = 0; t < steps; ++t) {
            const Pose2& p = (*scenario.agents[n].future_gt)[static_cast<std::size_t>(t)];
            if (!box_in_drivable(p, scenario.agents[n].dims, scenario.map.drivable)) return false;
        }
    }
    return true;
}

}  // namespace

GeneratedScenario generate_scenario(const GeneratorConfig& cfg, std::uint64_t index,
                                    const std::string& id, const RewardConfig& validation_cfg) {
    cfg.validate();
    constexpr int kMaxAttempts = 40;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        SplitRng rng = SplitRng::derive(cfg.seed, {fnv1a64("scenario"), index,
                                                   static_cast<std::uint64_t>(attempt)});
        const std::string& template_name =
            cfg.templates[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(cfg.templates.size()) - 1))];
        const bool injected = rng.bernoulli(cfg.speeding_injection_rate);
        const int n_others = rng.uniform_int(cfg.min_other_agents, cfg.max_other_agents);

        RoadLayout layout;
        if (template_name == "straight") {
            layout = build_straight(rng, cfg, n_others, injected);
        } else if (template_name == "curve") {
            layout = build_curve(rng, cfg, n_others, injected);
        } else if (template_name == "intersection") {
            layout = build_intersection(rng, cfg, n_others, injected);
        } else {
            throw std::invalid_argument("generate_scenario: unknown template " + template_name);
        }

        const int record_steps = cfg.history_steps + cfg.horizon;
        const auto trajectories = simulate(layout, record_steps, cfg.dt, cfg.expert_accel_limit);

        Scenario scenario;
        scenario.id = id;
        scenario.dt = cfg.dt;
        scenario.horizon = cfg.horizon;
        scenario.map.drivable = layout.drivable;
        scenario.map.route_centerline = layout.route;
        scenario.map.speed_limit = layout.speed_limit;
        scenario.map.static_obstacles = layout.obstacles;
        for (std::size_t i = 0; i < layout.agents.size(); ++i) {
            AgentTrack track;
            track.category = AgentCategory::kVehicle;
            track.dims = layout.agents[i].dims;
            const auto& poses = trajectories[i];
            track.history.assign(poses.begin(), poses.begin() + cfg.history_steps + 1);
            track.future_gt = std::vector<Pose2>(poses.begin() + cfg.history_steps + 1, poses.end());
            scenario.agents.push_back(std::move(track));
        }
        scenario.validate();
        if (validate_expert(scenario, injected, validation_cfg)) {
            return {std::move(scenario), template_name, injected};
        }
    }
    throw std::runtime_error("generate_scenario: no valid draw after max attempts for " + id);
}

std::vector<GeneratedScenario> generate_dataset(const GeneratorConfig& cfg,
                                                const RewardConfig& validation_cfg,
                                                int num_threads) {
    cfg.validate();
    std::vector<GeneratedScenario> out(static_cast<std::size_t>(cfg.num_scenarios));
    parallel_for(cfg.num_scenarios, num_threads, [&](int i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "scn_%06d", i);
        out[static_cast<std::size_t>(i)] =
            generate_scenario(cfg, static_cast<std::uint64_t>(i), buf, validation_cfg);
    });
    return out;
}

}  // namespace planlab
