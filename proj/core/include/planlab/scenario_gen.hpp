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
#include <string>
#include <vector>

#include "planlab/reward.hpp"
#include "planlab/scenario.hpp"

namespace planlab {

/// Synthetic corpus generator: scripted experts on template roads, with a
/// configurable fraction of deliberately speeding expert demonstrations.
struct GeneratorConfig {
    std::uint64_t seed{0};
    int num_scenarios{100};
    std::vector<std::string> templates{"straight", "curve", "intersection"};
    int min_other_agents{0};
    int max_other_agents{3};
    double min_speed_limit{8.0};   // m/s
    double max_speed_limit{15.0};  // m/s
    double speeding_injection_rate{0.12};
    double obstacle_rate{0.35};
    double dt{0.5};
    int horizon{16};
    int history_steps{4};

    // Expert controller
    double expert_accel_limit{2.0};     // m/s^2
    double expert_speed_margin{0.97};   // compliant target as a fraction of the limit
    double speeding_factor{1.3};

    void validate() const;
};

struct GeneratedScenario {
    Scenario scenario;
    std::string template_name;
    bool has_injected_speeding{false};
};

/// Deterministic per (cfg.seed, index). Generated experts always pass the
/// drivable/collision gates (validated against `validation_cfg`, with bounded
/// resampling) and violate the speed gate exactly when speeding was injected.
GeneratedScenario generate_scenario(const GeneratorConfig& cfg, std::uint64_t index,
                                    const std::string& id, const RewardConfig& validation_cfg);

std::vector<GeneratedScenario> generate_dataset(const GeneratorConfig& cfg,
                                                const RewardConfig& validation_cfg,
                                                int num_threads = 0);

}  // namespace planlab
