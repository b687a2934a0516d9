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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "planlab/policy.hpp"
#include "planlab/rollout.hpp"
#include "planlab/scenario.hpp"
#include "planlab/tokenizer.hpp"
#include "planlab/trainer.hpp"

namespace planlab {

// All on-disk formats are versioned; loaders reject unknown versions and
// never return partially parsed objects.

void save_scenario(const Scenario& scenario, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

/// {version, category, dt, ref_dims, eps, tokens: [{id, dx, dy, dheading}]}
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocabulary(const std::filesystem::path& path);

/// Writes vocab_<category>.json per non-empty category into `dir`.
void save_vocabulary_set(const VocabularySet& vocabs, const std::filesystem::path& dir);
VocabularySet load_vocabulary_set(const std::filesystem::path& dir);

struct Checkpoint {
    PolicyParams params;
    std::uint64_t seed_provenance{0};
};

/// Binary container: magic + JSON header (model config, seed) + little-endian
/// float32 parameter vector.
void save_checkpoint(const PolicyParams& params, std::uint64_t seed_provenance,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct ScenarioMeta {
    std::string template_name;
    bool has_injected_speeding{false};
    std::uint64_t content_hash{0};
};

struct DatasetManifest {
    int version{1};
    std::uint64_t generator_config_hash{0};
    std::map<std::string, std::vector<std::string>> splits;  // split -> relative files
    std::map<std::string, ScenarioMeta> scenarios;           // relative file -> meta
};

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Recomputes per-file hashes under the manifest's directory; throws on drift.
void verify_manifest(const DatasetManifest& manifest, const std::filesystem::path& root);

std::uint64_t file_content_hash(const std::filesystem::path& path);

std::vector<Scenario> load_split(const DatasetManifest& manifest, const std::string& split,
                                 const std::filesystem::path& root);

void write_run_log(const RunLog& log, const std::filesystem::path& path);
RunLog read_run_log(const std::filesystem::path& path);

/// JSON-lines, one rollout per line: tokens, poses, rewards, ego log-probs.
void dump_rollouts(std::span<const RolloutGroup> groups, const std::filesystem::path& path);

}  // namespace planlab
