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

#include "planlab/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace planlab {

using nlohmann::json;

namespace {

constexpr int kScenarioVersion = 1;
constexpr int kVocabVersion = 1;
constexpr int kManifestVersion = 1;
constexpr char kCheckpointMagic[8] = {'P', 'L', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

json pose_to_json(const Pose2& p) { return json::array({p.x, p.y, p.heading}); }

Pose2 pose_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("pose: expected [x, y, heading]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json points_to_json(const std::vector<Vec2>& pts) {
    json arr = json::array();
    for (const Vec2& p : pts) arr.push_back(json::array({p.x, p.y}));
    return arr;
}

std::vector<Vec2> points_from_json(const json& j) {
    std::vector<Vec2> pts;
    for (const auto& e : j) pts.push_back({e[0].get<double>(), e[1].get<double>()});
    return pts;
}

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("parse error in " + path.string() + ": " + e.what());
    }
    return j;
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void check_version(const json& j, int expected, const std::filesystem::path& path) {
    if (!j.contains("version") || !j["version"].is_number_integer()) {
        throw std::runtime_error("missing schema version in " + path.string());
    }
    const int v = j["version"].get<int>();
    if (v != expected) {
        throw std::runtime_error("unsupported schema version " + std::to_string(v) + " in " +
                                 path.string());
    }
}

}  // namespace

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
    json j;
    j["version"] = kScenarioVersion;
    j["id"] = scenario.id;
    j["dt"] = scenario.dt;
    j["horizon"] = scenario.horizon;
    json map;
    map["speed_limit"] = scenario.map.speed_limit;
    map["drivable_outer"] = points_to_json(scenario.map.drivable.outer.vertices());
    json holes = json::array();
    for (const Polygon& h : scenario.map.drivable.holes) holes.push_back(points_to_json(h.vertices()));
    map["drivable_holes"] = holes;
    map["route_centerline"] = points_to_json(scenario.map.route_centerline.vertices());
    json obstacles = json::array();
    for (const StaticObstacle& o : scenario.map.static_obstacles) {
        obstacles.push_back({{"pose", pose_to_json(o.pose)},
                             {"length", o.dims.length},
                             {"width", o.dims.width}});
    }
    map["static_obstacles"] = obstacles;
    j["map"] = std::move(map);
    json agents = json::array();
    for (const AgentTrack& a : scenario.agents) {
        json agent;
        agent["category"] = to_string(a.category);
        agent["length"] = a.dims.length;
        agent["width"] = a.dims.width;
        json hist = json::array();
        for (const Pose2& p : a.history) hist.push_back(pose_to_json(p));
        agent["history"] = std::move(hist);
        if (a.future_gt) {
            json fut = json::array();
            for (const Pose2& p : *a.future_gt) fut.push_back(pose_to_json(p));
            agent["future_gt"] = std::move(fut);
        }
        agents.push_back(std::move(agent));
    }
    j["agents"] = std::move(agents);
    write_json_file(j, path);
}

Scenario load_scenario(const std::filesystem::path& path) {
    const json j = load_json_file(path);
    check_version(j, kScenarioVersion, path);
    try {
        Scenario s;
        s.id = j.at("id").get<std::string>();
        s.dt = j.at("dt").get<double>();
        s.horizon = j.at("horizon").get<int>();
        const json& map = j.at("map");
        s.map.speed_limit = map.at("speed_limit").get<double>();
        s.map.drivable.outer = Polygon(points_from_json(map.at("drivable_outer")));
        for (const auto& h : map.at("drivable_holes")) {
            s.map.drivable.holes.emplace_back(points_from_json(h), /*expect_ccw=*/false);
        }
        s.map.route_centerline = Polyline(points_from_json(map.at("route_centerline")));
        for (const auto& o : map.at("static_obstacles")) {
            s.map.static_obstacles.push_back(
                {pose_from_json(o.at("pose")), {o.at("length").get<double>(), o.at("width").get<double>()}});
        }
        for (const auto& a : j.at("agents")) {
            AgentTrack track;
            track.category = agent_category_from_string(a.at("category").get<std::string>());
            track.dims = {a.at("length").get<double>(), a.at("width").get<double>()};
            for (const auto& p : a.at("history")) track.history.push_back(pose_from_json(p));
            if (a.contains("future_gt")) {
                std::vector<Pose2> fut;
                for (const auto& p : a.at("future_gt")) fut.push_back(pose_from_json(p));
                track.future_gt = std::move(fut);
            }
            s.agents.push_back(std::move(track));
        }
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed scenario " + path.string() + ": " + e.what());
    }
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
    json j;
    j["version"] = kVocabVersion;
    j["category"] = to_string(vocab.category);
    j["dt"] = vocab.dt;
    j["ref_dims"] = {{"length", vocab.ref_dims.length}, {"width", vocab.ref_dims.width}};
    j["eps"] = vocab.disk_radius_eps;
    json tokens = json::array();
    for (const MotionToken& t : vocab.tokens) {
        tokens.push_back({{"id", t.id},
                          {"dx", t.segment.dx},
                          {"dy", t.segment.dy},
                          {"dheading", t.segment.dheading}});
    }
    j["tokens"] = std::move(tokens);
    write_json_file(j, path);
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
    const json j = load_json_file(path);
    check_version(j, kVocabVersion, path);
    try {
        Vocabulary v;
        v.category = agent_category_from_string(j.at("category").get<std::string>());
        v.dt = j.at("dt").get<double>();
        v.ref_dims = {j.at("ref_dims").at("length").get<double>(),
                      j.at("ref_dims").at("width").get<double>()};
        v.disk_radius_eps = j.at("eps").get<double>();
        for (const auto& t : j.at("tokens")) {
            v.tokens.push_back({t.at("id").get<int>(),
                                {t.at("dx").get<double>(), t.at("dy").get<double>(),
                                 t.at("dheading").get<double>()}});
        }
        for (std::size_t i = 0; i < v.tokens.size(); ++i) {
            if (v.tokens[i].id != static_cast<int>(i)) {
                throw std::runtime_error("vocabulary token ids must be dense in " + path.string());
            }
        }
        return v;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed vocabulary " + path.string() + ": " + e.what());
    }
}

void save_vocabulary_set(const VocabularySet& vocabs, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const Vocabulary& v : vocabs.by_category) {
        if (v.tokens.empty()) continue;
        save_vocabulary(v, dir / (std::string("vocab_") + to_string(v.category) + ".json"));
    }
}

VocabularySet load_vocabulary_set(const std::filesystem::path& dir) {
    VocabularySet set;
    bool any = false;
    for (int c = 0; c < kNumAgentCategories; ++c) {
        const auto cat = static_cast<AgentCategory>(c);
        const auto path = dir / (std::string("vocab_") + to_string(cat) + ".json");
        if (std::filesystem::exists(path)) {
            set.for_category(cat) = load_vocabulary(path);
            any = true;
        }
    }
    if (!any) throw std::runtime_error("no vocabulary files found in " + dir.string());
    return set;
}

void save_checkpoint(const PolicyParams& params, std::uint64_t seed_provenance,
                     const std::filesystem::path& path) {
    json header;
    header["version"] = 1;
    header["seed_provenance"] = seed_provenance;
    header["param_count"] = params.flat.size();
    json cfg;
    cfg["num_layers"] = params.config.num_layers;
    cfg["model_dim"] = params.config.model_dim;
    cfg["num_heads"] = params.config.num_heads;
    cfg["vocab_size"] = params.config.vocab_size;
    cfg["max_agents"] = params.config.max_agents;
    cfg["max_steps"] = params.config.max_steps;
    cfg["neighbor_radius"] = params.config.neighbor_radius;
    cfg["map_radius"] = params.config.map_radius;
    cfg["map_point_spacing"] = params.config.map_point_spacing;
    header["model"] = std::move(cfg);
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint32_t header_len = static_cast<std::uint32_t>(header_str.size());
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    std::vector<float> f32(params.flat.size());
    for (std::size_t i = 0; i < params.flat.size(); ++i) f32[i] = static_cast<float>(params.flat[i]);
    out.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * sizeof(float)));
    if (!out) throw std::runtime_error("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[sizeof(kCheckpointMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path.string());
    }
    std::uint32_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), header_len);
    if (!in) throw std::runtime_error("truncated checkpoint header in " + path.string());
    const json header = json::parse(header_str);
    if (header.at("version").get<int>() != 1) {
        throw std::runtime_error("unsupported checkpoint version in " + path.string());
    }
    Checkpoint ckpt;
    ckpt.seed_provenance = header.at("seed_provenance").get<std::uint64_t>();
    const json& cfg = header.at("model");
    ckpt.params.config.num_layers = cfg.at("num_layers").get<int>();
    ckpt.params.config.model_dim = cfg.at("model_dim").get<int>();
    ckpt.params.config.num_heads = cfg.at("num_heads").get<int>();
    ckpt.params.config.vocab_size = cfg.at("vocab_size").get<int>();
    ckpt.params.config.max_agents = cfg.at("max_agents").get<int>();
    ckpt.params.config.max_steps = cfg.at("max_steps").get<int>();
    ckpt.params.config.neighbor_radius = cfg.at("neighbor_radius").get<double>();
    ckpt.params.config.map_radius = cfg.at("map_radius").get<double>();
    ckpt.params.config.map_point_spacing = cfg.at("map_point_spacing").get<double>();
    const std::size_t count = header.at("param_count").get<std::size_t>();
    std::vector<float> f32(count);
    in.read(reinterpret_cast<char*>(f32.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint payload in " + path.string());
    ckpt.params.flat.resize(count);
    for (std::size_t i = 0; i < count; ++i) ckpt.params.flat[i] = static_cast<double>(f32[i]);
    const ParamLayout layout(ckpt.params.config);
    if (layout.total_size() != count) {
        throw std::runtime_error("checkpoint parameter count does not match model config in " +
                                 path.string());
    }
    return ckpt;
}

namespace {

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t hash_from_hex(const std::string& s) {
    return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

std::uint64_t file_content_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (got < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    return h;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    json j;
    j["version"] = kManifestVersion;
    j["generator_config_hash"] = hash_hex(manifest.generator_config_hash);
    json splits;
    for (const auto& [name, files] : manifest.splits) splits[name] = files;
    j["splits"] = std::move(splits);
    json scenarios;
    for (const auto& [file, meta] : manifest.scenarios) {
        scenarios[file] = {{"template", meta.template_name},
                           {"has_injected_speeding", meta.has_injected_speeding},
                           {"hash", hash_hex(meta.content_hash)}};
    }
    j["scenarios"] = std::move(scenarios);
    write_json_file(j, path);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const json j = load_json_file(path);
    check_version(j, kManifestVersion, path);
    try {
        DatasetManifest m;
        m.generator_config_hash = hash_from_hex(j.at("generator_config_hash").get<std::string>());
        for (const auto& [name, files] : j.at("splits").items()) {
            m.splits[name] = files.get<std::vector<std::string>>();
        }
        for (const auto& [file, meta] : j.at("scenarios").items()) {
            m.scenarios[file] = {meta.at("template").get<std::string>(),
                                 meta.at("has_injected_speeding").get<bool>(),
                                 hash_from_hex(meta.at("hash").get<std::string>())};
        }
        return m;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed manifest " + path.string() + ": " + e.what());
    }
}

void verify_manifest(const DatasetManifest& manifest, const std::filesystem::path& root) {
    for (const auto& [file, meta] : manifest.scenarios) {
        const std::uint64_t actual = file_content_hash(root / file);
        if (actual != meta.content_hash) {
            throw std::runtime_error("manifest hash mismatch for " + file);
        }
    }
}

std::vector<Scenario> load_split(const DatasetManifest& manifest, const std::string& split,
                                 const std::filesystem::path& root) {
    const auto it = manifest.splits.find(split);
    if (it == manifest.splits.end()) {
        throw std::runtime_error("manifest has no split named " + split);
    }
    std::vector<Scenario> out;
    out.reserve(it->second.size());
    for (const std::string& file : it->second) out.push_back(load_scenario(root / file));
    return out;
}

void write_run_log(const RunLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const EpochLog& e : log.epochs) {
        json j;
        j["epoch"] = e.epoch;
        j["stage"] = to_string(e.stage);
        j["loss"] = e.loss;
        j["mean_reward"] = e.mean_reward;
        j["unsafe_group_ratio"] = e.unsafe_group_ratio;
        j["comfort_mean"] = e.comfort_mean;
        j["ttc_mean"] = e.ttc_mean;
        j["speed_mean"] = e.speed_mean;
        j["progress_mean"] = e.progress_mean;
        j["kl_mean"] = e.kl_mean;
        j["lr"] = e.lr;
        out << j.dump() << "\n";
    }
}

RunLog read_run_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    RunLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        EpochLog e;
        e.epoch = j.at("epoch").get<int>();
        e.stage = stage_from_string(j.at("stage").get<std::string>());
        e.loss = j.at("loss").get<double>();
        e.mean_reward = j.at("mean_reward").get<double>();
        e.unsafe_group_ratio = j.at("unsafe_group_ratio").get<double>();
        e.comfort_mean = j.at("comfort_mean").get<double>();
        e.ttc_mean = j.at("ttc_mean").get<double>();
        e.speed_mean = j.at("speed_mean").get<double>();
        e.progress_mean = j.at("progress_mean").get<double>();
        e.kl_mean = j.at("kl_mean").get<double>();
        e.lr = j.at("lr").get<double>();
        log.epochs.push_back(e);
    }
    return log;
}

void dump_rollouts(std::span<const RolloutGroup> groups, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const RolloutGroup& group : groups) {
        for (std::size_t g = 0; g < group.rollouts.size(); ++g) {
            const Rollout& r = group.rollouts[g];
            json j;
            j["scenario_id"] = group.scenario_id;
            j["group_seed"] = group.seed;
            j["rollout_index"] = g;
            j["tokens"] = r.tokens;
            json poses = json::array();
            for (const auto& agent_poses : r.poses) {
                json row = json::array();
                for (const Pose2& p : agent_poses) row.push_back(pose_to_json(p));
                poses.push_back(std::move(row));
            }
            j["poses"] = std::move(poses);
            j["ego_log_probs"] = r.ego_log_probs;
            j["reward_total"] = r.rewards.total;
            j["safety"] = {{"drivable", r.rewards.bits.drivable},
                           {"dynamic", r.rewards.bits.dynamic_collision},
                           {"static", r.rewards.bits.static_collision}};
            j["comfort"] = r.rewards.comfort;
            j["ttc"] = r.rewards.ttc;
            j["speed"] = r.rewards.speed;
            j["progress"] = r.rewards.progress;
            out << j.dump() << "\n";
        }
    }
}

}  // namespace planlab
