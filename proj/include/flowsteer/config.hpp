// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowsteer/codec.hpp"
#include "flowsteer/flow.hpp"
#include "flowsteer/samplers.hpp"
#include "flowsteer/schedules.hpp"
#include "flowsteer/velocity_net.hpp"

namespace flowsteer {

using Json = nlohmann::json;

enum class TaskKind { Colorization, Deblur, SuperRes, Denoise };

std::string to_string(TaskKind task);
TaskKind task_from_string(const std::string& name);

struct OperatorSpec {
    double blur_sigma = 1.0;
    /// 0 selects default_kernel_size(blur_sigma).
    std::size_t kernel_size = 0;
    double wiener_lambda = 0.1;
    double noise_sigma = 0.2;
};

struct DatasetSpec {
    std::string kind = "shapes";  // "shapes" or "gmm2d"
    std::size_t count = 20;
    std::size_t size = 16;
    std::uint64_t seed = 1234;
};

struct FlowSpec {
    std::string kind = "net";  // "net" (checkpoint) or "oracle" (gmm2d only)
    std::filesystem::path checkpoint = "flow.fst";
    std::vector<std::size_t> hidden = {256, 256};
    std::size_t time_features = 16;
    std::uint64_t init_seed = 7;
    bool skip = true;  // gated linear skip path, see VelocityNet
};

/// Typed view of an experiment's JSON configuration. Relative paths are
/// relative to the working directory.
struct ExperimentConfig {
    Json raw;

    TaskKind task = TaskKind::Colorization;
    OperatorSpec op;
    DatasetSpec data;
    FlowSpec flow;
    TrainConfig train;

    std::size_t steps = 30;
    Json schedule = "general";
    CodecKind codec = CodecKind::Identity;
    double decode_noise = 0.0;
    double eta_eff = 0.0;
    ProjectionMode projection = ProjectionMode::Direct;
    double eps = kDefaultDenoiseEps;
    std::string method = "flowsteer";  // flowsteer | ideal | pinv | unconditioned
    std::vector<std::uint64_t> seeds = {0};
    std::size_t ddpm_steps = 100;
    std::filesystem::path output_dir = "out";

    TimeGrid grid() const { return TimeGrid::uniform(steps); }
    /// Expands the schedule entry for this config's N and task.
    LambdaSchedule lambda_schedule() const;
    std::string schedule_label() const;
};

/// Built-in defaults (the "desk" preset).
Json default_config();
/// Named partial configs merged over the defaults: "desk", "paperscale".
Json preset_config(const std::string& name);
std::vector<std::string> config_preset_names();

/// Sets a dotted key ("train.steps=500"). The value is parsed as JSON when
/// possible and kept as a string otherwise.
void apply_override(Json& config, const std::string& assignment);

/// Schedule entry: a preset name ("general", "task", a Table-2 row, "none",
/// "always"), an explicit array of N values, or an object
/// {"kind": "rect", "start": f, "stop": f, "h": h} /
/// {"kind": "two_step", "start": f, "step": f, "end": f, "h1": a, "h2": b, "final_pad": p}
/// with fractions of N.
LambdaSchedule schedule_from_json(const Json& entry, std::size_t n, TaskKind task);

ExperimentConfig parse_config(const Json& merged);

/// Defaults, then presets in order, then the file (if any), then overrides.
ExperimentConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& presets,
                             const std::vector<std::string>& overrides);

}  // namespace flowsteer
