// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/config.hpp"

#include <fstream>

#include "flowsteer/errors.hpp"

namespace flowsteer {

std::string to_string(TaskKind task) {
    switch (task) {
        case TaskKind::Colorization: return "colorization";
        case TaskKind::Deblur: return "deblur";
        case TaskKind::SuperRes: return "superres";
        case TaskKind::Denoise: return "denoise";
    }
    return "unknown";
}

TaskKind task_from_string(const std::string& name) {
    if (name == "colorization") return TaskKind::Colorization;
    if (name == "deblur") return TaskKind::Deblur;
    if (name == "superres") return TaskKind::SuperRes;
    if (name == "denoise") return TaskKind::Denoise;
    throw ConfigError("unknown task '" + name + "' (colorization, deblur, superres, denoise)");
}

Json default_config() {
    return Json{
        {"task", "colorization"},
        {"operator", {{"blur_sigma", 1.0}, {"kernel_size", 0}, {"wiener_lambda", 0.1}, {"noise_sigma", 0.2}}},
        {"dataset", {{"kind", "shapes"}, {"count", 20}, {"size", 16}, {"seed", 1234}}},
        {"flow",
         {{"kind", "net"}, {"checkpoint", "flow.fst"}, {"hidden", {256, 256}}, {"time_features", 16}, {"init_seed", 7}, {"skip", true}}},
        {"train",
         {{"steps", 20000},
          {"batch_size", 64},
          {"learning_rate", 1e-3},
          {"optimizer", "momentum"},
          {"momentum", 0.9},
          {"seed", 0},
          {"monitor_every", 10},
          {"monitor_batch", 256}}},
        {"steps", 30},
        {"schedule", "general"},
        {"codec", "identity"},
        {"decode_noise", 0.0},
        {"eta_eff", 0.0},
        {"projection", "direct"},
        {"eps", kDefaultDenoiseEps},
        {"method", "flowsteer"},
        {"seeds", {0}},
        {"ddpm_steps", 100},
        {"output_dir", "out"},
    };
}

Json preset_config(const std::string& name) {
    if (name == "desk") return Json::object();
    if (name == "paperscale") {
        // Full-size forward-model parameters; 61x61 blur
        // needs images of at least 61 pixels.
        return Json{
            {"operator", {{"blur_sigma", 3.0}, {"kernel_size", 61}, {"wiener_lambda", 0.1}, {"noise_sigma", 0.2}}},
            {"dataset", {{"size", 64}}},
            {"steps", 30},
            {"ddpm_steps", 100},
        };
    }
    throw ConfigError("unknown config preset '" + name + "'");
}

std::vector<std::string> config_preset_names() { return {"desk", "paperscale"}; }

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    Json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = Json::object();
        start = dot + 1;
    }
}

namespace {

template <typename T>
T get(const Json& j, const char* key, const char* where) {
    if (!j.contains(key)) throw ConfigError(std::string("missing key ") + where + "." + key);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("bad value for ") + where + "." + key + ": " + j.at(key).dump());
    }
}

std::size_t get_count(const Json& j, const char* key, const char* where) {
    const Json& v = j.contains(key) ? j.at(key) : Json();
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError(std::string("expected a nonnegative integer for ") + where + "." + key);
    }
    return v.get<std::size_t>();
}

std::size_t fraction_step(const Json& obj, const char* key, std::size_t n) {
    const double f = get<double>(obj, key, "schedule");
    if (!(f >= 0.0)) throw ConfigError(std::string("schedule.") + key + " must be nonnegative");
    return fraction_to_step(f, n);
}

}  // namespace

LambdaSchedule schedule_from_json(const Json& entry, std::size_t n, TaskKind task) {
    try {
        if (entry.is_string()) {
            const std::string name = entry.get<std::string>();
            return preset_schedule(name == "task" ? to_string(task) : name, n);
        }
        if (entry.is_array()) {
            std::vector<double> values;
            for (const auto& v : entry) {
                if (!v.is_number()) throw ConfigError("schedule arrays must hold numbers");
                values.push_back(v.get<double>());
            }
            if (values.size() != n) {
                throw ConfigError("schedule has " + std::to_string(values.size()) + " values but steps = " +
                                  std::to_string(n));
            }
            return LambdaSchedule(std::move(values));
        }
        if (entry.is_object()) {
            const std::string kind = get<std::string>(entry, "kind", "schedule");
            if (kind == "rect") {
                const std::size_t a = std::max<std::size_t>(1, fraction_step(entry, "start", n));
                const std::size_t b = std::min(n, fraction_step(entry, "stop", n));
                return rect_schedule(n, a, b, entry.value("h", 1.0));
            }
            if (kind == "two_step") {
                return two_step_schedule(n, static_cast<long>(fraction_step(entry, "start", n)),
                                         static_cast<long>(fraction_step(entry, "step", n)),
                                         static_cast<long>(fraction_step(entry, "end", n)), entry.value("h1", 1.0),
                                         entry.value("h2", 1.0), entry.value("final_pad", std::size_t{1}));
            }
            throw ConfigError("unknown schedule kind '" + kind + "'");
        }
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("invalid schedule: ") + e.what());
    }
    throw ConfigError("schedule must be a preset name, an array or an object");
}

LambdaSchedule ExperimentConfig::lambda_schedule() const { return schedule_from_json(schedule, steps, task); }

std::string ExperimentConfig::schedule_label() const {
    if (schedule.is_string()) {
        const std::string name = schedule.get<std::string>();
        return name == "task" ? to_string(task) : name;
    }
    if (schedule.is_object()) return schedule.value("kind", std::string("custom"));
    return "custom";
}

ExperimentConfig parse_config(const Json& merged) {
    ExperimentConfig c;
    c.raw = merged;
    try {
        c.task = task_from_string(get<std::string>(merged, "task", "config"));

        const Json& op = merged.at("operator");
        c.op.blur_sigma = get<double>(op, "blur_sigma", "operator");
        c.op.kernel_size = get_count(op, "kernel_size", "operator");
        c.op.wiener_lambda = get<double>(op, "wiener_lambda", "operator");
        c.op.noise_sigma = get<double>(op, "noise_sigma", "operator");
        if (!(c.op.blur_sigma > 0.0)) throw ConfigError("operator.blur_sigma must be positive");
        if (!(c.op.wiener_lambda > 0.0)) throw ConfigError("operator.wiener_lambda must be positive");
        if (!(c.op.noise_sigma >= 0.0)) throw ConfigError("operator.noise_sigma must be nonnegative");

        const Json& ds = merged.at("dataset");
        c.data.kind = get<std::string>(ds, "kind", "dataset");
        c.data.count = get_count(ds, "count", "dataset");
        c.data.size = get_count(ds, "size", "dataset");
        c.data.seed = get<std::uint64_t>(ds, "seed", "dataset");
        if (c.data.kind != "shapes" && c.data.kind != "gmm2d") throw ConfigError("dataset.kind must be shapes or gmm2d");
        if (c.data.count == 0) throw ConfigError("dataset.count must be positive");

        const Json& fl = merged.at("flow");
        c.flow.kind = get<std::string>(fl, "kind", "flow");
        c.flow.checkpoint = get<std::string>(fl, "checkpoint", "flow");
        c.flow.hidden = get<std::vector<std::size_t>>(fl, "hidden", "flow");
        c.flow.time_features = get_count(fl, "time_features", "flow");
        c.flow.init_seed = get<std::uint64_t>(fl, "init_seed", "flow");
        c.flow.skip = get<bool>(fl, "skip", "flow");
        if (c.flow.kind != "net" && c.flow.kind != "oracle") throw ConfigError("flow.kind must be net or oracle");

        const Json& tr = merged.at("train");
        c.train.steps = get_count(tr, "steps", "train");
        c.train.batch_size = get_count(tr, "batch_size", "train");
        c.train.learning_rate = get<double>(tr, "learning_rate", "train");
        const std::string opt = get<std::string>(tr, "optimizer", "train");
        if (opt == "sgd") {
            c.train.optimizer = OptimizerKind::Sgd;
        } else if (opt == "momentum") {
            c.train.optimizer = OptimizerKind::Momentum;
        } else {
            throw ConfigError("train.optimizer must be sgd or momentum");
        }
        c.train.momentum = get<double>(tr, "momentum", "train");
        c.train.seed = get<std::uint64_t>(tr, "seed", "train");
        c.train.monitor_every = get_count(tr, "monitor_every", "train");
        c.train.monitor_batch = get_count(tr, "monitor_batch", "train");

        c.steps = get_count(merged, "steps", "config");
        if (c.steps == 0) throw ConfigError("steps must be positive");
        c.schedule = merged.at("schedule");
        c.codec = codec_kind_from_string(get<std::string>(merged, "codec", "config"));
        c.decode_noise = get<double>(merged, "decode_noise", "config");
        c.eta_eff = get<double>(merged, "eta_eff", "config");
        c.projection = projection_mode_from_string(get<std::string>(merged, "projection", "config"));
        c.eps = get<double>(merged, "eps", "config");
        c.method = get<std::string>(merged, "method", "config");
        if (c.method != "flowsteer" && c.method != "ideal" && c.method != "pinv" && c.method != "unconditioned") {
            throw ConfigError("method must be flowsteer, ideal, pinv or unconditioned");
        }
        c.seeds = get<std::vector<std::uint64_t>>(merged, "seeds", "config");
        if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
        c.ddpm_steps = get_count(merged, "ddpm_steps", "config");
        c.output_dir = get<std::string>(merged, "output_dir", "config");
        if (!(c.eta_eff >= 0.0)) throw ConfigError("eta_eff must be nonnegative");
        if (!(c.decode_noise >= 0.0)) throw ConfigError("decode_noise must be nonnegative");
        if (!(c.eps > 0.0)) throw ConfigError("eps must be positive");
        c.train.validate();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    // Expanding the schedule here reports length mismatches up front.
    c.lambda_schedule();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& presets,
                             const std::vector<std::string>& overrides) {
    Json merged = default_config();
    for (const auto& p : presets) merged.merge_patch(preset_config(p));
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw ConfigError("cannot open config " + file.string());
        Json loaded = Json::parse(in, nullptr, false, true);
        if (loaded.is_discarded() || !loaded.is_object()) throw ConfigError("config " + file.string() + " is not a JSON object");
        if (loaded.contains("preset")) {
            merged.merge_patch(preset_config(loaded.at("preset").get<std::string>()));
            loaded.erase("preset");
        }
        merged.merge_patch(loaded);
    }
    for (const auto& o : overrides) apply_override(merged, o);
    return parse_config(merged);
}

}  // namespace flowsteer
