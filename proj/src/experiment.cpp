// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "flowsteer/dataset.hpp"
#include "flowsteer/errors.hpp"
#include "flowsteer/io.hpp"
#include "flowsteer/kernels.hpp"

namespace flowsteer {

namespace fs = std::filesystem;

DegradationOperator make_task_operator(TaskKind task, const OperatorSpec& spec, const Dims& image_dims) {
    if (image_dims.size() != 3) throw ShapeError("task operators act on {C, H, W} images");
    const std::size_t c = image_dims[0];
    const std::size_t h = image_dims[1];
    const std::size_t w = image_dims[2];
    switch (task) {
        case TaskKind::Colorization:
            if (c != 3) throw ShapeError("colorization needs 3-channel images");
            return DegradationOperator::colorization(h, w);
        case TaskKind::Deblur: {
            const std::size_t size = spec.kernel_size > 0 ? spec.kernel_size : default_kernel_size(spec.blur_sigma);
            return DegradationOperator::blur(c, h, w, make_gaussian_kernel(size, spec.blur_sigma), spec.wiener_lambda);
        }
        case TaskKind::SuperRes: return DegradationOperator::super_res4(c, h, w);
        case TaskKind::Denoise: return DegradationOperator::denoise(image_dims, spec.noise_sigma);
    }
    throw ConfigError("unknown task");
}

Tensor synthesize_measurement(const DegradationOperator& op, const Tensor& x, Rng& rng) {
    Tensor y = op.apply(x);
    if (op.kind() == OperatorKind::Denoise && op.noise_sigma() > 0.0) {
        for (auto& v : y.values()) v += op.noise_sigma() * rng.normal();
    }
    return y;
}

std::uint64_t measurement_seed(std::uint64_t dataset_seed, std::size_t image) {
    return derive_seed(derive_seed(dataset_seed, 1), image);
}

std::uint64_t restoration_seed(std::uint64_t run_seed, std::size_t image) {
    return derive_seed(derive_seed(run_seed, 2), image);
}

Fixture build_fixture(TaskKind task, const OperatorSpec& spec, const DatasetSpec& data) {
    if (data.kind != "shapes") throw ConfigError("restoration needs dataset.kind = shapes");
    Fixture fx;
    fx.task = task;
    fx.clean = gen_shape_dataset(data.count, data.size, data.seed);
    fx.op = make_task_operator(task, spec, fx.clean.front().dims());
    fx.measurements.reserve(fx.clean.size());
    for (std::size_t i = 0; i < fx.clean.size(); ++i) {
        Rng rng(measurement_seed(data.seed, i));
        fx.measurements.push_back(synthesize_measurement(fx.op, fx.clean[i], rng));
    }
    return fx;
}

RunOptions run_options(const ExperimentConfig& cfg) {
    RunOptions o;
    o.method = cfg.method;
    o.steps = cfg.steps;
    o.schedule = cfg.lambda_schedule();
    o.codec = cfg.codec;
    o.decode_noise = cfg.decode_noise;
    o.eta_eff = cfg.eta_eff;
    o.projection = cfg.projection;
    o.eps = cfg.eps;
    o.label = cfg.schedule_label();
    return o;
}

RunOutput restore_item(const VelocityField& v, const Fixture& fx, std::size_t index, std::uint64_t seed,
                       const RunOptions& opts) {
    const RestorationTask task{fx.op, fx.measurements.at(index), fx.clean.at(index), seed};
    Rng rng(restoration_seed(seed, index));
    const TimeGrid grid = TimeGrid::uniform(opts.steps);
    const LatentCodec codec(opts.codec, fx.op.input_dims(), opts.decode_noise);
    RunOutput out;
    if (opts.method == "flowsteer") {
        FlowSteerConfig cfg;
        cfg.grid = grid;
        cfg.schedule = opts.schedule;
        cfg.codec = codec;
        cfg.eta_eff = opts.eta_eff;
        cfg.projection = opts.projection;
        cfg.eps = opts.eps;
        cfg.trace_all_steps = opts.trace;
        RestorationResult r = restore_flowsteer(v, task, cfg, rng);
        out.image = std::move(r.image);
        out.trace = std::move(r.trace);
    } else if (opts.method == "ideal") {
        if (opts.codec != CodecKind::Identity) throw ConfigError("the ideal-flow sampler works in pixel space only");
        out.image = restore_ideal_flow(v, task, grid, opts.eps, rng);
    } else if (opts.method == "pinv") {
        out.image = fx.op.apply_pinv(task.y);
    } else if (opts.method == "unconditioned") {
        out.image = generate_unconditioned(v, grid, codec, rng);
    } else {
        throw ConfigError("unknown method '" + opts.method + "'");
    }
    out.report = evaluate_restoration(out.image, *task.truth, fx.op, task.y, fx.task == TaskKind::Colorization);
    out.report.task = to_string(fx.task);
    out.report.schedule = opts.method == "flowsteer" ? opts.label : opts.method;
    out.report.seed = seed;
    out.report.image = static_cast<long>(index);
    return out;
}

CellSummary evaluate_cell(const VelocityField& v, const Fixture& fx, const RunOptions& opts,
                          const std::vector<std::uint64_t>& seeds) {
    const std::size_t n_img = fx.clean.size();
    std::vector<MetricReport> reports(n_img * seeds.size());
    kernels::parallel_for(reports.size(), [&](std::size_t k) {
        reports[k] = restore_item(v, fx, k / seeds.size(), seeds[k % seeds.size()], opts).report;
    });
    CellSummary s;
    for (const auto& r : reports) {
        s.mean_psnr += r.psnr;
        s.mean_ssim += r.ssim;
        s.mean_residual_l2 += r.residual_l2;
    }
    s.runs = reports.size();
    const double n = static_cast<double>(s.runs);
    s.mean_psnr /= n;
    s.mean_ssim /= n;
    s.mean_residual_l2 /= n;
    return s;
}

std::unique_ptr<VelocityField> load_flow(const ExperimentConfig& cfg) {
    if (cfg.flow.kind == "oracle") {
        if (cfg.data.kind != "gmm2d") throw ConfigError("the analytic oracle is only available for gmm2d data");
        return std::make_unique<GmmVelocityField>(two_mode_gmm());
    }
    return std::make_unique<VelocityNet>(load_checkpoint(cfg.flow.checkpoint));
}

TrainOutcome train_flow(const ExperimentConfig& cfg) {
    CleanSampler sampler;
    std::size_t dim = 0;
    if (cfg.data.kind == "gmm2d") {
        dim = 2;
        const GmmTarget g = two_mode_gmm();
        sampler = [g](Rng& rng, std::span<double> out) {
            const std::size_t k = rng.uniform() < g.weights[0] ? 0 : 1;
            for (std::size_t j = 0; j < 2; ++j) out[j] = g.means[k][j] + g.stdevs[k] * rng.normal();
        };
    } else {
        const std::size_t size = cfg.data.size;
        const LatentCodec codec(cfg.codec, Dims{3, size, size});
        dim = 3 * size * size;
        sampler = [codec, size](Rng& rng, std::span<double> out) {
            const Tensor z = codec.encode(render_shape_image(rng, size));
            std::copy(z.values().begin(), z.values().end(), out.begin());
        };
    }
    VelocityNet net = VelocityNet::init(dim, cfg.flow.hidden, cfg.flow.time_features, cfg.flow.init_seed, cfg.flow.skip);
    LossCurve curve = train(net, sampler, cfg.train);
    return {std::move(net), std::move(curve)};
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string indexed(const char* prefix, std::size_t i, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%03zu%s", prefix, i, suffix);
    return buf;
}

std::string item_name(const char* prefix, std::size_t image, std::uint64_t seed, const char* suffix) {
    return indexed(prefix, image, "") + "_s" + std::to_string(seed) + suffix;
}

void cmd_gen_data(const ExperimentConfig& cfg) {
    const fs::path out = cfg.output_dir;
    if (cfg.data.kind == "gmm2d") {
        const GmmTarget g = two_mode_gmm();
        std::vector<Tensor> pts;
        for (std::size_t i = 0; i < cfg.data.count; ++i) {
            Rng rng(derive_seed(cfg.data.seed, i));
            const std::size_t k = rng.uniform() < g.weights[0] ? 0 : 1;
            Tensor p(Dims{2});
            for (std::size_t j = 0; j < 2; ++j) p[j] = g.means[k][j] + g.stdevs[k] * rng.normal();
            pts.push_back(std::move(p));
        }
        write_fst_records(out / "clean.fst", pts);
        return;
    }
    const auto images = gen_shape_dataset(cfg.data.count, cfg.data.size, cfg.data.seed);
    write_fst_records(out / "clean.fst", images);
    std::ostringstream csv;
    csv << "image,mean_r,mean_g,mean_b\n";
    for (std::size_t i = 0; i < images.size(); ++i) {
        write_ppm(out / "clean" / indexed("img_", i, ".ppm"), images[i]);
        const std::size_t plane = cfg.data.size * cfg.data.size;
        csv << i;
        for (std::size_t c = 0; c < 3; ++c) {
            double m = 0.0;
            for (std::size_t j = 0; j < plane; ++j) m += images[i][c * plane + j];
            csv << ',' << format_number(m / static_cast<double>(plane));
        }
        csv << '\n';
    }
    write_text(out / "dataset.csv", csv.str());
}

void cmd_train_flow(const ExperimentConfig& cfg) {
    const TrainOutcome t = train_flow(cfg);
    save_checkpoint(t.net, cfg.flow.checkpoint);
    std::ostringstream batch;
    batch << "step,batch_loss\n";
    for (std::size_t i = 0; i < t.curve.batch.size(); ++i) batch << i << ',' << format_number(t.curve.batch[i]) << '\n';
    write_text(cfg.output_dir / "train_loss.csv", batch.str());
    std::ostringstream mon;
    mon << "step,monitor_loss\n";
    for (std::size_t i = 0; i < t.curve.monitor.size(); ++i) {
        mon << std::min(i * t.curve.monitor_every, cfg.train.steps) << ',' << format_number(t.curve.monitor[i]) << '\n';
    }
    write_text(cfg.output_dir / "monitor_loss.csv", mon.str());
}

void cmd_degrade(const ExperimentConfig& cfg) {
    const Fixture fx = build_fixture(cfg.task, cfg.op, cfg.data);
    const fs::path out = cfg.output_dir;
    write_fst_records(out / "measurements.fst", fx.measurements);
    std::ostringstream csv;
    csv << "image,operator,noise_mean,noise_std\n";
    for (std::size_t i = 0; i < fx.clean.size(); ++i) {
        write_ppm(out / "measurements" / indexed("y_", i, ".ppm"), fx.measurements[i]);
        const Tensor noise = fx.measurements[i] - fx.op.apply(fx.clean[i]);
        const double m = mean(noise);
        double var = 0.0;
        for (double v : noise.values()) var += (v - m) * (v - m);
        var /= static_cast<double>(noise.size());
        csv << i << ',' << to_string(fx.op.kind()) << ',' << format_number(m) << ',' << format_number(std::sqrt(var))
            << '\n';
    }
    write_text(out / "degrade.csv", csv.str());
}

std::unique_ptr<VelocityField> flow_for(const ExperimentConfig& cfg, const std::string& method) {
    return method == "pinv" ? nullptr : load_flow(cfg);
}

// A field that is never evaluated; stands in when the method needs none.
class NoField final : public VelocityField {
public:
    Tensor velocity(const Tensor&, double) const override { throw ConfigError("this method has no velocity field"); }
};

void cmd_restore(const ExperimentConfig& cfg) {
    const Fixture fx = build_fixture(cfg.task, cfg.op, cfg.data);
    RunOptions opts = run_options(cfg);
    opts.trace = true;
    const auto field = flow_for(cfg, opts.method);
    const NoField none;
    const VelocityField& v = field ? *field : static_cast<const VelocityField&>(none);

    const std::size_t n_seeds = cfg.seeds.size();
    std::vector<RunOutput> runs(fx.clean.size() * n_seeds);
    kernels::parallel_for(runs.size(), [&](std::size_t k) {
        runs[k] = restore_item(v, fx, k / n_seeds, cfg.seeds[k % n_seeds], opts);
    });

    const fs::path out = cfg.output_dir;
    std::vector<Tensor> images;
    std::ostringstream metrics;
    metrics << MetricReport::csv_header() << '\n';
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const std::size_t i = k / n_seeds;
        const std::uint64_t s = cfg.seeds[k % n_seeds];
        write_ppm(out / "restored" / item_name("img_", i, s, ".ppm"), runs[k].image);
        write_text(out / "traces" / item_name("trace_", i, s, ".csv"), runs[k].trace.csv());
        metrics << runs[k].report.csv_row() << '\n';
        images.push_back(runs[k].image);
    }
    write_fst_records(out / "restored.fst", images);
    write_text(out / "metrics.csv", metrics.str());
}

void cmd_invert(const ExperimentConfig& cfg) {
    const auto field = load_flow(cfg);
    const TimeGrid grid = cfg.grid();
    std::vector<Tensor> clean;
    std::unique_ptr<LatentCodec> codec;
    if (cfg.data.kind == "gmm2d") {
        const fs::path src = cfg.output_dir / "clean.fst";
        clean = read_fst_records(src);
    } else {
        clean = gen_shape_dataset(cfg.data.count, cfg.data.size, cfg.data.seed);
        codec = std::make_unique<LatentCodec>(cfg.codec, clean.front().dims());
    }
    std::vector<Tensor> noise(clean.size());
    std::vector<double> rms(clean.size());
    kernels::parallel_for(clean.size(), [&](std::size_t i) {
        const Tensor z0 = codec ? codec->encode(clean[i]) : clean[i];
        noise[i] = euler_invert(*field, z0, grid).back();
        const Tensor back = euler_generate(*field, noise[i], grid).back();
        rms[i] = std::sqrt(mse(codec ? codec->decode(back) : back, clean[i]));
    });
    std::ostringstream csv;
    csv << "image,roundtrip_rms,noise_std\n";
    for (std::size_t i = 0; i < clean.size(); ++i) {
        csv << i << ',' << format_number(rms[i]) << ','
            << format_number(norm_l2(noise[i]) / std::sqrt(static_cast<double>(noise[i].size()))) << '\n';
    }
    write_fst_records(cfg.output_dir / "noise.fst", noise);
    write_text(cfg.output_dir / "invert.csv", csv.str());
}

void cmd_evaluate(const ExperimentConfig& cfg) {
    const Fixture fx = build_fixture(cfg.task, cfg.op, cfg.data);
    const fs::path input = cfg.raw.contains("evaluate_input")
                               ? fs::path(cfg.raw.at("evaluate_input").get<std::string>())
                               : cfg.output_dir / "restored.fst";
    const std::vector<Tensor> restored = read_fst_records(input);
    const std::size_t n_seeds = cfg.seeds.size();
    if (restored.size() != fx.clean.size() * n_seeds) {
        throw ConfigError(input.string() + " holds " + std::to_string(restored.size()) + " images, expected " +
                          std::to_string(fx.clean.size() * n_seeds));
    }
    std::ostringstream csv;
    csv << MetricReport::csv_header() << '\n';
    for (std::size_t k = 0; k < restored.size(); ++k) {
        const std::size_t i = k / n_seeds;
        MetricReport r = evaluate_restoration(restored[k], fx.clean[i], fx.op, fx.measurements[i],
                                              fx.task == TaskKind::Colorization);
        r.task = to_string(fx.task);
        r.schedule = cfg.method == "flowsteer" ? cfg.schedule_label() : cfg.method;
        r.seed = cfg.seeds[k % n_seeds];
        r.image = static_cast<long>(i);
        csv << r.csv_row() << '\n';
    }
    write_text(cfg.output_dir / "evaluation.csv", csv.str());
}

void cmd_ablate_schedule(const ExperimentConfig& cfg) {
    const Fixture fx = build_fixture(cfg.task, cfg.op, cfg.data);
    const auto field = load_flow(cfg);
    RunOptions base = run_options(cfg);
    base.method = "flowsteer";
    const std::size_t n = cfg.steps;

    struct Cell {
        std::string name;
        std::size_t start, stop;
        LambdaSchedule schedule;
    };
    std::vector<Cell> cells;
    for (int k = 0; k < 10; ++k) {
        const double f = 0.1 * k;
        const std::size_t a = std::max<std::size_t>(1, fraction_to_step(f, n));
        const std::size_t b = std::max(a, std::min(n, fraction_to_step(f + 0.4, n)));
        cells.push_back({"window_" + format_number(f), a, b, rect_schedule(n, a, b, 1.0)});
    }
    cells.push_back({"always", 1, n, LambdaSchedule::constant(n, 1.0)});
    cells.push_back({"none", 0, 0, LambdaSchedule::zeros(n)});

    std::ostringstream csv;
    csv << "task,cell,i_start,i_stop,mean_psnr,mean_ssim,mean_residual_l2,runs\n";
    for (const auto& c : cells) {
        RunOptions o = base;
        o.schedule = c.schedule;
        o.label = c.name;
        const CellSummary s = evaluate_cell(*field, fx, o, cfg.seeds);
        csv << to_string(cfg.task) << ',' << c.name << ',' << c.start << ',' << c.stop << ','
            << format_number(s.mean_psnr) << ',' << format_number(s.mean_ssim) << ','
            << format_number(s.mean_residual_l2) << ',' << s.runs << '\n';
    }
    write_text(cfg.output_dir / "ablate_schedule.csv", csv.str());
}

void cmd_ablate_projection(const ExperimentConfig& cfg) {
    const Fixture fx = build_fixture(cfg.task, cfg.op, cfg.data);
    const auto field = load_flow(cfg);
    const RunOptions base = run_options(cfg);
    std::vector<std::pair<std::string, RunOptions>> cells;
    RunOptions direct = base;
    direct.method = "flowsteer";
    direct.projection = ProjectionMode::Direct;
    cells.emplace_back("direct", direct);
    RunOptions via = direct;
    via.projection = ProjectionMode::ViaX0;
    cells.emplace_back("via_x0", via);
    RunOptions ideal = base;
    ideal.method = "ideal";
    cells.emplace_back("ideal_every_step", ideal);
    RunOptions pinv = base;
    pinv.method = "pinv";
    cells.emplace_back("pinv", pinv);

    std::ostringstream csv;
    csv << "task,cell,schedule,mean_psnr,mean_ssim,mean_residual_l2,runs\n";
    for (const auto& [name, o] : cells) {
        const CellSummary s = evaluate_cell(*field, fx, o, cfg.seeds);
        csv << to_string(cfg.task) << ',' << name << ',' << base.label << ',' << format_number(s.mean_psnr) << ','
            << format_number(s.mean_ssim) << ',' << format_number(s.mean_residual_l2) << ',' << s.runs << '\n';
    }
    write_text(cfg.output_dir / "ablate_projection.csv", csv.str());
}

}  // namespace

std::vector<std::string> subcommand_names() {
    return {"gen-data", "train-flow", "degrade", "restore", "invert", "evaluate", "ablate-schedule",
            "ablate-projection"};
}

void run_subcommand(const std::string& name, const ExperimentConfig& cfg) {
    if (name == "gen-data") {
        cmd_gen_data(cfg);
    } else if (name == "train-flow") {
        cmd_train_flow(cfg);
    } else if (name == "degrade") {
        cmd_degrade(cfg);
    } else if (name == "restore") {
        cmd_restore(cfg);
    } else if (name == "invert") {
        cmd_invert(cfg);
    } else if (name == "evaluate") {
        cmd_evaluate(cfg);
    } else if (name == "ablate-schedule") {
        cmd_ablate_schedule(cfg);
    } else if (name == "ablate-projection") {
        cmd_ablate_projection(cfg);
    } else {
        throw ConfigError("unknown subcommand '" + name + "'");
    }
    write_text(cfg.output_dir / (name + ".config.json"), cfg.raw.dump(2) + "\n");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericalError*>(&e)) return 2;
    return 1;
}

}  // namespace flowsteer
