// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance --train-only --net PATH   train the pinned net (reused when PATH
//                                        already holds a net from the same config)
//   acceptance --loss-trend --net PATH   smoothed training-loss check
//   acceptance --net PATH                evaluate every criterion

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowsteer/dataset.hpp"
#include "flowsteer/errors.hpp"
#include "flowsteer/experiment.hpp"
#include "flowsteer/io.hpp"
#include "oracles.hpp"

using namespace flowsteer;
namespace fs = std::filesystem;

namespace {

// Ablation margins (dB) from the derivation run with the pinned net, pooled
// over the four tasks. Each must be positive and within the slack.
constexpr double kWindowOverAlways = 0.806;
constexpr double kWindowOverEarly = 6.763;
constexpr double kMarginSlack = 0.3;

// The acceptance net: desk defaults, trained for 8000 steps.
ExperimentConfig net_config() { return load_config({}, {}, {"train.steps=8000"}); }

std::string net_fingerprint(const ExperimentConfig& cfg) {
    return Json{{"flow", cfg.raw.at("flow")}, {"train", cfg.raw.at("train")}, {"dataset", cfg.raw.at("dataset")},
                {"codec", cfg.raw.at("codec")}}
        .dump();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Tensor random_tensor(Rng& rng, const Dims& d) {
    Tensor t(d);
    for (auto& v : t.values()) v = rng.uniform();
    return t;
}

Tensor random_kernel(Rng& rng, std::size_t size) {
    Tensor k(Dims{size, size});
    double total = 0.0;
    for (auto& v : k.values()) total += (v = rng.uniform());
    k *= 1.0 / total;
    return k;
}

Verdict operator_algebra() {
    Verdict v;
    Rng rng(101);
    const Dims d{3, 16, 12};
    const std::vector<DegradationOperator> ops = {DegradationOperator::colorization(16, 12),
                                                  DegradationOperator::super_res4(3, 16, 12),
                                                  DegradationOperator::denoise(d, 0.2)};
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Tensor x = random_tensor(rng, d);
        for (const auto& op : ops) {
            const Tensor ax = op.apply(x);
            worst = std::max(worst, max_abs_diff(op.apply(op.apply_pinv(ax)), ax));
        }
    }
    v.require(worst <= 1e-6, "max |A A+ A x - A x| = " + fmt("%.3g", worst));

    bool exact = true;
    double idem = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Tensor y = random_tensor(rng, Dims{3, 4, 3});
        exact = exact && ops[1].apply(ops[1].apply_pinv(y)) == y;
        const Tensor x = random_tensor(rng, d);
        idem = std::max(idem, max_abs_diff(ops[0].apply(ops[0].apply(x)), ops[0].apply(x)));
    }
    v.require(exact, "superres A A+ == I bitwise");
    v.require(idem <= 1e-9, "colorization |A^2 - A| = " + fmt("%.3g", idem));
    return v;
}

Verdict wiener_correctness() {
    Verdict v;
    Rng rng(202);
    const double lam = 0.1;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const std::size_t h = 8 + rng.index(5), w = 8 + rng.index(5);
        const Tensor kern = random_kernel(rng, 2 * rng.index(3) + 3);
        const auto op = DegradationOperator::blur(1, h, w, kern, lam);
        const Tensor y = random_tensor(rng, Dims{1, h, w});
        const Tensor x = op.apply_pinv(y);
        const auto hr = oracle::kernel_response(kern, h, w);
        const auto xs = oracle::dft2(x.data(), h, w);
        const auto ys = oracle::dft2(y.data(), h, w);
        for (std::size_t k = 0; k < hr.size(); ++k) {
            worst = std::max(worst, std::abs((std::norm(hr[k]) + lam) * xs[k] - std::conj(hr[k]) * ys[k]));
        }
    }
    v.require(worst <= 1e-5, "normal-equation residual " + fmt("%.3g", worst));
    const auto op = DegradationOperator::blur(3, 16, 16, make_gaussian_kernel(7, 1.0), lam);
    const double dc = max_abs_diff(op.apply_pinv(Tensor(Dims{3, 16, 16}, 1.0)), Tensor(Dims{3, 16, 16}, 1.0 / (1.0 + lam)));
    v.require(dc <= 1e-9, "DC gain error " + fmt("%.3g", dc));
    return v;
}

Verdict fidelity_exactness() {
    Verdict v;
    Rng rng(303);
    const Dims d{3, 16, 16};
    const std::vector<DegradationOperator> ops = {DegradationOperator::colorization(16, 16),
                                                  DegradationOperator::super_res4(3, 16, 16),
                                                  DegradationOperator::denoise(d, 0.0)};
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto& op = ops[static_cast<std::size_t>(i) % ops.size()];
        const Tensor y = op.apply(random_tensor(rng, d));
        const Tensor x = rng.normal_tensor(d);
        const Tensor out = fidelity_update(x, y, op, {1.0, 0.0}, rng);
        worst = std::max(worst, norm_linf(op.apply(out) - y));
    }
    v.require(worst <= 1e-5, "max residual " + fmt("%.3g", worst));
    return v;
}

Verdict euler_exactness() {
    Verdict v;
    Rng rng(404);
    const Tensor mu(Dims{3}, {0.7, -1.2, 2.5});
    const GmmVelocityField point(GmmTarget{{1.0}, {mu}, {0.0}});
    double worst = 0.0;
    for (std::size_t n : {1, 2, 5, 30}) {
        for (int i = 0; i < 10; ++i) {
            const Tensor end = euler_generate(point, rng.normal_tensor(Dims{3}), TimeGrid::uniform(n)).back();
            worst = std::max(worst, max_abs_diff(end, mu));
        }
    }
    v.require(worst <= 1e-9, "point mass error " + fmt("%.3g", worst));

    const GmmTarget g{{0.3, 0.3, 0.4},
                      {Tensor(Dims{2}, {-2.0, -1.0}), Tensor(Dims{2}, {2.0, -1.0}), Tensor(Dims{2}, {0.0, 2.0})},
                      {0.5, 0.5, 0.5}};
    const GmmVelocityField field(g);
    const std::size_t samples = 10000;
    double sum[2] = {}, sq[2] = {};
    for (std::size_t s = 0; s < samples; ++s) {
        const Tensor end = euler_generate(field, rng.normal_tensor(Dims{2}), TimeGrid::uniform(30)).back();
        for (std::size_t j = 0; j < 2; ++j) {
            sum[j] += end[j];
            sq[j] += end[j] * end[j];
        }
    }
    const Tensor mean = g.mixture_mean();
    const Tensor var = g.mixture_variance();
    double mean_err = 0.0, var_rel = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
        const double m = sum[j] / samples;
        mean_err = std::max(mean_err, std::abs(m - mean[j]));
        var_rel = std::max(var_rel, std::abs(sq[j] / samples - m * m - var[j]) / var[j]);
    }
    v.require(mean_err <= 0.05, "mixture mean error " + fmt("%.3g", mean_err));
    v.require(var_rel <= 0.10, "variance relative error " + fmt("%.3g", var_rel));
    return v;
}

Verdict gradient_check() {
    Verdict v;
    const VelocityNet net = VelocityNet::init(3 * 16 * 16, {256, 256}, 16, 505, true);
    Rng rng(506);
    const FlowBatch batch = make_flow_batch(
        [](Rng& r, std::span<double> out) {
            const Tensor img = render_shape_image(r, 16);
            std::copy(img.values().begin(), img.values().end(), out.begin());
        },
        3 * 16 * 16, 4, rng);
    const double err = grad_check(net, batch, 64, 507);
    v.require(err <= 1e-4, "64 parameters, max relative error " + fmt("%.3g", err));
    return v;
}

Verdict schedule_algebra() {
    Verdict v;
    const std::size_t n = 30;
    auto rows = [n](std::vector<std::tuple<std::size_t, std::size_t, double>> spans) {
        std::vector<double> out(n, 0.0);
        for (const auto& [a, b, h] : spans)
            for (std::size_t i = a; i <= b; ++i) out[i - 1] = h;
        return out;
    };
    const std::vector<std::pair<std::string, std::vector<double>>> expected = {
        {"general", rows({{15, 27, 1.0}})},
        {"colorization", rows({{12, 14, 1.0}, {15, 28, 0.3}})},
        {"superres", rows({{15, 20, 1.0}, {21, 25, 0.5}})},
        {"deblur", rows({{21, 23, 1.0}, {24, 27, 0.3}})},
        {"denoise", rows({{15, 21, 1.0}, {22, 28, 0.5}})},
    };
    bool presets = true;
    for (const auto& [name, values] : expected) presets = presets && preset_schedule(name, n).values() == values;
    presets = presets && rect_schedule(n, 15, 27, 1.0).values() == expected[0].second;
    presets = presets && two_step_schedule(n, 12, 15, 28, 1.0, 0.3, 1).values() == expected[1].second;
    presets = presets && two_step_schedule(n, 21, 24, 27, 1.0, 0.3, 1).values() == expected[3].second;
    v.require(presets, "presets index-for-index at N = 30");

    double worst = 0.0;
    Rng rng(606);
    for (int i = 0; i < 10000; ++i) {
        const double a = rng.uniform(0.01, 2.0), sy = rng.uniform(0.0, 1.0);
        const double st = a * sy * (1.0 + rng.uniform(0.0, 3.0));
        const NoiseRobustStep s = adaptive_lambda_gamma(st, a, sy);
        worst = std::max(worst, std::abs(s.gamma_t * s.gamma_t + a * a * s.lambda_t * s.lambda_t * sy * sy - st * st));
    }
    v.require(worst <= 1e-12, "variance identity error " + fmt("%.3g", worst));

    bool collapse = true;
    for (double sy : {0.05, 0.2, 1.0}) {
        const NoiseRobustStep s = adaptive_lambda_gamma(0.0, 0.8, sy);
        collapse = collapse && s.lambda_t == 0.0 && s.gamma_t == 0.0;
        const auto br = default_beta_range(100);
        const auto ddpm = ddpm_schedule(100, br.first, br.last, sy);
        const NoiseRobustStep last = adaptive_lambda_gamma(ddpm.sigma(1), a_t_coeff(ddpm, 1), sy);
        collapse = collapse && ddpm.sigma(1) == 0.0 && last.lambda_t == 0.0 && last.gamma_t == 0.0;
    }
    v.require(collapse, "sigma_t = 0 gives lambda = gamma = 0");
    return v;
}

struct Pooled {
    double window = 0, always = 0, early = 0, via = 0;
};

Verdict ablation_and_baseline(const VelocityNet& net, Verdict& baseline) {
    Verdict v;
    const std::size_t n = 30;
    const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    DatasetSpec data;
    data.count = 20;
    data.size = 16;
    Pooled pooled;
    for (TaskKind task : {TaskKind::Colorization, TaskKind::Deblur, TaskKind::SuperRes, TaskKind::Denoise}) {
        const Fixture fx = build_fixture(task, OperatorSpec{}, data);
        RunOptions o;
        o.steps = n;
        o.eta_eff = 0.05;
        auto cell = [&](LambdaSchedule s, ProjectionMode pm) {
            RunOptions r = o;
            r.schedule = std::move(s);
            r.projection = pm;
            return evaluate_cell(net, fx, r, seeds).mean_psnr;
        };
        const double window = cell(rect_schedule(n, 15, 27, 1.0), ProjectionMode::Direct);
        const double always = cell(LambdaSchedule::constant(n, 1.0), ProjectionMode::Direct);
        const double early = cell(rect_schedule(n, 1, 12, 1.0), ProjectionMode::Direct);
        const double via = cell(rect_schedule(n, 15, 27, 1.0), ProjectionMode::ViaX0);
        std::printf("  %-13s window %.3f  always %.3f  early %.3f  via_x0 %.3f dB\n", to_string(task).c_str(), window,
                    always, early, via);
        pooled.window += window / 4;
        pooled.always += always / 4;
        pooled.early += early / 4;
        pooled.via += via / 4;

        if (task == TaskKind::Deblur || task == TaskKind::SuperRes) {
            RunOptions p = o;
            p.method = "pinv";
            const double pinv = evaluate_cell(net, fx, p, seeds).mean_psnr;
            baseline.require(window > pinv, to_string(task) + " FlowSteer - pinv = " + fmt("%+.3f dB", window - pinv));
        }
    }
    const double m1 = pooled.window - pooled.always;
    const double m2 = pooled.window - pooled.early;
    v.require(m1 > 0.0 && std::abs(m1 - kWindowOverAlways) <= kMarginSlack,
              "window - always = " + fmt("%.3f", m1) + " (pinned " + fmt("%.3f", kWindowOverAlways) + ")");
    v.require(m2 > 0.0 && std::abs(m2 - kWindowOverEarly) <= kMarginSlack,
              "window - early = " + fmt("%.3f", m2) + " (pinned " + fmt("%.3f", kWindowOverEarly) + ")");
    v.require(pooled.via < pooled.window, "via_x0 - direct = " + fmt("%+.3f dB", pooled.via - pooled.window));
    return v;
}

Verdict ddnm_posterior() {
    Verdict v;
    // Prior N(mu0, s0^2), y = x + N(0, sy^2).
    const double mu0 = 0.5, s0 = 0.25, sy = 0.2, y = 0.9;
    const double post = (s0 * s0 * y + sy * sy * mu0) / (s0 * s0 + sy * sy);
    const double post_sd = std::sqrt(s0 * s0 * sy * sy / (s0 * s0 + sy * sy));
    const AnalyticDenoiser den{GmmTarget{{1.0}, {Tensor(Dims{1}, {mu0})}, {s0}}};
    const auto br = default_beta_range(100);
    const auto sched = ddpm_schedule(100, br.first, br.last, sy);
    RestorationTask task;
    task.op = DegradationOperator::denoise(Dims{1}, sy);
    task.y = Tensor(Dims{1}, {y});
    const int runs = 2000;
    for (bool robust : {true, false}) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < runs; ++i) {
            Rng rng(derive_seed(909, static_cast<std::uint64_t>(i)));
            const double x = restore_ddnm(den, task, sched, robust, rng)[0];
            sum += x;
            sq += x * x;
        }
        const double m = sum / runs;
        const double se = std::sqrt(std::max(sq / runs - m * m, 0.0) / runs);
        const std::string name = robust ? "noise-robust" : "plain";
        const std::string line = name + " mean " + fmt("%.4f", m) + " vs posterior " + fmt("%.4f", post) + " (sd " +
                                 fmt("%.3f", post_sd) + ", 3 SE = " + fmt("%.4f", 3 * se) + ")";
        if (robust) {
            v.require(std::abs(m - post) <= 3 * se, line);
        } else {
            v.detail += "; " + line;
        }
    }

    // sigma_y = 0: the two variants must coincide step for step.
    const auto clean = ddpm_schedule(100, br.first, br.last, 0.0);
    RestorationTask two;
    two.op = DegradationOperator::matrix(Dims{2}, Dims{1}, {1, 0}, {1, 0});
    two.y = Tensor(Dims{1}, {1.8});
    const AnalyticDenoiser gm{two_mode_gmm()};
    bool same = true;
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng a(s), b(s);
        std::vector<Tensor> ta, tb;
        restore_ddnm(gm, two, clean, false, a, &ta);
        restore_ddnm(gm, two, clean, true, b, &tb);
        same = same && ta == tb;
    }
    v.require(same, "sigma_y = 0 trajectories identical");
    return v;
}

Verdict determinism_and_formats(const fs::path& net_path) {
    Verdict v;
    const fs::path dir = fs::temp_directory_path() / "flowsteer_acceptance_determinism";
    fs::remove_all(dir);
    auto run = [&](const std::string& sub) {
        const ExperimentConfig cfg = load_config(
            {}, {}, {"dataset.count=4", "seeds=[0,1]", "eta_eff=0.05", "task=superres",
                     "output_dir=" + (dir / sub).string(), "flow.checkpoint=" + net_path.string()});
        run_subcommand("restore", cfg);
        run_subcommand("ablate-projection", cfg);
        return slurp(dir / sub / "metrics.csv") + slurp(dir / sub / "traces" / "trace_003_s1.csv") +
               slurp(dir / sub / "ablate_projection.csv") + slurp(dir / sub / "restored.fst");
    };
    const std::string first = run("a");
    v.require(!first.empty() && first == run("b"), "repeated runs byte-identical");
    fs::remove_all(dir);

    Rng rng(1010);
    bool fst = true;
    for (int i = 0; i < 20; ++i) {
        Tensor t(Dims{1 + rng.index(4), 1 + rng.index(7), 1 + rng.index(5)});
        for (auto& x : t.values()) x = static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform(-20, 20)));
        std::vector<std::uint8_t> bytes;
        append_fst(bytes, t);
        std::size_t off = 0;
        const Tensor back = decode_fst(bytes, off);
        fst = fst && back == t && off == bytes.size();
    }
    v.require(fst, "FST round trip bit-exact");

    bool ppm = true;
    for (int i = 0; i < 20; ++i) {
        Tensor img(Dims{3, 1 + rng.index(9), 1 + rng.index(9)});
        for (auto& x : img.values()) x = static_cast<double>(rng.index(256)) / 255.0;
        const Tensor back = decode_ppm(encode_ppm(img));
        ppm = ppm && encode_ppm(back) == encode_ppm(img) && max_abs_diff(back, img) <= 1e-12;
    }
    v.require(ppm, "PPM round trip exact");
    v.require(to_byte(0.5) == 128 && to_byte(-0.2) == 0 && to_byte(1.7) == 255, "0.5 exports as 128");
    return v;
}

bool ensure_net(const fs::path& path) {
    const ExperimentConfig cfg = net_config();
    const fs::path stamp = path.string() + ".config";
    const std::string fp = net_fingerprint(cfg);
    if (fs::exists(path) && fs::exists(stamp) && slurp(stamp) == fp) {
        std::printf("reusing %s\n", path.string().c_str());
        return true;
    }
    std::printf("training the acceptance net (%zu steps)\n", cfg.train.steps);
    std::fflush(stdout);
    const TrainOutcome t = train_flow(cfg);
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    save_checkpoint(t.net, path);
    std::ofstream(stamp, std::ios::binary) << fp;
    std::ofstream mon(path.string() + ".monitor.csv", std::ios::binary);
    mon << "step,monitor_loss\n";
    for (std::size_t i = 0; i < t.curve.monitor.size(); ++i) {
        mon << std::min(i * t.curve.monitor_every, cfg.train.steps) << ',' << format_number(t.curve.monitor[i]) << '\n';
    }
    std::printf("final monitor loss %.4f\n", t.curve.monitor.empty() ? std::nan("") : t.curve.monitor.back());
    return true;
}

// Monitor loss averaged over 100-step windows must not rise by more than 1%
// from one window to the next. Momentum SGD leaves sub-percent upticks in
// the plateau, so the strict count is reported alongside.
int check_loss_trend(const fs::path& net_path) {
    std::ifstream in(net_path.string() + ".monitor.csv");
    std::string line;
    std::getline(in, line);
    std::vector<std::pair<std::size_t, double>> points;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        points.emplace_back(std::stoul(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    }
    std::vector<double> windows;
    double acc = 0.0;
    std::size_t count = 0, window = 1;
    for (const auto& [step, loss] : points) {
        if (step == 0) continue;
        if ((step - 1) / 100 + 1 != window) {
            windows.push_back(acc / static_cast<double>(count));
            acc = 0.0;
            count = 0;
            window = (step - 1) / 100 + 1;
        }
        acc += loss;
        ++count;
    }
    if (count > 0) windows.push_back(acc / static_cast<double>(count));
    if (windows.size() < 2) {
        std::printf("loss trend: FAIL -- no monitor curve next to %s\n", net_path.string().c_str());
        return 1;
    }
    std::size_t rises = 0;
    double worst = -1.0;
    for (std::size_t i = 1; i < windows.size(); ++i) {
        const double rel = (windows[i] - windows[i - 1]) / windows[i - 1];
        rises += rel > 0.0;
        worst = std::max(worst, rel);
    }
    const bool pass = worst <= 0.01;
    std::printf("loss trend: %s -- %zu windows, %.1f -> %.1f, %zu strict rises, largest %+.2f%%\n",
                pass ? "PASS" : "FAIL", windows.size(), windows.front(), windows.back(), rises, 100.0 * worst);
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string net_path = "acceptance_net.fst";
    bool train_only = false;
    app.add_option("--net", net_path, "acceptance net checkpoint");
    bool loss_trend = false;
    app.add_flag("--train-only", train_only, "train (or reuse) the net and exit");
    app.add_flag("--loss-trend", loss_trend, "check the smoothed monitor loss of the trained net");
    CLI11_PARSE(app, argc, argv);

    try {
        ensure_net(net_path);
        if (train_only) return 0;
        if (loss_trend) return check_loss_trend(net_path);
        const VelocityNet net = load_checkpoint(net_path);

        Verdict baseline;
        std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
            {"operator algebra", operator_algebra},
            {"wiener correctness", wiener_correctness},
            {"fidelity-update exactness", fidelity_exactness},
            {"euler exactness", euler_exactness},
            {"gradient check", gradient_check},
            {"schedule algebra", schedule_algebra},
            {"ablation directions", [&] { return ablation_and_baseline(net, baseline); }},
            {"beats pseudo-inverse", [&] { return baseline; }},
            {"ddnm posterior", ddnm_posterior},
            {"determinism and formats", [&] { return determinism_and_formats(net_path); }},
        };
        int failed = 0;
        for (std::size_t i = 0; i < criteria.size(); ++i) {
            const Verdict v = criteria[i].second();
            failed += v.pass ? 0 : 1;
            std::printf("criterion %zu %s: %s -- %s\n", i + 1, criteria[i].first.c_str(), v.pass ? "PASS" : "FAIL",
                        v.detail.c_str());
            std::fflush(stdout);
        }
        std::printf("%d of %zu criteria failed\n", failed, criteria.size());
        return failed == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance: %s\n", e.what());
        return 2;
    }
}
