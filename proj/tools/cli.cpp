// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bokeh/dfd.hpp"
#include "bokeh/errors.hpp"
#include "bokeh/gradcheck.hpp"
#include "bokeh/io.hpp"
#include "bokeh/metrics.hpp"
#include "bokeh/oracle.hpp"
#include "bokeh/parallel.hpp"
#include "bokeh/render.hpp"

namespace fs = std::filesystem;
using namespace bokeh;

namespace {

// Exit codes: 0 success, 1 usage, 2 validation, 3 numerical failure.
int code_for(const std::string &code) {
    if (code == "GRADCHECK_FAILED" || code == "DIVERGED" || code == "ZERO_VARIANCE")
        return 3;
    return 2;
}

struct Summary {
    std::string cmd;
    std::vector<std::pair<std::string, std::string>> kv;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void add(const std::string &k, const std::string &v) { kv.emplace_back(k, v); }
    void add(const std::string &k, double v) {
        std::ostringstream os;
        os << v;
        kv.emplace_back(k, os.str());
    }
    void add(const std::string &k, int v) { kv.emplace_back(k, std::to_string(v)); }

    void print(bool ok) const {
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - start)
                      .count();
        std::cout << "status=" << (ok ? "ok" : "fail") << " cmd=" << cmd << " wall_ms=" << ms;
        for (const auto &[k, v] : kv) std::cout << " " << k << "=" << v;
        std::cout << "\n";
    }
};

void apply_overrides(LensConfig &lens, const std::string &mode, double *focus, double *blur,
                     const std::string &kernel, int *max_radius, const fs::path &base) {
    if (mode == "hard") lens.mode = RenderMode::Hard;
    if (mode == "soft") lens.mode = RenderMode::Soft;
    if (focus) lens.focus_disparity = *focus;
    if (blur) lens.blur_scale = *blur;
    if (max_radius) lens.max_radius = *max_radius;
    if (!kernel.empty()) {
        if (kernel == "circle") {
            lens.kernel.kind = ApertureKind::Circle;
            lens.kernel.mask = ImageBuffer();
        } else {
            ImageBuffer m = io::load_png(base / kernel);
            if (m.channels() != 1) throw Error("DECODE_ERROR", "kernel mask must be grayscale");
            lens.kernel.kind = ApertureKind::Mask;
            lens.kernel.mask = std::move(m);
        }
    }
}

int run_render(const fs::path &scene_path, const fs::path &out_path, const std::string &mode,
               double *focus, double *blur, const std::string &kernel, int *max_radius,
               const fs::path &debug_dir, int threads, Summary &sum) {
    auto [scene, lens] = io::load_scene(scene_path);
    apply_overrides(lens, mode, focus, blur, kernel, max_radius, scene_path.parent_path());
    RenderOutput out = render(scene, lens, threads);
    io::save_png(out_path, out.bokeh);
    if (!debug_dir.empty()) {
        fs::create_directories(debug_dir);
        for (int l = 0; l < scene.layer_count(); ++l) {
            const std::string base = "layer" + std::to_string(l);
            io::save_pfm(debug_dir / (base + "_numerator.pfm"), out.numerator[l]);
            io::save_pfm(debug_dir / (base + "_denominator.pfm"), out.denominator[l]);
            io::save_pfm(debug_dir / (base + "_visibility.pfm"), out.visibility[l]);
            io::save_pfm(debug_dir / (base + "_composite.pfm"), out.composite[l]);
        }
    }
    sum.add("out", out_path.string());
    sum.add("radius", out.radius);
    sum.add("layers", scene.layer_count());
    return 0;
}

int run_gradcheck(const fs::path &scene_path, double eps, double tol, double frac,
                  uint64_t seed, int threads, Summary &sum) {
    auto [scene, lens] = io::load_scene(scene_path);
    if (lens.mode != RenderMode::Soft)
        throw Error("MODE_MISMATCH", "gradcheck requires a SOFT-mode scene");
    GradCheckReport rep = gradcheck(scene, lens, eps, tol, frac, seed, threads);
    auto show = [](const char *name, const GradCheckFamily &f) {
        std::printf("%-10s max_rel=%.3e median_rel=%.3e frac_ok=%.4f checked=%zu "
                    "degenerate=%zu\n",
                    name, f.max_rel, f.median_rel, f.frac_ok, f.checked, f.degenerate);
    };
    show("color", rep.color);
    show("disparity", rep.disparity);
    show("alpha", rep.alpha);
    sum.add("max_rel", std::max({rep.color.max_rel, rep.disparity.max_rel, rep.alpha.max_rel}));
    sum.add("frac_ok",
            std::min({rep.color.frac_ok, rep.disparity.frac_ok, rep.alpha.frac_ok}));
    if (!rep.pass) throw Error("GRADCHECK_FAILED", "relative error above tolerance");
    return 0;
}

int run_oracle(const fs::path &recipe_path, const fs::path &out_dir, bool emit_default,
               int scenes, int resolution, int spp, int threads, Summary &sum) {
    if (emit_default)
        oracle::save_recipe(recipe_path, oracle::default_recipe(scenes, resolution, spp));
    oracle::BenchmarkRecipe recipe = oracle::load_recipe(recipe_path);
    oracle::generate_benchmark(recipe, out_dir, threads);
    sum.add("scenes", static_cast<int>(recipe.scenes.size()));
    sum.add("out", out_dir.string());
    return 0;
}

int run_benchmark(const fs::path &dataset, const fs::path &report_path, int threads,
                  Summary &sum) {
    std::vector<fs::path> scene_dirs;
    for (const auto &entry : fs::directory_iterator(dataset))
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
            scene_dirs.push_back(entry.path());
    std::sort(scene_dirs.begin(), scene_dirs.end());
    if (scene_dirs.empty())
        throw Error("PARSE_ERROR", "no scene directories under " + dataset.string());

    metrics::MetricReport engine_rep, naive_rep;
    int ordering_ok = 0;
    double psnr_min = 1e9;
    for (const fs::path &dir : scene_dirs) {
        auto [scene, lens] = io::load_scene(dir / "manifest.json");
        ImageBuffer gt = fs::exists(dir / "gt_bokeh.pfm") ? io::load_pfm(dir / "gt_bokeh.pfm")
                                                          : io::load_png(dir / "gt_bokeh.png");
        RenderOutput out = render(scene, lens, threads);
        RenderOutput naive = render_naive(scene, lens, threads);
        auto row = [&](const ImageBuffer &img, const std::string &name) {
            metrics::MetricRow r;
            r.name = name;
            r.rmse = metrics::rmse(img, gt);
            r.rmse_s = metrics::rmse_s(img, gt);
            r.ssim = metrics::ssim(img, gt);
            r.psnr = metrics::psnr(img, gt);
            r.zncc = metrics::zncc(img, gt);
            return r;
        };
        metrics::MetricRow er = row(out.bokeh, dir.filename().string());
        metrics::MetricRow nr = row(naive.bokeh, dir.filename().string());
        if (er.rmse < nr.rmse) ++ordering_ok;
        psnr_min = std::min(psnr_min, er.psnr);
        engine_rep.rows.push_back(er);
        naive_rep.rows.push_back(nr);
    }

    std::ostringstream report;
    report << "# engine\n" << engine_rep.format();
    report << "# naive (occlusion disabled)\n" << naive_rep.format();
    std::ofstream out(report_path);
    if (!out) throw Error("IO_FAILURE", "cannot write " + report_path.string());
    out << report.str();
    std::cout << report.str();

    sum.add("scenes", static_cast<int>(scene_dirs.size()));
    sum.add("psnr_min", psnr_min);
    sum.add("beats_naive", ordering_ok);
    return 0;
}

int run_dfd(const fs::path &image_path, const fs::path &target_path, const fs::path &out_path,
            const std::string &init, double focus, double blur, int iters, double step,
            const fs::path &trace_path, int threads, Summary &sum) {
    dfd::DfdProblem prob;
    prob.image = io::load_png(image_path);
    prob.target = fs::path(target_path).extension() == ".pfm" ? io::load_pfm(target_path)
                                                              : io::load_png(target_path);
    if (prob.image.channels() != 3 || prob.target.channels() != 3)
        throw Error("DECODE_ERROR", "image and target must be RGB");
    prob.lens.mode = RenderMode::Soft;
    prob.lens.focus_disparity = focus;
    prob.lens.blur_scale = blur;
    prob.max_iterations = iters;
    prob.step_size = step;
    prob.threads = threads;
    if (!init.empty() && fs::exists(init)) {
        prob.init_disparity = io::load_pfm(init);
    } else {
        float v = init.empty() ? 0.f : std::stof(init);
        prob.init_disparity = ImageBuffer(prob.image.width(), prob.image.height(), 1, v);
    }
    dfd::DfdResult res = dfd::optimize(prob);
    io::save_pfm(out_path, res.disparity);
    if (!trace_path.empty()) dfd::save_trace_csv(trace_path, res.trace);
    sum.add("iters", static_cast<int>(res.trace.size()));
    sum.add("best_loss", res.best_loss);
    sum.add("out", out_path.string());
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Differentiable occlusion-aware bokeh renderer"};
    app.require_subcommand(1);
    int threads = hardware_threads();
    app.add_option("--threads", threads, "worker threads")->capture_default_str();

    // render
    auto *c_render = app.add_subcommand("render", "render a layered scene manifest");
    fs::path scene_path, out_path, debug_dir;
    std::string mode, kernel;
    double focus = 0, blur = 0;
    int max_radius = 0;
    bool has_focus = false, has_blur = false, has_radius = false;
    c_render->add_option("--scene", scene_path, "scene manifest")->required();
    c_render->add_option("--out", out_path, "output PNG")->required();
    c_render->add_option("--mode", mode)->check(CLI::IsMember({"hard", "soft"}));
    c_render->add_option("--focus", focus, "focus disparity override")
        ->each([&](const std::string &) { has_focus = true; });
    c_render->add_option("--radius", blur, "blur scale override (pixels per disparity)")
        ->each([&](const std::string &) { has_blur = true; });
    c_render->add_option("--kernel", kernel, "'circle' or mask PNG path");
    c_render->add_option("--max-radius", max_radius, "neighborhood clamp override")
        ->each([&](const std::string &) { has_radius = true; });
    c_render->add_option("--debug", debug_dir, "directory for per-layer debug PFMs");

    // gradcheck
    auto *c_grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
    fs::path gscene;
    double eps = 1e-3, tol = 1e-3, frac = 0.99;
    uint64_t seed = 0;
    c_grad->add_option("--scene", gscene, "scene manifest (SOFT mode)")->required();
    c_grad->add_option("--eps", eps)->capture_default_str();
    c_grad->add_option("--tol", tol)->capture_default_str();
    c_grad->add_option("--frac", frac, "required share of pixels within tol")
        ->capture_default_str();
    c_grad->add_option("--seed", seed)->capture_default_str();

    // oracle
    auto *c_oracle = app.add_subcommand("oracle", "generate a ray-traced benchmark");
    fs::path recipe_path, oracle_out;
    bool emit_default = false;
    int rec_scenes = 5, rec_res = 128, rec_spp = 512;
    c_oracle->add_option("--recipe", recipe_path, "recipe JSON")->required();
    c_oracle->add_option("--out", oracle_out, "dataset directory")->required();
    c_oracle->add_flag("--emit-default", emit_default,
                       "write the built-in recipe to --recipe first");
    c_oracle->add_option("--scenes", rec_scenes, "scene count for --emit-default");
    c_oracle->add_option("--resolution", rec_res, "resolution for --emit-default");
    c_oracle->add_option("--spp", rec_spp, "samples per pixel for --emit-default");

    // benchmark
    auto *c_bench = app.add_subcommand("benchmark", "evaluate the renderer on a dataset");
    fs::path dataset, report_path;
    c_bench->add_option("--dataset", dataset, "dataset directory")->required();
    c_bench->add_option("--out", report_path, "report file")->required();

    // dfd
    auto *c_dfd = app.add_subcommand("dfd", "depth-from-defocus optimization");
    fs::path dfd_image, dfd_target, dfd_out, dfd_trace;
    std::string dfd_init;
    double dfd_focus = 0.0, dfd_blur = 10.0, dfd_step = 0.01;
    int dfd_iters = 2000;
    c_dfd->add_option("--image", dfd_image, "all-in-focus PNG")->required();
    c_dfd->add_option("--target", dfd_target, "target bokeh PNG or PFM")->required();
    c_dfd->add_option("--out", dfd_out, "output disparity PFM")->required();
    c_dfd->add_option("--init", dfd_init, "constant value or PFM path");
    c_dfd->add_option("--focus", dfd_focus)->capture_default_str();
    c_dfd->add_option("--radius", dfd_blur, "blur scale")->capture_default_str();
    c_dfd->add_option("--iters", dfd_iters)->capture_default_str();
    c_dfd->add_option("--step", dfd_step)->capture_default_str();
    c_dfd->add_option("--trace", dfd_trace, "loss trace CSV path");

    // validate
    auto *c_val = app.add_subcommand("validate", "check a scene manifest");
    fs::path vscene;
    c_val->add_option("--scene", vscene, "scene manifest")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    Summary sum;
    sum.cmd = app.get_subcommands().front()->get_name();
    try {
        if (*c_render)
            run_render(scene_path, out_path, mode, has_focus ? &focus : nullptr,
                       has_blur ? &blur : nullptr, kernel, has_radius ? &max_radius : nullptr,
                       debug_dir, threads, sum);
        else if (*c_grad)
            run_gradcheck(gscene, eps, tol, frac, seed, threads, sum);
        else if (*c_oracle)
            run_oracle(recipe_path, oracle_out, emit_default, rec_scenes, rec_res, rec_spp,
                       threads, sum);
        else if (*c_bench)
            run_benchmark(dataset, report_path, threads, sum);
        else if (*c_dfd)
            run_dfd(dfd_image, dfd_target, dfd_out, dfd_init, dfd_focus, dfd_blur, dfd_iters,
                    dfd_step, dfd_trace, threads, sum);
        else if (*c_val) {
            auto [scene, lens] = io::load_scene(vscene);
            sum.add("layers", scene.layer_count());
            sum.add("width", scene.width());
            sum.add("height", scene.height());
        }
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        sum.add("error", e.code());
        sum.print(false);
        return code_for(e.code());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        sum.print(false);
        return 2;
    }
    sum.print(true);
    return 0;
}
