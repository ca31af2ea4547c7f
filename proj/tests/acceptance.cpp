// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate: one pass/fail line per criterion, exit code = number of
// failures. Tolerances are pinned here and intentionally not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bokeh/dfd.hpp"
#include "bokeh/gradcheck.hpp"
#include "bokeh/io.hpp"
#include "bokeh/metrics.hpp"
#include "bokeh/oracle.hpp"
#include "bokeh/parallel.hpp"
#include "bokeh/render.hpp"
#include "brute_force.hpp"

using namespace bokeh;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int idx, const char *name, bool pass, const std::string &detail,
            double seconds) {
    std::printf("[%s] criterion %d: %-28s %s (%.1fs)\n", pass ? "PASS" : "FAIL", idx, name,
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

template <typename F>
void criterion(int idx, const char *name, F &&body) {
    const auto t0 = Clock::now();
    bool pass = false;
    std::string detail;
    try {
        pass = body(detail);
    } catch (const std::exception &e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    report(idx, name, pass, detail, secs);
}

LayeredScene random_scene(int w, int h, int layers, uint64_t seed, float shared_color = -1.f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> col(0.f, 1.f);
    std::uniform_real_distribution<float> disp(-0.8f, 0.8f);
    std::uniform_real_distribution<float> alp(0.f, 1.f);
    LayeredScene scene;
    for (int l = 0; l < layers; ++l) {
        Layer layer{ImageBuffer(w, h, 3), ImageBuffer(w, h, 1), ImageBuffer(w, h, 1)};
        for (size_t i = 0; i < layer.color.size(); ++i)
            layer.color.data()[i] = shared_color >= 0 ? shared_color : col(rng);
        for (size_t i = 0; i < layer.alpha.size(); ++i)
            layer.alpha.data()[i] = l == layers - 1 ? 1.f : alp(rng);
        for (size_t i = 0; i < layer.disparity.size(); ++i) layer.disparity.data()[i] = disp(rng);
        scene.layers.push_back(std::move(layer));
    }
    return scene;
}

// --------------------------------------------------------------------------
// 1. gradient correctness
// --------------------------------------------------------------------------
bool c1_gradients(std::string &detail) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    double worst_frac = 1.0;
    size_t scenes_failed = 0;
    for (int i = 0; i < 20; ++i) {
        const int w = 12 + static_cast<int>(rng() % 21); // 12..32
        const int h = 12 + static_cast<int>(rng() % 21);
        LayeredScene scene = random_gradcheck_scene(w, h, 5000 + i);
        LensConfig lens = gradcheck_lens(); // SOFT, leak disabled
        GradCheckReport rep = gradcheck(scene, lens, 1e-3, 1e-3, 0.99, 77 + i);
        const double frac =
            std::min({rep.color.frac_ok, rep.disparity.frac_ok, rep.alpha.frac_ok});
        worst_frac = std::min(worst_frac, frac);
        if (!rep.pass) ++scenes_failed;
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    detail = "20 scenes, worst frac_ok=" + std::to_string(worst_frac) +
             ", failed=" + std::to_string(scenes_failed);
    return scenes_failed == 0 && secs < 120.0;
}

// --------------------------------------------------------------------------
// 2. brute-force equivalence
// --------------------------------------------------------------------------
bool c2_brute_force(std::string &detail) {
    int mismatches = 0;
    for (uint64_t s = 0; s < 10; ++s) {
        const int w = 8 + static_cast<int>(s % 9);  // 8..16
        const int h = 8 + static_cast<int>((s * 3) % 9);
        LayeredScene scene = random_scene(w, h, 2, 900 + s);
        LensConfig lens;
        lens.blur_scale = 4.0;
        lens.max_radius = w + h; // >= diagonal
        lens.mode = (s % 2) ? RenderMode::Soft : RenderMode::Hard;
        RenderOutput out = render(scene, lens);
        ImageBuffer direct = brute::render_direct(scene, lens, out.radius);
        if (std::memcmp(out.bokeh.data(), direct.data(),
                        out.bokeh.size() * sizeof(float)) != 0)
            ++mismatches;
    }
    detail = "10 scenes bitwise, mismatches=" + std::to_string(mismatches);
    return mismatches == 0;
}

// --------------------------------------------------------------------------
// 3. energy conservation and pinhole limit
// --------------------------------------------------------------------------
bool c3_energy_pinhole(std::string &detail) {
    double worst_const = 0, worst_pin = 0;
    for (uint64_t s = 0; s < 10; ++s) {
        const int layers = 2 + static_cast<int>(s % 2);
        LayeredScene scene = random_scene(16, 16, layers, 700 + s, 0.6f);
        LensConfig lens;
        lens.blur_scale = 5.0;
        lens.mode = (s % 2) ? RenderMode::Soft : RenderMode::Hard;
        RenderOutput out = render(scene, lens);
        for (size_t i = 0; i < out.bokeh.size(); ++i)
            worst_const = std::max(worst_const,
                                   std::abs(static_cast<double>(out.bokeh.data()[i]) - 0.6));

        LayeredScene pin_scene = random_scene(16, 16, layers, 800 + s);
        LensConfig pin;
        pin.blur_scale = 0.0;
        RenderOutput pout = render(pin_scene, pin);
        Layer flat = flatten_scene(pin_scene);
        for (size_t i = 0; i < pout.bokeh.size(); ++i)
            worst_pin = std::max(worst_pin, std::abs(static_cast<double>(pout.bokeh.data()[i]) -
                                                     flat.color.data()[i]));
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "const dev=%.2e (tol 1e-5), pinhole dev=%.2e (tol 1e-6)",
                  worst_const, worst_pin);
    detail = buf;
    return worst_const <= 1e-5 && worst_pin <= 1e-6;
}

// --------------------------------------------------------------------------
// 4. color-bleeding elimination
// --------------------------------------------------------------------------
bool c4_color_bleeding(std::string &detail) {
    // on-focal white square over a saturated red defocused background,
    // flattened to a single opaque layer (the inter-layer visibility path
    // would otherwise hide the in-layer occlusion term under test)
    const int N = 48, s0 = 12, s1 = 36; // square [12,36)
    LayeredScene layered;
    Layer fg{ImageBuffer(N, N, 3, 1.f), ImageBuffer(N, N, 1, 0.f),
             ImageBuffer(N, N, 1, 0.5f)};
    for (int y = s0; y < s1; ++y)
        for (int x = s0; x < s1; ++x) fg.alpha.at(x, y) = 1.f;
    Layer bg{ImageBuffer(N, N, 3, 0.f), ImageBuffer(N, N, 1, 1.f), ImageBuffer(N, N, 1, 0.f)};
    for (int y = 0; y < N; ++y)
        for (int x = 0; x < N; ++x) bg.color.at(x, y, 0) = 1.f; // pure red
    layered.layers = {fg, bg};

    LayeredScene flat;
    flat.layers.push_back(flatten_scene(layered));

    LensConfig lens;
    lens.mode = RenderMode::Hard;
    lens.focus_disparity = 0.5; // square on focus, background defocused
    lens.blur_scale = 16.0;     // background CoC radius 8

    auto excess = [&](bool occlusion) {
        LensConfig l = lens;
        l.occlusion_enabled = occlusion;
        RenderOutput out = render(flat, l);
        double acc = 0;
        int n = 0;
        for (int y = s0 + 1; y < s1 - 1; ++y) // opaque interior (1 px erosion)
            for (int x = s0 + 1; x < s1 - 1; ++x) {
                acc += static_cast<double>(out.bokeh.at(x, y, 0)) - out.bokeh.at(x, y, 1);
                ++n;
            }
        return acc / n;
    };

    const double with_occ = excess(true);
    const double without_occ = excess(false);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "excess with O=%.2e (tol 1e-6), ablation=%.3f (need >0.05)",
                  with_occ, without_occ);
    detail = buf;
    return std::abs(with_occ) <= 1e-6 && without_occ > 0.05;
}

// --------------------------------------------------------------------------
// 5. partial occlusion compositing
// --------------------------------------------------------------------------
bool c5_partial_occlusion(std::string &detail) {
    const int N = 48;
    LayeredScene scene;
    Layer fg{ImageBuffer(N, N, 3, 0.9f), ImageBuffer(N, N, 1, 0.f),
             ImageBuffer(N, N, 1, 0.4f)};
    for (int y = 14; y < 34; ++y)
        for (int x = 14; x < 34; ++x) fg.alpha.at(x, y) = 1.f; // defocused square
    Layer bg{oracle::make_texture(N, N, 31), ImageBuffer(N, N, 1, 1.f),
             ImageBuffer(N, N, 1, 0.f)}; // in focus
    scene.layers = {fg, bg};

    LensConfig lens;
    lens.mode = RenderMode::Hard;
    lens.blur_scale = 10.0; // foreground CoC radius 4

    RenderOutput out = render(scene, lens);

    double worst_sum = 0;
    for (int y = 0; y < N; ++y)
        for (int x = 0; x < N; ++x) {
            double sum = out.composite[0].at(x, y) + out.composite[1].at(x, y);
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        }

    // 1-D slice through the square center, moving outward across the boundary
    std::vector<double> c_fg;
    for (int x = 24; x < N; ++x) c_fg.push_back(out.composite[0].at(x, 24));
    bool band_seen = false, monotone = true;
    for (size_t i = 0; i + 1 < c_fg.size(); ++i)
        if (c_fg[i] > 1e-6 && c_fg[i] < 1.0 - 1e-6) {
            band_seen = true;
            if (!(c_fg[i + 1] < c_fg[i])) monotone = false;
        }

    char buf[128];
    std::snprintf(buf, sizeof(buf), "|c_fg+c_bg-1|=%.2e (tol 1e-6), band %s, monotone=%s",
                  worst_sum, band_seen ? "found" : "missing", monotone ? "yes" : "no");
    detail = buf;
    return worst_sum <= 1e-6 && band_seen && monotone;
}

// --------------------------------------------------------------------------
// 6. oracle agreement
// --------------------------------------------------------------------------
bool c6_oracle_agreement(std::string &detail) {
    const auto t0 = Clock::now();
    const fs::path dir = fs::temp_directory_path() / "bokeh_acceptance_benchmark";
    fs::remove_all(dir);
    oracle::BenchmarkRecipe recipe = oracle::default_recipe(5, 128, 512);
    oracle::generate_benchmark(recipe, dir);

    double psnr_min = 1e9;
    int beats_naive = 0, scenes = 0;
    for (const auto &rs : recipe.scenes) {
        auto [scene, lens] = io::load_scene(dir / rs.name / "manifest.json");
        lens.mode = RenderMode::Soft;
        ImageBuffer gt = io::load_pfm(dir / rs.name / "gt_bokeh.pfm");
        RenderOutput engine = render(scene, lens);
        RenderOutput naive = render_naive(scene, lens);
        const double p = metrics::psnr(engine.bokeh, gt);
        psnr_min = std::min(psnr_min, p);
        if (metrics::rmse(engine.bokeh, gt) < metrics::rmse(naive.bokeh, gt)) ++beats_naive;
        ++scenes;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "psnr_min=%.2f dB (need >=30), beats naive %d/%d",
                  psnr_min, beats_naive, scenes);
    detail = buf;
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    return psnr_min >= 30.0 && beats_naive == scenes && secs < 900.0;
}

// --------------------------------------------------------------------------
// 7/8. depth-from-defocus fixture
// --------------------------------------------------------------------------
struct Fixture {
    dfd::DfdProblem prob;
    ImageBuffer true_disparity;
};

Fixture make_fixture() {
    const int N = 64;
    Fixture f;
    f.prob.image = oracle::make_texture(N, N, 404);
    f.true_disparity = ImageBuffer(N, N, 1, 0.f);
    for (int y = 0; y < N; ++y)
        for (int x = 0; x < N / 2; ++x) f.true_disparity.at(x, y) = 0.5f; // front plane

    // Blur scale 12: the soft scatter edge sits ~0.7 px outside the hard
    // disk, which biases recovered disparity by ~0.7/blur_scale on the
    // defocused plane; 12 px/disparity keeps that bias well inside the
    // acceptance tolerance.
    LensConfig hard;
    hard.mode = RenderMode::Hard;
    hard.blur_scale = 12.0;
    LayeredScene scene;
    scene.layers.push_back(Layer{f.prob.image, ImageBuffer(N, N, 1, 1.f), f.true_disparity});
    f.prob.target = render(scene, hard).bokeh;

    f.prob.init_disparity = ImageBuffer(N, N, 1, 0.25f);
    f.prob.lens.mode = RenderMode::Soft;
    f.prob.lens.blur_scale = 12.0;
    f.prob.max_iterations = 2000;
    f.prob.tolerance = 1e-7;
    return f;
}

bool c7_dfd_recovery(std::string &detail) {
    const auto t0 = Clock::now();
    Fixture f = make_fixture();
    dfd::DfdResult res = dfd::optimize(f.prob);

    const double disp_rmse = metrics::rmse(res.disparity, f.true_disparity);
    const double bokeh_psnr = metrics::psnr(res.render, f.prob.target);

    bool running_min_ok = true;
    double best = std::numeric_limits<double>::infinity();
    for (const auto &row : res.trace) {
        const double new_best = std::min(best, row.total);
        if (new_best > best + 1e-12) running_min_ok = false;
        best = new_best;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "disp rmse=%.4f (need <0.08), psnr=%.2f dB (need >35), iters=%zu, "
                  "runmin=%s",
                  disp_rmse, bokeh_psnr, res.trace.size(), running_min_ok ? "ok" : "bad");
    detail = buf;
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    return disp_rmse < 0.08 && bokeh_psnr > 35.0 && running_min_ok &&
           static_cast<int>(res.trace.size()) <= 2000 && secs < 600.0;
}

bool c8_loss_ablation(std::string &detail) {
    Fixture base = make_fixture();

    auto run_with = [&](double l1, double grad, double hs,
                        std::vector<int> windows) {
        dfd::DfdProblem prob = base.prob;
        prob.lambda_l1 = l1;
        prob.lambda_grad = grad;
        prob.lambda_hssim = hs;
        prob.windows = std::move(windows);
        dfd::DfdResult res = dfd::optimize(prob);
        return metrics::rmse(res.disparity, base.true_disparity);
    };

    const double full = run_with(1.0, 0.1, 1.0, {11, 21, 31}); // L1+Grad+HSSIM
    const double ssim_only = run_with(1.0, 0.1, 1.0, {11});    // single-scale SSIM
    const double l1_grad = run_with(1.0, 0.1, 0.0, {11});      // no structural term

    char buf[160];
    std::snprintf(buf, sizeof(buf), "rmse full=%.4f < ssim=%.4f < l1+grad=%.4f required",
                  full, ssim_only, l1_grad);
    detail = buf;
    return full < ssim_only && ssim_only < l1_grad;
}

// --------------------------------------------------------------------------
// 9. performance envelope
// --------------------------------------------------------------------------
bool c9_performance(std::string &detail) {
    LayeredScene scene = random_scene(256, 256, 2, 1234);
    LensConfig lens;
    lens.mode = RenderMode::Soft;
    lens.max_radius = 21;
    lens.blur_scale = 20.0;

    auto time_render = [&](int threads) {
        const auto t0 = Clock::now();
        RenderOutput out = render(scene, lens, threads);
        (void)out;
        return std::chrono::duration<double>(Clock::now() - t0).count();
    };

    time_render(1); // warm-up
    const double t1 = time_render(1);
    const double t8 = time_render(8);
    const double scaling = t1 / t8;

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "t8=%.2fs (need <=2), scaling 1->8 = %.2fx (need >=3, hardware has %d "
                  "core(s))",
                  t8, scaling, hardware_threads());
    detail = buf;
    return t8 <= 2.0 && scaling >= 3.0;
}

} // namespace

int main() {
    std::printf("acceptance gate: 9 criteria\n");
    criterion(1, "gradient correctness", c1_gradients);
    criterion(2, "brute-force equivalence", c2_brute_force);
    criterion(3, "energy + pinhole limit", c3_energy_pinhole);
    criterion(4, "color-bleeding elimination", c4_color_bleeding);
    criterion(5, "partial occlusion", c5_partial_occlusion);
    criterion(6, "oracle agreement", c6_oracle_agreement);
    criterion(7, "depth-from-defocus", c7_dfd_recovery);
    criterion(8, "loss ablation ordering", c8_loss_ablation);
    criterion(9, "performance envelope", c9_performance);
    std::printf("failures: %d\n", g_failures);
    return g_failures;
}
