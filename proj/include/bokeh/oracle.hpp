// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "bokeh/errors.hpp"
#include "bokeh/image.hpp"

namespace bokeh::oracle {

// Biconvex lens built from two spheres of radius sphere_radius whose rim
// circle has radius aperture_radius. The lens sits at the origin with the
// optical axis along z; the scene lives at z > 0 and the sensor plane at
// z = -image_plane_distance. fov is the full horizontal field of view of the
// square sensor through the lens center.
struct OracleLensConfig {
    double sphere_radius = 1.0;        // R_c, scene units
    double aperture_radius = 0.15;     // R_a < R_c
    double refractive_index = 1.5;     // eta > 1
    double image_plane_distance = 1.6; // D_I
    double fov_deg = 30.0;
    int resolution = 128; // square sensor, pixels
    int spp = 256;
    uint64_t rng_seed = 0;
};

// Textured plane perpendicular to the axis at z = distance, resized to cover
// the exact field of view at that distance.
struct Billboard {
    ImageBuffer color; // 3 channels, linear
    ImageBuffer alpha; // 1 channel
    double distance = 1.0;
};

// Ordered front to back (increasing distance); the last billboard is opaque.
struct BillboardScene {
    std::vector<Billboard> billboards;
};

// Throws GEOMETRY_INVALID / NOT_FOCUSABLE on a bad configuration.
void validate(const OracleLensConfig &cfg);
void validate(const BillboardScene &scene, const OracleLensConfig &cfg);

// Center separation of the two construction spheres, 2*sqrt(R_c^2 - R_a^2).
double lens_thickness(const OracleLensConfig &cfg);

// Thick-lens focal length: 1/f = (eta-1)*(2/R_c + (eta-1)*d/(eta*R_c^2))
// with d = lens_thickness.
double focal_length(const OracleLensConfig &cfg);

// Conjugate object distance of the sensor plane: 1/(1/f - 1/D_I).
double focus_distance(const OracleLensConfig &cfg);

// Circle-of-confusion radius on the sensor, in scene units, for a point at
// object distance object_d: R_a * |D_I - D_I'| / D_I'.
double coc_radius_physical(const OracleLensConfig &cfg, double object_d);

// Focal length measured by tracing a near-axis ray through the actual glass
// surfaces. Agrees with focal_length for thin rims (R_a << R_c) and is what
// the traced images physically obey, so focusing and the benchmark lens
// mapping are derived from it.
double calibrated_focal_length(const OracleLensConfig &cfg);
double calibrated_focus_distance(const OracleLensConfig &cfg);

// Blur scale (pixels per unit disparity offset) of the equivalent image-space
// lens: R_a * resolution / (2 * tan(fov/2)).
double blur_scale_pixels(const OracleLensConfig &cfg);

// Monte Carlo estimate for one pixel: spp stratified aperture samples, two
// exact Snell refractions, front-to-back over compositing on the billboards.
std::array<float, 3> trace_pixel(const OracleLensConfig &cfg, const BillboardScene &scene,
                                 int px, int py);

ImageBuffer trace_image(const OracleLensConfig &cfg, const BillboardScene &scene,
                        int threads = 1);

// Projection through the lens center only. Because billboards cover the exact
// field of view, this is the alpha-over composite of the textures.
ImageBuffer pinhole_render(const OracleLensConfig &cfg, const BillboardScene &scene);

// Deterministic procedural assets for benchmark scenes.
ImageBuffer make_texture(int width, int height, uint64_t seed);
ImageBuffer make_alpha_shape(int width, int height, uint64_t seed);

struct RecipeLayer {
    double distance = 1.0;
    uint64_t texture_seed = 0;
    bool opaque = false; // alpha forced to one
};

struct RecipeScene {
    std::string name;
    double aperture_radius = 0.15;
    uint64_t seed = 0;
    std::vector<RecipeLayer> layers; // front to back
};

struct BenchmarkRecipe {
    OracleLensConfig base; // aperture_radius and rng_seed overridden per scene
    std::vector<RecipeScene> scenes;
};

BenchmarkRecipe load_recipe(const std::filesystem::path &path);
void save_recipe(const std::filesystem::path &path, const BenchmarkRecipe &recipe);

// Built-in recipe: scene_count two-layer scenes with varied apertures and
// layer distances straddling the focal plane.
BenchmarkRecipe default_recipe(int scene_count, int resolution, int spp);

// Emits one sub-directory per scene: layered manifest + assets, all-in-focus
// pinhole render, ray-traced ground truth (PNG and PFM) and a provenance
// record. Deterministic for a fixed recipe.
void generate_benchmark(const BenchmarkRecipe &recipe, const std::filesystem::path &out_dir,
                        int threads = 1);

} // namespace bokeh::oracle
