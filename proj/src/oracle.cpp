// SPDX-License-Identifier: Apache-2.0

#include "bokeh/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "bokeh/io.hpp"
#include "bokeh/parallel.hpp"
#include "bokeh/scene.hpp"

namespace bokeh::oracle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Small 3-vector and counter-based RNG
// ---------------------------------------------------------------------------

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 normalize(Vec3 a) {
    double n = std::sqrt(dot(a, a));
    return {a.x / n, a.y / n, a.z / n};
}

uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double to_u01(uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

// Stateless stream: every (seed, pixel, sample, attempt, dim) tuple maps to
// one uniform draw, so scheduling order cannot change the result.
double rng_u01(uint64_t seed, uint64_t pixel, uint64_t sample, uint64_t attempt, uint64_t dim) {
    uint64_t h = mix64(seed);
    h = mix64(h ^ pixel);
    h = mix64(h ^ sample);
    h = mix64(h ^ (attempt * 0x100 + dim));
    return to_u01(h);
}

// ---------------------------------------------------------------------------
// Lens geometry
// ---------------------------------------------------------------------------

// The lens body is the intersection of two spheres of radius R_c centered at
// z = -sep/2 (front, scene side) and z = +sep/2 (back, sensor side), where
// sep = lens_thickness(cfg). The rim circle has radius exactly R_a at z = 0.

struct SphereHit {
    Vec3 point;
    bool ok = false;
};

SphereHit intersect_sphere(Vec3 origin, Vec3 dir, Vec3 center, double radius, bool nearest) {
    Vec3 oc = origin - center;
    double b = dot(oc, dir);
    double c = dot(oc, oc) - radius * radius;
    double disc = b * b - c;
    SphereHit hit;
    if (disc < 0) return hit;
    double sq = std::sqrt(disc);
    double t = nearest ? (-b - sq) : (-b + sq);
    if (t <= 0) return hit;
    hit.point = origin + t * dir;
    hit.ok = true;
    return hit;
}

bool refract(Vec3 d, Vec3 n, double eta, Vec3 &out) {
    double cosi = -dot(d, n);
    double k = 1 - eta * eta * (1 - cosi * cosi);
    if (k < 0) return false; // total internal reflection
    out = (eta * d) + ((eta * cosi - std::sqrt(k)) * n);
    return true;
}

bool on_cap(Vec3 p, double aperture_radius, bool back) {
    const double slack = 1e-9;
    if (p.x * p.x + p.y * p.y > aperture_radius * aperture_radius + slack) return false;
    return back ? p.z <= slack : p.z >= -slack;
}

// Refracts a sensor-side ray through both glass surfaces. Returns false when
// the ray misses the rim or internally reflects.
bool through_lens(const OracleLensConfig &cfg, Vec3 origin, Vec3 dir, Vec3 &out_origin,
                  Vec3 &out_dir) {
    const double half_sep = 0.5 * lens_thickness(cfg);
    const Vec3 back_center{0, 0, half_sep};
    const Vec3 front_center{0, 0, -half_sep};
    const double eta = cfg.refractive_index;

    SphereHit h1 = intersect_sphere(origin, dir, back_center, cfg.sphere_radius, true);
    if (!h1.ok || !on_cap(h1.point, cfg.aperture_radius, true)) return false;
    Vec3 n1 = (1.0 / cfg.sphere_radius) * (h1.point - back_center); // points to sensor side
    Vec3 d1;
    if (!refract(dir, n1, 1.0 / eta, d1)) return false;

    SphereHit h2 = intersect_sphere(h1.point, d1, front_center, cfg.sphere_radius, false);
    if (!h2.ok || !on_cap(h2.point, cfg.aperture_radius, false)) return false;
    Vec3 n2 = (-1.0 / cfg.sphere_radius) * (h2.point - front_center); // opposes the ray
    Vec3 d2;
    if (!refract(d1, n2, eta, d2)) return false;

    out_origin = h2.point;
    out_dir = d2;
    return true;
}

// Scene-side variant for the focal calibration ray (travels toward -z).
bool through_lens_reverse(const OracleLensConfig &cfg, Vec3 origin, Vec3 dir, Vec3 &out_origin,
                          Vec3 &out_dir) {
    const double half_sep = 0.5 * lens_thickness(cfg);
    const Vec3 front_center{0, 0, -half_sep};
    const Vec3 back_center{0, 0, half_sep};
    const double eta = cfg.refractive_index;

    SphereHit h1 = intersect_sphere(origin, dir, front_center, cfg.sphere_radius, true);
    if (!h1.ok || !on_cap(h1.point, cfg.aperture_radius, false)) return false;
    Vec3 n1 = (1.0 / cfg.sphere_radius) * (h1.point - front_center);
    Vec3 d1;
    if (!refract(dir, n1, 1.0 / eta, d1)) return false;

    SphereHit h2 = intersect_sphere(h1.point, d1, back_center, cfg.sphere_radius, false);
    if (!h2.ok || !on_cap(h2.point, cfg.aperture_radius, true)) return false;
    Vec3 n2 = (-1.0 / cfg.sphere_radius) * (h2.point - back_center);
    Vec3 d2;
    if (!refract(d1, n2, eta, d2)) return false;

    out_origin = h2.point;
    out_dir = d2;
    return true;
}

// ---------------------------------------------------------------------------
// Billboard sampling
// ---------------------------------------------------------------------------

float sample_bilinear(const ImageBuffer &img, double u, double v, int c) {
    const int w = img.width(), h = img.height();
    double fx = u * w - 0.5;
    double fy = v * h - 0.5;
    fx = std::clamp(fx, 0.0, w - 1.0);
    fy = std::clamp(fy, 0.0, h - 1.0);
    int x0 = std::min(static_cast<int>(fx), w - 1);
    int y0 = std::min(static_cast<int>(fy), h - 1);
    int x1 = std::min(x0 + 1, w - 1);
    int y1 = std::min(y0 + 1, h - 1);
    double tx = fx - x0, ty = fy - y0;
    return static_cast<float>((1 - tx) * (1 - ty) * img.at(x0, y0, c) +
                              tx * (1 - ty) * img.at(x1, y0, c) +
                              (1 - tx) * ty * img.at(x0, y1, c) + tx * ty * img.at(x1, y1, c));
}

double tan_half_fov(const OracleLensConfig &cfg) {
    return std::tan(0.5 * cfg.fov_deg * kPi / 180.0);
}

// Over-composites the billboards along a scene-side ray.
std::array<double, 3> composite_along(const OracleLensConfig &cfg, const BillboardScene &scene,
                                      Vec3 origin, Vec3 dir) {
    const double th = tan_half_fov(cfg);
    std::array<double, 3> acc{0, 0, 0};
    double acc_a = 0;
    for (const Billboard &bb : scene.billboards) {
        if (dir.z <= 1e-12) break;
        double t = (bb.distance - origin.z) / dir.z;
        if (t <= 0) continue;
        Vec3 p = origin + t * dir;
        double half = bb.distance * th;
        double u = (p.x / half + 1.0) * 0.5;
        double v = (p.y / half + 1.0) * 0.5;
        double a = sample_bilinear(bb.alpha, u, v, 0);
        double k = (1 - acc_a) * a;
        for (int c = 0; c < 3; ++c) acc[c] += k * sample_bilinear(bb.color, u, v, c);
        acc_a += k;
        if (acc_a >= 1.0 - 1e-9) break;
    }
    return acc;
}

Vec3 sensor_point(const OracleLensConfig &cfg, int px, int py) {
    const double th = tan_half_fov(cfg);
    double u = ((px + 0.5) / cfg.resolution) * 2.0 - 1.0;
    double v = ((py + 0.5) / cfg.resolution) * 2.0 - 1.0;
    // Negated so the refracted image lands upright on the output grid.
    return {-u * cfg.image_plane_distance * th, -v * cfg.image_plane_distance * th,
            -cfg.image_plane_distance};
}

} // namespace

// ---------------------------------------------------------------------------
// Analytic formulas
// ---------------------------------------------------------------------------

double lens_thickness(const OracleLensConfig &cfg) {
    if (cfg.aperture_radius >= cfg.sphere_radius)
        throw Error("GEOMETRY_INVALID", "aperture radius must be below the sphere radius");
    return 2.0 * std::sqrt(cfg.sphere_radius * cfg.sphere_radius -
                           cfg.aperture_radius * cfg.aperture_radius);
}

double focal_length(const OracleLensConfig &cfg) {
    if (cfg.refractive_index <= 1.0)
        throw Error("GEOMETRY_INVALID", "refractive index must exceed 1");
    const double rc = cfg.sphere_radius;
    const double eta = cfg.refractive_index;
    const double d = lens_thickness(cfg);
    const double inv = (eta - 1.0) * (2.0 / rc + (eta - 1.0) * d / (eta * rc * rc));
    return 1.0 / inv;
}

double focus_distance(const OracleLensConfig &cfg) {
    const double f = focal_length(cfg);
    if (cfg.image_plane_distance <= f)
        throw Error("NOT_FOCUSABLE", "image plane inside the focal length");
    return 1.0 / (1.0 / f - 1.0 / cfg.image_plane_distance);
}

double coc_radius_physical(const OracleLensConfig &cfg, double object_d) {
    const double f = focal_length(cfg);
    if (object_d <= f) throw Error("NOT_FOCUSABLE", "object inside the focal length");
    const double conj = 1.0 / (1.0 / f - 1.0 / object_d);
    return cfg.aperture_radius * std::abs(cfg.image_plane_distance - conj) / conj;
}

double calibrated_focal_length(const OracleLensConfig &cfg) {
    const double h = 1e-3 * cfg.sphere_radius;
    Vec3 origin{h, 0, 10.0 * cfg.sphere_radius};
    Vec3 dir{0, 0, -1};
    Vec3 o2, d2;
    if (!through_lens_reverse(cfg, origin, dir, o2, d2) || d2.x >= 0)
        throw Error("GEOMETRY_INVALID", "calibration ray did not converge");
    double t = -o2.x / d2.x; // axis crossing
    return -(o2.z + t * d2.z);
}

double calibrated_focus_distance(const OracleLensConfig &cfg) {
    const double f = calibrated_focal_length(cfg);
    if (cfg.image_plane_distance <= f)
        throw Error("NOT_FOCUSABLE", "image plane inside the focal length");
    return 1.0 / (1.0 / f - 1.0 / cfg.image_plane_distance);
}

double blur_scale_pixels(const OracleLensConfig &cfg) {
    return cfg.aperture_radius * cfg.resolution / (2.0 * tan_half_fov(cfg));
}

void validate(const OracleLensConfig &cfg) {
    if (cfg.sphere_radius <= 0 || cfg.aperture_radius < 0 ||
        cfg.aperture_radius >= cfg.sphere_radius)
        throw Error("GEOMETRY_INVALID", "need 0 <= aperture_radius < sphere_radius");
    if (cfg.refractive_index <= 1.0)
        throw Error("GEOMETRY_INVALID", "refractive index must exceed 1");
    if (cfg.fov_deg <= 0 || cfg.fov_deg >= 180)
        throw Error("GEOMETRY_INVALID", "fov must lie in (0, 180) degrees");
    if (cfg.resolution <= 0 || cfg.spp < 1)
        throw Error("GEOMETRY_INVALID", "resolution and spp must be positive");
    if (cfg.image_plane_distance <= focal_length(cfg))
        throw Error("NOT_FOCUSABLE", "image plane inside the focal length");
}

void validate(const BillboardScene &scene, const OracleLensConfig &cfg) {
    if (scene.billboards.empty())
        throw Error("GEOMETRY_INVALID", "billboard scene is empty");
    const double half_sep = 0.5 * lens_thickness(cfg);
    double prev = half_sep;
    for (const Billboard &bb : scene.billboards) {
        if (bb.color.channels() != 3 || bb.alpha.channels() != 1 ||
            !bb.color.same_extent(bb.alpha))
            throw Error("GEOMETRY_INVALID", "billboard texture must be RGB with matching alpha");
        if (bb.distance <= prev)
            throw Error("GEOMETRY_INVALID",
                        "billboard distances must increase and clear the lens");
        prev = bb.distance;
    }
    const ImageBuffer &back = scene.billboards.back().alpha;
    for (size_t i = 0; i < back.size(); ++i)
        if (back.data()[i] < 1.f - 1e-6f)
            throw Error("GEOMETRY_INVALID", "background billboard must be opaque");
}

// ---------------------------------------------------------------------------
// Tracing
// ---------------------------------------------------------------------------

std::array<float, 3> trace_pixel(const OracleLensConfig &cfg, const BillboardScene &scene,
                                 int px, int py) {
    const Vec3 sensor = sensor_point(cfg, px, py);
    const uint64_t pixel_id =
        static_cast<uint64_t>(py) * static_cast<uint64_t>(cfg.resolution) + px;
    // Stratify the largest square block of samples; the remainder stays plain
    // uniform so every spp count remains unbiased (a partial stratum row would
    // otherwise never cover the full unit square).
    const int strata = static_cast<int>(std::floor(std::sqrt(static_cast<double>(cfg.spp))));
    const int stratified = strata * strata;

    std::array<double, 3> sum{0, 0, 0};
    for (int s = 0; s < cfg.spp; ++s) {
        const double cell_x = s % strata, cell_y = (s / strata) % strata;
        std::array<double, 3> radiance{0, 0, 0};
        bool accepted = false;
        for (uint64_t attempt = 0; attempt < 64 && !accepted; ++attempt) {
            double u1, u2;
            if (attempt == 0 && s < stratified) {
                u1 = (cell_x + rng_u01(cfg.rng_seed, pixel_id, s, 0, 0)) / strata;
                u2 = (cell_y + rng_u01(cfg.rng_seed, pixel_id, s, 0, 1)) / strata;
            } else {
                u1 = rng_u01(cfg.rng_seed, pixel_id, s, attempt, 0);
                u2 = rng_u01(cfg.rng_seed, pixel_id, s, attempt, 1);
            }
            const double r = cfg.aperture_radius * std::sqrt(u1);
            const double phi = 2.0 * kPi * u2;
            const Vec3 target{r * std::cos(phi), r * std::sin(phi), 0.0};
            const Vec3 dir = normalize(target - sensor);
            Vec3 o2, d2;
            if (through_lens(cfg, sensor, dir, o2, d2)) {
                radiance = composite_along(cfg, scene, o2, d2);
                accepted = true;
            }
        }
        if (!accepted) // degenerate sample: fall back to the chief ray
            radiance = composite_along(cfg, scene, Vec3{},
                                       normalize(Vec3{-sensor.x, -sensor.y, -sensor.z}));
        for (int c = 0; c < 3; ++c) sum[c] += radiance[c];
    }
    return {static_cast<float>(sum[0] / cfg.spp), static_cast<float>(sum[1] / cfg.spp),
            static_cast<float>(sum[2] / cfg.spp)};
}

ImageBuffer trace_image(const OracleLensConfig &cfg, const BillboardScene &scene, int threads) {
    validate(cfg);
    validate(scene, cfg);
    ImageBuffer out(cfg.resolution, cfg.resolution, 3);
    parallel_for(0, cfg.resolution, threads, [&](int y) {
        for (int x = 0; x < cfg.resolution; ++x) {
            auto rgb = trace_pixel(cfg, scene, x, y);
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb[c];
        }
    });
    return out;
}

ImageBuffer pinhole_render(const OracleLensConfig &cfg, const BillboardScene &scene) {
    validate(scene, cfg);
    ImageBuffer out(cfg.resolution, cfg.resolution, 3);
    for (int y = 0; y < cfg.resolution; ++y)
        for (int x = 0; x < cfg.resolution; ++x) {
            double u = (x + 0.5) / cfg.resolution;
            double v = (y + 0.5) / cfg.resolution;
            double acc_a = 0;
            for (const Billboard &bb : scene.billboards) {
                double a = sample_bilinear(bb.alpha, u, v, 0);
                double k = (1 - acc_a) * a;
                for (int c = 0; c < 3; ++c)
                    out.at(x, y, c) += static_cast<float>(k * sample_bilinear(bb.color, u, v, c));
                acc_a += k;
                if (acc_a >= 1.0 - 1e-9) break;
            }
        }
    return out;
}

// ---------------------------------------------------------------------------
// Procedural assets
// ---------------------------------------------------------------------------

ImageBuffer make_texture(int width, int height, uint64_t seed) {
    auto u = [&](uint64_t i) { return to_u01(mix64(mix64(seed) ^ i)); };
    float base_a[3], base_b[3];
    for (int c = 0; c < 3; ++c) {
        base_a[c] = static_cast<float>(0.1 + 0.8 * u(c));
        base_b[c] = static_cast<float>(0.1 + 0.8 * u(16 + c));
    }
    ImageBuffer img(width, height, 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            float t = 0.5f * (static_cast<float>(x) / (width - 1) +
                              static_cast<float>(y) / (height - 1));
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = (1 - t) * base_a[c] + t * base_b[c];
        }
    const int disks = 6;
    const double edge = 3.0;
    for (int i = 0; i < disks; ++i) {
        double cx = u(100 + 8 * i) * width;
        double cy = u(101 + 8 * i) * height;
        double rad = (0.08 + 0.17 * u(102 + 8 * i)) * std::min(width, height);
        float col[3];
        for (int c = 0; c < 3; ++c) col[c] = static_cast<float>(0.05 + 0.9 * u(103 + 8 * i + c));
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                double m = std::clamp((rad - d) / edge, 0.0, 1.0);
                m = m * m * (3 - 2 * m) * 0.9;
                for (int c = 0; c < 3; ++c)
                    img.at(x, y, c) = static_cast<float>((1 - m) * img.at(x, y, c) + m * col[c]);
            }
    }
    for (size_t i = 0; i < img.size(); ++i)
        img.data()[i] = std::clamp(img.data()[i], 0.f, 1.f);
    return img;
}

ImageBuffer make_alpha_shape(int width, int height, uint64_t seed) {
    auto u = [&](uint64_t i) { return to_u01(mix64(mix64(seed ^ 0xA1FAull) ^ i)); };
    ImageBuffer a(width, height, 1);
    const double edge = 2.0;
    struct Disk {
        double cx, cy, rad;
    };
    Disk d0{(0.35 + 0.3 * u(0)) * width, (0.35 + 0.3 * u(1)) * height,
            (0.16 + 0.12 * u(2)) * std::min(width, height)};
    Disk d1{d0.cx + (u(3) - 0.5) * 0.3 * width, d0.cy + (u(4) - 0.5) * 0.3 * height,
            (0.10 + 0.10 * u(5)) * std::min(width, height)};
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double best = 0;
            for (const Disk &d : {d0, d1}) {
                double dist = std::hypot(x + 0.5 - d.cx, y + 0.5 - d.cy);
                double m = std::clamp((d.rad - dist) / edge + 0.5, 0.0, 1.0);
                best = std::max(best, m * m * (3 - 2 * m));
            }
            a.at(x, y) = static_cast<float>(best);
        }
    return a;
}

// ---------------------------------------------------------------------------
// Benchmark recipes and generation
// ---------------------------------------------------------------------------

namespace {

OracleLensConfig scene_config(const BenchmarkRecipe &recipe, const RecipeScene &sc) {
    OracleLensConfig cfg = recipe.base;
    cfg.aperture_radius = sc.aperture_radius;
    cfg.rng_seed = sc.seed;
    return cfg;
}

} // namespace

BenchmarkRecipe load_recipe(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("PARSE_ERROR", "cannot open " + path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception &e) {
        throw Error("PARSE_ERROR", std::string("invalid recipe JSON: ") + e.what());
    }
    BenchmarkRecipe r;
    try {
        r.base.sphere_radius = root.at("sphere_radius").get<double>();
        r.base.refractive_index = root.at("refractive_index").get<double>();
        r.base.image_plane_distance = root.at("image_plane_distance").get<double>();
        r.base.fov_deg = root.at("fov").get<double>();
        r.base.resolution = root.at("resolution").get<int>();
        r.base.spp = root.at("spp").get<int>();
        for (const json &js : root.at("scenes")) {
            RecipeScene sc;
            sc.name = js.at("name").get<std::string>();
            sc.aperture_radius = js.at("aperture_radius").get<double>();
            sc.seed = js.at("seed").get<uint64_t>();
            for (const json &jl : js.at("layers")) {
                RecipeLayer layer;
                layer.distance = jl.at("distance").get<double>();
                layer.texture_seed = jl.at("texture_seed").get<uint64_t>();
                layer.opaque = jl.value("opaque", false);
                sc.layers.push_back(layer);
            }
            if (sc.layers.empty()) throw Error("PARSE_ERROR", "scene has no layers");
            r.scenes.push_back(std::move(sc));
        }
    } catch (const json::exception &e) {
        throw Error("PARSE_ERROR", std::string("recipe field: ") + e.what());
    }
    if (r.scenes.empty()) throw Error("PARSE_ERROR", "recipe lists no scenes");
    return r;
}

void save_recipe(const fs::path &path, const BenchmarkRecipe &recipe) {
    json root;
    root["sphere_radius"] = recipe.base.sphere_radius;
    root["refractive_index"] = recipe.base.refractive_index;
    root["image_plane_distance"] = recipe.base.image_plane_distance;
    root["fov"] = recipe.base.fov_deg;
    root["resolution"] = recipe.base.resolution;
    root["spp"] = recipe.base.spp;
    json scenes = json::array();
    for (const RecipeScene &sc : recipe.scenes) {
        json js;
        js["name"] = sc.name;
        js["aperture_radius"] = sc.aperture_radius;
        js["seed"] = sc.seed;
        json layers = json::array();
        for (const RecipeLayer &layer : sc.layers) {
            json jl;
            jl["distance"] = layer.distance;
            jl["texture_seed"] = layer.texture_seed;
            jl["opaque"] = layer.opaque;
            layers.push_back(jl);
        }
        js["layers"] = layers;
        scenes.push_back(js);
    }
    root["scenes"] = scenes;
    std::ofstream out(path);
    if (!out) throw Error("IO_FAILURE", "cannot write " + path.string());
    out << root.dump(2) << "\n";
}

BenchmarkRecipe default_recipe(int scene_count, int resolution, int spp) {
    BenchmarkRecipe r;
    r.base.sphere_radius = 1.0;
    r.base.refractive_index = 1.5;
    r.base.image_plane_distance = 1.6;
    r.base.fov_deg = 30.0;
    r.base.resolution = resolution;
    r.base.spp = spp;

    // Apertures and disparity offsets (front above focus, back below) cycled
    // so blur radii and focal planes vary across scenes.
    const double apertures[] = {0.10, 0.14, 0.08, 0.12, 0.16};
    const double front_off[] = {0.20, 0.15, 0.25, 0.04, 0.12};
    const double back_off[] = {-0.15, -0.20, -0.10, -0.22, -0.25};

    for (int i = 0; i < scene_count; ++i) {
        RecipeScene sc;
        sc.name = "scene_" + std::string(i < 10 ? "00" : i < 100 ? "0" : "") + std::to_string(i);
        sc.aperture_radius = apertures[i % 5];
        sc.seed = 1000 + static_cast<uint64_t>(i);
        OracleLensConfig cfg = scene_config(r, sc);
        const double d_f = 1.0 / calibrated_focus_distance(cfg);
        RecipeLayer front, back;
        front.distance = 1.0 / (d_f + front_off[i % 5]);
        front.texture_seed = 10 * sc.seed + 1;
        front.opaque = false;
        back.distance = 1.0 / (d_f + back_off[i % 5]);
        back.texture_seed = 10 * sc.seed + 2;
        back.opaque = true;
        sc.layers = {front, back};
        r.scenes.push_back(std::move(sc));
    }
    return r;
}

void generate_benchmark(const BenchmarkRecipe &recipe, const fs::path &out_dir, int threads) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error("IO_FAILURE", "cannot create " + out_dir.string());

    for (const RecipeScene &sc : recipe.scenes) {
        OracleLensConfig cfg = scene_config(recipe, sc);
        validate(cfg);
        const int res = cfg.resolution;

        BillboardScene bscene;
        for (const RecipeLayer &rl : sc.layers) {
            Billboard bb;
            bb.color = make_texture(res, res, rl.texture_seed);
            bb.alpha = rl.opaque ? ImageBuffer(res, res, 1, 1.f)
                                 : make_alpha_shape(res, res, rl.texture_seed);
            bb.distance = rl.distance;
            bscene.billboards.push_back(std::move(bb));
        }

        const double focus_d = calibrated_focus_distance(cfg);
        LayeredScene layered;
        for (size_t i = 0; i < bscene.billboards.size(); ++i) {
            Layer layer;
            layer.color = bscene.billboards[i].color;
            layer.alpha = bscene.billboards[i].alpha;
            layer.disparity = ImageBuffer(
                res, res, 1, static_cast<float>(1.0 / bscene.billboards[i].distance));
            layered.layers.push_back(std::move(layer));
        }
        LensConfig lens;
        lens.focus_disparity = 1.0 / focus_d;
        lens.blur_scale = blur_scale_pixels(cfg);
        lens.mode = RenderMode::Soft;

        const fs::path dir = out_dir / sc.name;
        io::save_scene(dir, layered, lens);
        io::save_png(dir / "allfocus.png", pinhole_render(cfg, bscene));
        ImageBuffer gt = trace_image(cfg, bscene, threads);
        io::save_png(dir / "gt_bokeh.png", gt);
        io::save_pfm(dir / "gt_bokeh.pfm", gt);

        json prov;
        prov["sphere_radius"] = cfg.sphere_radius;
        prov["aperture_radius"] = cfg.aperture_radius;
        prov["refractive_index"] = cfg.refractive_index;
        prov["image_plane_distance"] = cfg.image_plane_distance;
        prov["fov"] = cfg.fov_deg;
        prov["resolution"] = cfg.resolution;
        prov["spp"] = cfg.spp;
        prov["seed"] = cfg.rng_seed;
        prov["focal_length_formula"] = focal_length(cfg);
        prov["focal_length_calibrated"] = calibrated_focal_length(cfg);
        prov["focus_distance"] = focus_d;
        prov["blur_scale"] = lens.blur_scale;
        json dists = json::array();
        for (const RecipeLayer &rl : sc.layers) dists.push_back(rl.distance);
        prov["distances"] = dists;
        std::ofstream out(dir / "provenance.json");
        if (!out) throw Error("IO_FAILURE", "cannot write provenance");
        out << prov.dump(2) << "\n";
    }
}

} // namespace bokeh::oracle
