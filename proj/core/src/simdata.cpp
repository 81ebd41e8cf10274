#include "convlr/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "convlr/binary_io.hpp"
#include "convlr/config.hpp"
#include "convlr/parallel.hpp"
#include "json.hpp"

namespace convlr {

namespace {

struct Ellipse {
    double cx, cy, a, b, angle, value;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool inside(const Ellipse& e, double u, double v) {
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    const double du = u - e.cx, dv = v - e.cy;
    const double xr = c * du + s * dv;
    const double yr = -s * du + c * dv;
    return (xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0;
}

std::vector<double> gaussian_blur(const std::vector<double>& img, std::size_t n, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    const int ni = static_cast<int>(n);
    std::vector<double> tmp(n * n, 0.0), out(n * n, 0.0);
    for (int y = 0; y < ni; ++y) {
        for (int x = 0; x < ni; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = x + i;
                if (xx >= 0 && xx < ni) acc += k[i + radius] * img[y * n + xx];
            }
            tmp[y * n + x] = acc;
        }
    }
    for (int y = 0; y < ni; ++y) {
        for (int x = 0; x < ni; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = y + i;
                if (yy >= 0 && yy < ni) acc += k[i + radius] * tmp[yy * n + x];
            }
            out[y * n + x] = acc;
        }
    }
    return out;
}

cplx bilinear(const ComplexImage& img, double px, double py) {
    const double fx = std::floor(px), fy = std::floor(py);
    const double ax = px - fx, ay = py - fy;
    const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
    auto at = [&img](long x, long y) -> cplx {
        if (x < 0 || y < 0 || x >= static_cast<long>(img.width()) || y >= static_cast<long>(img.height())) return 0.0;
        return img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
    };
    cplx v = at(x0, y0) * ((1 - ax) * (1 - ay));
    if (ax != 0.0) v += at(x0 + 1, y0) * (ax * (1 - ay));
    if (ay != 0.0) v += at(x0, y0 + 1) * ((1 - ax) * ay);
    if (ax != 0.0 && ay != 0.0) v += at(x0 + 1, y0 + 1) * (ax * ay);
    return v;
}

struct RigidTransform {
    double theta = 0.0;  // radians
    double sx = 0.0, sy = 0.0;
    double cx = 0.0, cy = 0.0;

    std::array<double, 2> forward(double x, double y) const {
        const double c = std::cos(theta), s = std::sin(theta);
        const double dx = x - cx, dy = y - cy;
        return {c * dx - s * dy + cx + sx, s * dx + c * dy + cy + sy};
    }
    std::array<double, 2> inverse(double x, double y) const {
        const double c = std::cos(theta), s = std::sin(theta);
        const double dx = x - cx - sx, dy = y - cy - sy;
        return {c * dx + s * dy + cx, -s * dx + c * dy + cy};
    }
};

ComplexImage warp(const ComplexImage& img, const RigidTransform& tf) {
    ComplexImage out(img.width(), img.height());
    for (std::size_t y = 0; y < img.height(); ++y) {
        for (std::size_t x = 0; x < img.width(); ++x) {
            const auto p = tf.inverse(static_cast<double>(x), static_cast<double>(y));
            out.at(x, y) = bilinear(img, p[0], p[1]);
        }
    }
    return out;
}

RoiBox warp_roi(const RoiBox& roi, const RigidTransform& tf) {
    const double grow = tf.theta == 0.0 ? 0.0 : 1.0;
    const double xs[2] = {roi.x0 - grow, roi.x1 + grow};
    const double ys[2] = {roi.y0 - grow, roi.y1 + grow};
    double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
    for (double x : xs) {
        for (double y : ys) {
            const auto q = tf.forward(x, y);
            minx = std::min(minx, q[0]);
            maxx = std::max(maxx, q[0]);
            miny = std::min(miny, q[1]);
            maxy = std::max(maxy, q[1]);
        }
    }
    // Snap values that are integral up to rounding noise.
    auto snap_floor = [](double v) { return static_cast<int>(std::floor(v + 1e-9)); };
    auto snap_ceil = [](double v) { return static_cast<int>(std::ceil(v - 1e-9)); };
    return RoiBox{snap_floor(minx), snap_floor(miny), snap_ceil(maxx), snap_ceil(maxy)};
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

nlohmann::json params_to_json(const InterventionParams& p) {
    return {{"entry", p.entry},
            {"direction", p.direction},
            {"tip_depth", p.tip_depth},
            {"width", p.width},
            {"intensity_scale", p.intensity_scale}};
}

InterventionParams params_from_json(const nlohmann::json& j) {
    InterventionParams p;
    p.entry = j.at("entry").get<std::array<double, 2>>();
    p.direction = j.at("direction").get<std::array<double, 2>>();
    p.tip_depth = j.at("tip_depth").get<std::vector<double>>();
    p.width = j.at("width").get<double>();
    p.intensity_scale = j.at("intensity_scale").get<double>();
    return p;
}

}  // namespace

void InterventionParams::validate() const {
    if (!(width >= 1.0)) throw std::invalid_argument("intervention: width must be >= 1 pixel");
    if (!(intensity_scale >= 0.0 && intensity_scale < 1.0)) {
        throw std::invalid_argument("intervention: intensity_scale must lie in [0, 1)");
    }
    const double norm = std::hypot(direction[0], direction[1]);
    if (std::abs(norm - 1.0) > 1e-9) throw std::invalid_argument("intervention: direction must be a unit vector");
    for (std::size_t t = 0; t < tip_depth.size(); ++t) {
        if (tip_depth[t] < 0.0) throw std::invalid_argument("intervention: negative tip depth");
        if (t > 0 && tip_depth[t] < tip_depth[t - 1]) {
            throw std::invalid_argument("intervention: tip depth must be non-decreasing");
        }
    }
}

ComplexImage generate_reference_phantom(std::uint64_t seed, std::size_t size) {
    if (size == 0 || size % 2 != 0) throw std::invalid_argument("phantom: size must be even and positive");
    std::mt19937_64 rng(seed);
    std::vector<Ellipse> ellipses;
    const double ha = uniform(rng, 0.74, 0.84);
    const double hb = uniform(rng, 0.84, 0.92);
    const double tilt = uniform(rng, -0.15, 0.15);
    ellipses.push_back({0.0, 0.0, ha, hb, tilt, 0.85});
    ellipses.push_back({0.0, -0.015, 0.88 * ha, 0.9 * hb, tilt, -0.55});
    const int structures = std::uniform_int_distribution<int>(4, 8)(rng);
    for (int i = 0; i < structures; ++i) {
        const double r = uniform(rng, 0.0, 0.55);
        const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        Ellipse e;
        e.cx = r * ha * std::cos(phi);
        e.cy = r * hb * std::sin(phi);
        e.a = uniform(rng, 0.06, 0.24);
        e.b = uniform(rng, 0.06, 0.24);
        e.angle = uniform(rng, 0.0, std::numbers::pi);
        e.value = uniform(rng, -0.2, 0.45);
        ellipses.push_back(e);
    }

    constexpr int kSuper = 4;
    const double n = static_cast<double>(size);
    std::vector<double> img(size * size, 0.0);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            double acc = 0.0;
            for (int sy = 0; sy < kSuper; ++sy) {
                for (int sx = 0; sx < kSuper; ++sx) {
                    const double u = 2.0 * (static_cast<double>(x) + (sx + 0.5) / kSuper) / n - 1.0;
                    const double v = 2.0 * (static_cast<double>(y) + (sy + 0.5) / kSuper) / n - 1.0;
                    double val = 0.0;
                    for (const auto& e : ellipses) {
                        if (inside(e, u, v)) val += e.value;
                    }
                    acc += std::clamp(val, 0.0, 1.0);
                }
            }
            img[y * size + x] = acc / (kSuper * kSuper);
        }
    }
    img = gaussian_blur(img, size, 0.7);
    ComplexImage out(size, size);
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = std::clamp(img[i], 0.0, 1.0);
    return out;
}

double feature_coverage(const InterventionParams& p, double depth, double x, double y) {
    if (depth <= 0.0) return 0.0;
    const double rx = x - p.entry[0];
    const double ry = y - p.entry[1];
    const double along = rx * p.direction[0] + ry * p.direction[1];
    const double across = std::abs(rx * p.direction[1] - ry * p.direction[0]);
    const double radial = std::clamp(p.width / 2.0 + 0.5 - across, 0.0, 1.0);
    const double axial = std::clamp(std::min(along, depth - along) + 0.5, 0.0, 1.0);
    return radial * axial;
}

ComplexImage render_intervention_frame(const ComplexImage& ref, const InterventionParams& params, std::size_t t) {
    params.validate();
    if (t >= params.tip_depth.size()) throw std::out_of_range("render_intervention_frame: frame index out of range");
    const double depth = params.tip_depth[t];
    const double w = static_cast<double>(ref.width()) - 1.0;
    const double h = static_cast<double>(ref.height()) - 1.0;
    const double tip_x = params.entry[0] + depth * params.direction[0];
    const double tip_y = params.entry[1] + depth * params.direction[1];
    auto in_bounds = [w, h](double x, double y) { return x >= 0.0 && y >= 0.0 && x <= w && y <= h; };
    if (!in_bounds(params.entry[0], params.entry[1]) || !in_bounds(tip_x, tip_y)) {
        throw std::out_of_range("render_intervention_frame: feature segment leaves the image");
    }
    ComplexImage out = ref;
    if (depth <= 0.0) return out;
    for (std::size_t y = 0; y < ref.height(); ++y) {
        for (std::size_t x = 0; x < ref.width(); ++x) {
            const double cov = feature_coverage(params, depth, static_cast<double>(x), static_cast<double>(y));
            if (cov > 0.0) out.at(x, y) = ref.at(x, y) * (1.0 - cov * (1.0 - params.intensity_scale));
        }
    }
    return out;
}

RoiBox feature_roi(const InterventionParams& params, std::size_t width, std::size_t height, int margin) {
    const double depth = params.tip_depth.empty() ? 0.0 : params.tip_depth.back();
    const double dx = params.direction[0], dy = params.direction[1];
    const double nx = -dy, ny = dx;
    const double hw = params.width / 2.0 + 0.5;
    const double along[2] = {-0.5, depth + 0.5};
    double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
    for (double a : along) {
        for (double side : {-hw, hw}) {
            const double px = params.entry[0] + a * dx + side * nx;
            const double py = params.entry[1] + a * dy + side * ny;
            minx = std::min(minx, px);
            maxx = std::max(maxx, px);
            miny = std::min(miny, py);
            maxy = std::max(maxy, py);
        }
    }
    RoiBox roi{static_cast<int>(std::floor(minx)) - margin, static_cast<int>(std::floor(miny)) - margin,
               static_cast<int>(std::ceil(maxx)) + margin, static_cast<int>(std::ceil(maxy)) + margin};
    roi.x0 = std::max(roi.x0, 0);
    roi.y0 = std::max(roi.y0, 0);
    roi.x1 = std::min(roi.x1, static_cast<int>(width) - 1);
    roi.y1 = std::min(roi.y1, static_cast<int>(height) - 1);
    return roi;
}

double sampling_unit(std::size_t size) noexcept { return static_cast<double>(size) / 32.0; }

int scaled_roi_margin(const InterventionSampling& sampling, std::size_t size) noexcept {
    return std::max(1, static_cast<int>(std::lround(sampling.roi_margin * sampling_unit(size))));
}

InterventionParams sample_intervention(std::uint64_t seed, std::size_t size, std::size_t frames,
                                       const InterventionSampling& sampling) {
    if (frames == 0) throw std::invalid_argument("sample_intervention: need at least one frame");
    std::mt19937_64 rng(mix_seed(seed, 0x1A7E));
    const double n = static_cast<double>(size);
    const double c = (n - 1.0) / 2.0;
    const double unit = sampling_unit(size);
    for (int attempt = 0; attempt < 64; ++attempt) {
        InterventionParams p;
        p.width = std::max(1.0, sampling.width * unit);
        p.intensity_scale = sampling.intensity_scale;
        const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double rho = uniform(rng, 0.20, 0.28) * n;
        p.entry = {c + rho * std::cos(phi), c + rho * std::sin(phi)};
        const double heading = std::atan2(c - p.entry[1], c - p.entry[0]) + uniform(rng, -0.26, 0.26);
        p.direction = {std::cos(heading), std::sin(heading)};
        double depth = uniform(rng, 2.0, 4.0) * unit;
        for (std::size_t t = 0; t < frames; ++t) {
            if (t > 0) depth += uniform(rng, sampling.step_min, sampling.step_max) * unit;
            p.tip_depth.push_back(depth);
        }
        const double tip_x = p.entry[0] + depth * p.direction[0];
        const double tip_y = p.entry[1] + depth * p.direction[1];
        const double lo = 1.0, hi = n - 2.0;
        if (tip_x >= lo && tip_x <= hi && tip_y >= lo && tip_y <= hi) return p;
    }
    throw std::runtime_error("sample_intervention: could not place the feature inside the image");
}

FrameSequence generate_sequence(std::uint64_t seed, std::size_t size, std::size_t frames,
                                const InterventionSampling& sampling) {
    FrameSequence seq;
    seq.seed = seed;
    seq.reference = generate_reference_phantom(seed, size);
    seq.params = sample_intervention(seed, size, frames, sampling);
    seq.frames.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) seq.frames.push_back(render_intervention_frame(seq.reference, seq.params, t));
    seq.roi = feature_roi(seq.params, size, size, scaled_roi_margin(sampling, size));
    return seq;
}

FrameSequence augment_sequence(const FrameSequence& seq, std::uint64_t seed, const AugmentConfig& cfg) {
    if (seq.frames.empty()) throw std::invalid_argument("augment_sequence: empty sequence");
    const auto w = seq.reference.width();
    const auto h = seq.reference.height();
    std::mt19937_64 rng(mix_seed(seed, 0xA06));
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        RigidTransform tf;
        tf.cx = (static_cast<double>(w) - 1.0) / 2.0;
        tf.cy = (static_cast<double>(h) - 1.0) / 2.0;
        if (cfg.max_rotation_deg > 0.0) {
            tf.theta = uniform(rng, -cfg.max_rotation_deg, cfg.max_rotation_deg) * std::numbers::pi / 180.0;
        }
        if (cfg.max_shift_px > 0) {
            std::uniform_int_distribution<int> shift(-cfg.max_shift_px, cfg.max_shift_px);
            tf.sx = shift(rng);
            tf.sy = shift(rng);
        }
        const RoiBox roi = warp_roi(seq.roi, tf);
        if (!roi.inside(w, h)) continue;

        FrameSequence out;
        out.seed = seq.seed;
        out.roi = roi;
        out.reference = warp(seq.reference, tf);
        for (const auto& f : seq.frames) out.frames.push_back(warp(f, tf));
        out.params = seq.params;
        out.params.entry = tf.forward(seq.params.entry[0], seq.params.entry[1]);
        const double c = std::cos(tf.theta), s = std::sin(tf.theta);
        out.params.direction = {c * seq.params.direction[0] - s * seq.params.direction[1],
                                s * seq.params.direction[0] + c * seq.params.direction[1]};
        return out;
    }
    throw std::runtime_error("augment_sequence: no transform kept the ROI inside the image after " +
                             std::to_string(cfg.max_attempts) + " attempts");
}

void DatasetConfig::validate() const {
    if (image_size == 0 || image_size % 2 != 0) throw std::invalid_argument("dataset: image_size must be even");
    if (frames == 0) throw std::invalid_argument("dataset: frames must be >= 1");
    if (spokes.empty()) throw std::invalid_argument("dataset: need at least one spoke count");
    for (auto s : spokes) {
        if (s == 0) throw std::invalid_argument("dataset: spoke counts must be >= 1");
    }
    if (readout() < 2 || readout() % 2 != 0) throw std::invalid_argument("dataset: n_readout must be even");
    if (noise_std < 0.0) throw std::invalid_argument("dataset: noise_std must be >= 0");
    if (augmentation.max_rotation_deg < 0.0 || augmentation.max_shift_px < 0 || augmentation.max_attempts < 1) {
        throw std::invalid_argument("dataset: invalid augmentation ranges");
    }
    struct Range {
        const char* name;
        std::uint64_t lo, n;
    };
    const Range ranges[] = {{"train", train_seed_start, n_train}, {"val", val_seed_start, n_val},
                            {"test", test_seed_start, n_test}};
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
            const auto& a = ranges[i];
            const auto& b = ranges[j];
            if (a.n == 0 || b.n == 0) continue;
            if (a.lo < b.lo + b.n && b.lo < a.lo + a.n) {
                throw std::invalid_argument(std::string("dataset: seed ranges of ") + a.name + " and " + b.name +
                                            " overlap");
            }
        }
    }
}

std::uint64_t frame_start_index(const DatasetConfig& cfg, std::size_t n_spokes, std::size_t t) noexcept {
    return cfg.continue_angles ? static_cast<std::uint64_t>(t) * n_spokes : 0;
}

FrameSequence make_dataset_sequence(const DatasetConfig& cfg, std::uint64_t seed) {
    auto seq = generate_sequence(seed, cfg.image_size, cfg.frames, cfg.intervention);
    if (!cfg.augment) return seq;
    // A feature too close to the border can leave no admissible transform;
    // redraw the intervention on the same phantom a bounded number of times.
    constexpr int kRedraws = 8;
    for (int k = 1;; ++k) {
        try {
            return augment_sequence(seq, seed, cfg.augmentation);
        } catch (const std::runtime_error&) {
            if (k > kRedraws) throw;
        }
        seq.params = sample_intervention(mix_seed(seed, 0xD0 + static_cast<std::uint64_t>(k)), cfg.image_size,
                                         cfg.frames, cfg.intervention);
        for (std::size_t t = 0; t < cfg.frames; ++t) {
            seq.frames[t] = render_intervention_frame(seq.reference, seq.params, t);
        }
        seq.roi = feature_roi(seq.params, cfg.image_size, cfg.image_size, scaled_roi_margin(cfg.intervention, cfg.image_size));
    }
}

KSpaceData acquire_frame(const DatasetConfig& cfg, const ComplexImage& frame, std::uint64_t seed,
                         std::size_t n_spokes, std::size_t t) {
    auto traj = golden_angle_trajectory(n_spokes, cfg.readout(), frame_start_index(cfg, n_spokes, t));
    auto data = nudft_forward(frame, traj);
    add_complex_noise(data, cfg.noise_std, mix_seed(mix_seed(seed, n_spokes), t));
    return data;
}

std::string sequence_id(std::uint64_t seed) {
    std::ostringstream os;
    os << "seq_" << std::setw(7) << std::setfill('0') << seed;
    return os.str();
}

std::filesystem::path frame_path(const std::filesystem::path& dir, const std::string& id, std::size_t t) {
    return dir / id / ("frame_" + std::to_string(t) + ".img");
}

std::filesystem::path kspace_path(const std::filesystem::path& dir, const std::string& id, std::size_t n_spokes,
                                  std::size_t t) {
    return dir / id / ("ksp_s" + std::to_string(n_spokes) + "_t" + std::to_string(t) + ".ksp");
}

DatasetManifest build_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir, std::size_t threads) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw std::runtime_error("build_dataset: cannot create directory " + dir.string());
    }

    DatasetManifest manifest;
    manifest.config = cfg;
    std::vector<std::uint64_t> seeds;
    auto add_split = [&seeds](std::vector<std::string>& ids, std::uint64_t start, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            ids.push_back(sequence_id(start + i));
            seeds.push_back(start + i);
        }
    };
    add_split(manifest.train, cfg.train_seed_start, cfg.n_train);
    add_split(manifest.val, cfg.val_seed_start, cfg.n_val);
    add_split(manifest.test, cfg.test_seed_start, cfg.n_test);

    parallel_for(seeds.size(), threads, [&](std::size_t i) {
        const std::uint64_t seed = seeds[i];
        const std::string id = sequence_id(seed);
        const auto seq = make_dataset_sequence(cfg, seed);
        const auto seq_dir = dir / id;
        std::filesystem::create_directories(seq_dir);
        write_image(seq_dir / "reference.img", seq.reference);
        for (std::size_t t = 0; t < seq.frames.size(); ++t) {
            write_image(frame_path(dir, id, t), seq.frames[t]);
            for (auto s : cfg.spokes) write_kspace(kspace_path(dir, id, s, t), acquire_frame(cfg, seq.frames[t], seed, s, t));
        }
        nlohmann::json meta = {{"seed", seed},
                               {"frames", seq.frames.size()},
                               {"roi", {seq.roi.x0, seq.roi.y0, seq.roi.x1, seq.roi.y1}},
                               {"intervention", params_to_json(seq.params)}};
        write_text(seq_dir / "meta.json", meta.dump(2) + "\n");
    });

    nlohmann::json j = {{"format_version", manifest.format_version},
                        {"config", dataset_config_to_json(cfg)},
                        {"counts", {{"train", cfg.n_train}, {"val", cfg.n_val}, {"test", cfg.n_test}}},
                        {"seed_ranges",
                         {{"train", {cfg.train_seed_start, cfg.train_seed_start + cfg.n_train}},
                          {"val", {cfg.val_seed_start, cfg.val_seed_start + cfg.n_val}},
                          {"test", {cfg.test_seed_start, cfg.test_seed_start + cfg.n_test}}}},
                        {"splits", {{"train", manifest.train}, {"val", manifest.val}, {"test", manifest.test}}}};
    write_text(dir / "manifest.json", j.dump(2) + "\n");
    return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("no manifest.json in " + dir.string());
    nlohmann::json j;
    in >> j;
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != 1) throw std::runtime_error("unsupported dataset format_version");
    m.config = dataset_config_from_json(j.at("config"));
    m.train = j.at("splits").at("train").get<std::vector<std::string>>();
    m.val = j.at("splits").at("val").get<std::vector<std::string>>();
    m.test = j.at("splits").at("test").get<std::vector<std::string>>();
    return m;
}

FrameSequence load_sequence(const std::filesystem::path& dir, const std::string& id) {
    std::ifstream in(dir / id / "meta.json");
    if (!in) throw std::runtime_error("missing meta.json for " + id);
    nlohmann::json meta;
    in >> meta;
    FrameSequence seq;
    seq.seed = meta.at("seed").get<std::uint64_t>();
    const auto roi = meta.at("roi").get<std::array<int, 4>>();
    seq.roi = RoiBox{roi[0], roi[1], roi[2], roi[3]};
    seq.params = params_from_json(meta.at("intervention"));
    seq.reference = read_image(dir / id / "reference.img");
    const auto frames = meta.at("frames").get<std::size_t>();
    for (std::size_t t = 0; t < frames; ++t) seq.frames.push_back(read_image(frame_path(dir, id, t)));
    return seq;
}

KSpaceData load_frame_kspace(const std::filesystem::path& dir, const std::string& id, std::size_t n_spokes,
                             std::size_t t) {
    return read_kspace(kspace_path(dir, id, n_spokes, t));
}

}  // namespace convlr
