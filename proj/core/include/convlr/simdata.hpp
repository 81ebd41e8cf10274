#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "convlr/image.hpp"
#include "convlr/kspace.hpp"

namespace convlr {

struct InterventionParams {
    std::array<double, 2> entry{};      // pixel coordinates (x, y)
    std::array<double, 2> direction{};  // unit vector
    std::vector<double> tip_depth;      // per frame, pixels, non-decreasing
    double width = 1.5;                 // pixels, >= 1
    double intensity_scale = 0.15;      // in [0, 1)

    void validate() const;
};

struct FrameSequence {
    ComplexImage reference;
    std::vector<ComplexImage> frames;
    RoiBox roi;
    InterventionParams params;
    std::uint64_t seed = 0;

    std::size_t frame_count() const noexcept { return frames.size(); }
};

/// Ellipse head phantom with 4-8 random internal structures, magnitude in [0, 1].
ComplexImage generate_reference_phantom(std::uint64_t seed, std::size_t size);

/// Fraction of pixel (x, y) covered by the cannula at depth `depth` (0 when depth <= 0).
double feature_coverage(const InterventionParams& params, double depth, double x, double y);

/// Copy of `ref` with the hypointense cannula drawn to tip_depth[t].
ComplexImage render_intervention_frame(const ComplexImage& ref, const InterventionParams& params, std::size_t t);

/// Tight box around every pixel the feature can touch over all frames, dilated by `margin`.
RoiBox feature_roi(const InterventionParams& params, std::size_t width, std::size_t height, int margin = 4);

/// Lengths are in pixels of a 32x32 image and scale linearly with image size.
struct InterventionSampling {
    double intensity_scale = 0.15;
    double width = 1.5;     // at least one pixel after scaling
    double step_min = 1.0;  // per-frame tip advance
    double step_max = 3.0;
    int roi_margin = 4;     // at least one pixel after scaling
};

/// Image size / 32, the factor applied to InterventionSampling lengths.
double sampling_unit(std::size_t size) noexcept;
int scaled_roi_margin(const InterventionSampling& sampling, std::size_t size) noexcept;

/// Draws intervention parameters for a `frames`-long sequence on an image of `size`.
InterventionParams sample_intervention(std::uint64_t seed, std::size_t size, std::size_t frames,
                                       const InterventionSampling& sampling = {});

/// Reference phantom plus T rendered frames and ROI, before augmentation.
FrameSequence generate_sequence(std::uint64_t seed, std::size_t size, std::size_t frames,
                                const InterventionSampling& sampling = {});

struct AugmentConfig {
    double max_rotation_deg = 10.0;
    int max_shift_px = 4;
    int max_attempts = 16;
};

/// Same random rigid transform (rotation, integer shift) applied to the
/// reference, every frame and the ROI box. Bilinear, zero fill.
FrameSequence augment_sequence(const FrameSequence& seq, std::uint64_t seed, const AugmentConfig& cfg = {});

struct DatasetConfig {
    std::size_t image_size = 32;
    std::size_t frames = 5;
    std::size_t n_train = 100;
    std::size_t n_val = 20;
    std::size_t n_test = 20;
    std::uint64_t train_seed_start = 1000;
    std::uint64_t val_seed_start = 500000;
    std::uint64_t test_seed_start = 900000;
    std::vector<std::size_t> spokes{4, 8, 16, 32};
    std::size_t n_readout = 0;  // 0 = 2 * image_size
    double noise_std = 0.0;
    bool continue_angles = true;  // frame t starts at global spoke t * n_spokes
    bool augment = true;
    AugmentConfig augmentation{};
    InterventionSampling intervention{};

    std::size_t readout() const noexcept { return n_readout ? n_readout : 2 * image_size; }
    void validate() const;
};

/// Golden-angle start index for frame t.
std::uint64_t frame_start_index(const DatasetConfig& cfg, std::size_t n_spokes, std::size_t t) noexcept;

/// Fully processed sequence for one seed (generation + augmentation).
FrameSequence make_dataset_sequence(const DatasetConfig& cfg, std::uint64_t seed);

/// Acquires one frame of the sequence at `n_spokes` with the dataset's noise settings.
KSpaceData acquire_frame(const DatasetConfig& cfg, const ComplexImage& frame, std::uint64_t seed,
                         std::size_t n_spokes, std::size_t t);

struct DatasetManifest {
    int format_version = 1;
    DatasetConfig config;
    std::vector<std::string> train, val, test;
};

std::string sequence_id(std::uint64_t seed);

/// Writes the dataset tree and manifest.json into `dir`; returns the manifest.
DatasetManifest build_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir, std::size_t threads = 1);

DatasetManifest load_manifest(const std::filesystem::path& dir);

FrameSequence load_sequence(const std::filesystem::path& dir, const std::string& id);
KSpaceData load_frame_kspace(const std::filesystem::path& dir, const std::string& id, std::size_t n_spokes,
                             std::size_t t);

std::filesystem::path kspace_path(const std::filesystem::path& dir, const std::string& id, std::size_t n_spokes,
                                  std::size_t t);
std::filesystem::path frame_path(const std::filesystem::path& dir, const std::string& id, std::size_t t);

}  // namespace convlr
