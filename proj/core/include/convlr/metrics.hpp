#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convlr/image.hpp"

namespace convlr {

struct MetricOptions {
    double c1 = 1e-4;  // (0.01 * L)^2 with dynamic range L = 1
    double c2 = 9e-4;  // (0.03 * L)^2
    bool windowed_ssim = false;
    std::size_t ssim_window = 7;
    bool squared_nmse = false;

    void validate() const;
};

/// Single-statistic SSIM from global means, variances and covariance.
double ssim(std::span<const double> rec, std::span<const double> gt, const MetricOptions& opts = {});
/// Mean SSIM over all fully contained square windows (stride 1).
double ssim_windowed(std::span<const double> rec, std::span<const double> gt, std::size_t width,
                     std::size_t height, const MetricOptions& opts = {});

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(max(gt)^2 / MSE); kInfinitePsnr when MSE is zero.
double psnr(std::span<const double> rec, std::span<const double> gt);

/// ||rec - gt|| / ||gt|| (squared ratio when requested).
double nmse(std::span<const double> rec, std::span<const double> gt, bool squared = false);

struct LocalMetrics {
    double ssim = 0.0;
    double nmse = 0.0;
};

LocalMetrics local_metrics(std::span<const double> rec, std::span<const double> gt, std::size_t width,
                           std::size_t height, const RoiBox& roi, const MetricOptions& opts = {});

/// Magnitudes of both images divided by max |gt|.
std::pair<std::vector<double>, std::vector<double>> normalized_magnitudes(const ComplexImage& rec,
                                                                          const ComplexImage& gt);

inline constexpr const char* kNormalizationNote =
    "magnitude images; rec and gt both divided by max |gt|";

struct FrameMetrics {
    std::string method;
    std::size_t spokes = 0;
    std::size_t frames = 0;  // sequence length T of the run
    std::string sequence;
    std::size_t frame = 0;
    double ssim = 0.0;
    double psnr = 0.0;
    double nmse = 0.0;
    double local_ssim = 0.0;
    double local_nmse = 0.0;
};

FrameMetrics evaluate_frame(const ComplexImage& rec, const ComplexImage& gt, const RoiBox& roi,
                            const MetricOptions& opts = {});

struct Stat {
    double mean = 0.0;
    double std = 0.0;  // population
};

struct ReportCell {
    std::string method;
    std::size_t spokes = 0;
    std::size_t frames = 0;
    std::size_t count = 0;
    Stat ssim, psnr, nmse, local_ssim, local_nmse;
};

struct MetricReport {
    std::vector<ReportCell> cells;  // ordered by (spokes, method, frames)
    std::vector<FrameMetrics> items;
};

Stat mean_std(std::span<const double> values);

MetricReport aggregate_report(std::vector<FrameMetrics> items);

std::string report_csv(const MetricReport& report);
std::string report_json(const MetricReport& report);

}  // namespace convlr
