#include "convlr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace convlr {

namespace {

void require_same(std::span<const double> a, std::span<const double> b, const char* who) {
    if (a.size() != b.size()) throw std::invalid_argument(std::string(who) + ": size mismatch");
    if (a.empty()) throw std::invalid_argument(std::string(who) + ": empty input");
}

double ssim_from_stats(double mx, double my, double vx, double vy, double cxy, const MetricOptions& o) {
    return ((2.0 * mx * my + o.c1) * (2.0 * cxy + o.c2)) / ((mx * mx + my * my + o.c1) * (vx + vy + o.c2));
}

}  // namespace

void MetricOptions::validate() const {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw std::invalid_argument("metrics: SSIM constants must be positive");
    if (ssim_window == 0) throw std::invalid_argument("metrics: ssim_window must be >= 1");
}

double ssim(std::span<const double> rec, std::span<const double> gt, const MetricOptions& opts) {
    require_same(rec, gt, "ssim");
    const double n = static_cast<double>(rec.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        mx += rec[i];
        my += gt[i];
    }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0, cxy = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const double dx = rec[i] - mx, dy = gt[i] - my;
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    return ssim_from_stats(mx, my, vx / n, vy / n, cxy / n, opts);
}

double ssim_windowed(std::span<const double> rec, std::span<const double> gt, std::size_t width,
                     std::size_t height, const MetricOptions& opts) {
    require_same(rec, gt, "ssim_windowed");
    if (rec.size() != width * height) throw std::invalid_argument("ssim_windowed: raster size mismatch");
    const std::size_t win = std::min({opts.ssim_window, width, height});
    double total = 0.0;
    std::size_t count = 0;
    std::vector<double> a(win * win), b(win * win);
    for (std::size_t y0 = 0; y0 + win <= height; ++y0) {
        for (std::size_t x0 = 0; x0 + win <= width; ++x0) {
            for (std::size_t y = 0; y < win; ++y) {
                for (std::size_t x = 0; x < win; ++x) {
                    a[y * win + x] = rec[(y0 + y) * width + x0 + x];
                    b[y * win + x] = gt[(y0 + y) * width + x0 + x];
                }
            }
            total += ssim(a, b, opts);
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double psnr(std::span<const double> rec, std::span<const double> gt) {
    require_same(rec, gt, "psnr");
    double mse = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const double d = rec[i] - gt[i];
        mse += d * d;
    }
    mse /= static_cast<double>(rec.size());
    if (mse == 0.0) return kInfinitePsnr;
    const double peak = *std::max_element(gt.begin(), gt.end());
    return 10.0 * std::log10(peak * peak / mse);
}

double nmse(std::span<const double> rec, std::span<const double> gt, bool squared) {
    require_same(rec, gt, "nmse");
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const double d = rec[i] - gt[i];
        err += d * d;
        ref += gt[i] * gt[i];
    }
    if (!(ref > 0.0)) throw std::invalid_argument("nmse: ground truth has zero norm");
    return squared ? err / ref : std::sqrt(err) / std::sqrt(ref);
}

LocalMetrics local_metrics(std::span<const double> rec, std::span<const double> gt, std::size_t width,
                           std::size_t height, const RoiBox& roi, const MetricOptions& opts) {
    require_same(rec, gt, "local_metrics");
    if (rec.size() != width * height) throw std::invalid_argument("local_metrics: raster size mismatch");
    if (!roi.inside(width, height)) throw std::invalid_argument("local_metrics: roi out of bounds");
    const auto a = crop(rec, width, roi);
    const auto b = crop(gt, width, roi);
    LocalMetrics m;
    m.ssim = opts.windowed_ssim ? ssim_windowed(a, b, static_cast<std::size_t>(roi.width()),
                                                static_cast<std::size_t>(roi.height()), opts)
                                : ssim(a, b, opts);
    m.nmse = nmse(a, b, opts.squared_nmse);
    return m;
}

std::pair<std::vector<double>, std::vector<double>> normalized_magnitudes(const ComplexImage& rec,
                                                                          const ComplexImage& gt) {
    if (!rec.same_shape(gt)) throw std::invalid_argument("normalized_magnitudes: shape mismatch");
    auto r = rec.magnitude();
    auto g = gt.magnitude();
    const double peak = g.empty() ? 0.0 : *std::max_element(g.begin(), g.end());
    if (!(peak > 0.0)) throw std::invalid_argument("normalized_magnitudes: ground truth is all zero");
    for (auto& v : r) v /= peak;
    for (auto& v : g) v /= peak;
    return {std::move(r), std::move(g)};
}

FrameMetrics evaluate_frame(const ComplexImage& rec, const ComplexImage& gt, const RoiBox& roi,
                            const MetricOptions& opts) {
    const auto [r, g] = normalized_magnitudes(rec, gt);
    FrameMetrics m;
    m.ssim = opts.windowed_ssim ? ssim_windowed(r, g, gt.width(), gt.height(), opts) : ssim(r, g, opts);
    m.psnr = psnr(r, g);
    m.nmse = nmse(r, g, opts.squared_nmse);
    const auto local = local_metrics(r, g, gt.width(), gt.height(), roi, opts);
    m.local_ssim = local.ssim;
    m.local_nmse = local.nmse;
    return m;
}

Stat mean_std(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean_std: empty input");
    const auto infinite = std::count_if(values.begin(), values.end(), [](double v) { return std::isinf(v); });
    if (infinite > 0) {
        // PSNR of exact reconstructions; mean is infinite, spread only if mixed.
        return {kInfinitePsnr, infinite == static_cast<std::ptrdiff_t>(values.size()) ? 0.0 : kInfinitePsnr};
    }
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return {mean, std::sqrt(var / n)};
}

MetricReport aggregate_report(std::vector<FrameMetrics> items) {
    if (items.empty()) throw std::invalid_argument("aggregate_report: no items");
    using Key = std::tuple<std::size_t, std::string, std::size_t>;
    std::map<Key, std::vector<const FrameMetrics*>> groups;
    for (const auto& it : items) groups[{it.spokes, it.method, it.frames}].push_back(&it);

    MetricReport report;
    for (const auto& [key, group] : groups) {
        ReportCell cell;
        cell.spokes = std::get<0>(key);
        cell.method = std::get<1>(key);
        cell.frames = std::get<2>(key);
        cell.count = group.size();
        auto stat = [&group](double FrameMetrics::*field) {
            std::vector<double> v;
            v.reserve(group.size());
            for (const auto* m : group) v.push_back(m->*field);
            return mean_std(v);
        };
        cell.ssim = stat(&FrameMetrics::ssim);
        cell.psnr = stat(&FrameMetrics::psnr);
        cell.nmse = stat(&FrameMetrics::nmse);
        cell.local_ssim = stat(&FrameMetrics::local_ssim);
        cell.local_nmse = stat(&FrameMetrics::local_nmse);
        report.cells.push_back(std::move(cell));
    }
    std::stable_sort(items.begin(), items.end(), [](const FrameMetrics& a, const FrameMetrics& b) {
        return std::tie(a.spokes, a.method, a.frames, a.sequence, a.frame) <
               std::tie(b.spokes, b.method, b.frames, b.sequence, b.frame);
    });
    report.items = std::move(items);
    return report;
}

namespace {

std::string fmt_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    return fmt_number(v);
}

}  // namespace

std::string report_csv(const MetricReport& report) {
    std::ostringstream os;
    os << "# normalization: " << kNormalizationNote << "\n";
    os << "method,spokes,frames,metric,mean,std,count\n";
    for (const auto& c : report.cells) {
        const std::pair<const char*, Stat> rows[] = {{"ssim", c.ssim},
                                                     {"nmse", c.nmse},
                                                     {"psnr", c.psnr},
                                                     {"local_ssim", c.local_ssim},
                                                     {"local_nmse", c.local_nmse}};
        for (const auto& [name, s] : rows) {
            os << c.method << ',' << c.spokes << ',' << c.frames << ',' << name << ',' << fmt_number(s.mean) << ','
               << fmt_number(s.std) << ',' << c.count << "\n";
        }
    }
    return os.str();
}

std::string report_json(const MetricReport& report) {
    nlohmann::json j;
    j["normalization"] = kNormalizationNote;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : report.cells) {
        auto stat = [](const Stat& s) { return nlohmann::json{{"mean", json_number(s.mean)}, {"std", json_number(s.std)}}; };
        j["cells"].push_back({{"method", c.method},
                              {"spokes", c.spokes},
                              {"frames", c.frames},
                              {"count", c.count},
                              {"ssim", stat(c.ssim)},
                              {"nmse", stat(c.nmse)},
                              {"psnr", stat(c.psnr)},
                              {"local_ssim", stat(c.local_ssim)},
                              {"local_nmse", stat(c.local_nmse)}});
    }
    j["items"] = nlohmann::json::array();
    for (const auto& m : report.items) {
        j["items"].push_back({{"method", m.method},
                              {"spokes", m.spokes},
                              {"frames", m.frames},
                              {"sequence", m.sequence},
                              {"frame", m.frame},
                              {"ssim", json_number(m.ssim)},
                              {"psnr", json_number(m.psnr)},
                              {"nmse", json_number(m.nmse)},
                              {"local_ssim", json_number(m.local_ssim)},
                              {"local_nmse", json_number(m.local_nmse)}});
    }
    return j.dump(2) + "\n";
}

}  // namespace convlr
