#include "convlr/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "convlr/baseline.hpp"
#include "convlr/binary_io.hpp"
#include "convlr/config.hpp"
#include "convlr/gradcheck.hpp"
#include "convlr/metrics.hpp"
#include "convlr/network.hpp"
#include "convlr/parallel.hpp"
#include "convlr/simdata.hpp"
#include "convlr/training.hpp"
#include "json.hpp"

namespace convlr {

namespace {

template <typename Validate, typename Execute>
int run_command(const char* name, std::ostream& err, Validate&& validate, Execute&& execute) {
    try {
        validate();
    } catch (const std::exception& e) {
        err << name << ": invalid input: " << e.what() << "\n";
        return kExitValidation;
    }
    try {
        execute();
    } catch (const std::exception& e) {
        err << name << ": failed: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

ExperimentConfig resolve_config(const CommonOptions& common) {
    ExperimentConfig cfg;
    if (!common.config.empty()) cfg = load_experiment_config(common.config);
    if (common.threads > 0) cfg.training.threads = common.threads;
    return cfg;
}

void require_out_dir(const std::filesystem::path& out) {
    if (out.empty()) throw std::invalid_argument("--out is required");
    if (std::filesystem::exists(out) && !std::filesystem::is_directory(out)) {
        throw std::invalid_argument("--out " + out.string() + " exists and is not a directory");
    }
}

DatasetManifest require_dataset(const std::filesystem::path& dir) {
    if (dir.empty()) throw std::invalid_argument("--dataset is required");
    if (!std::filesystem::is_regular_file(dir / "manifest.json")) {
        throw std::invalid_argument("no dataset manifest at " + (dir / "manifest.json").string());
    }
    return load_manifest(dir);
}

const std::vector<std::string>& split_ids(const DatasetManifest& m, const std::string& split) {
    if (split == "train") return m.train;
    if (split == "val") return m.val;
    if (split == "test") return m.test;
    throw std::invalid_argument("unknown split '" + split + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::filesystem::path sidecar_for(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    return p.replace_extension(".json");
}

}  // namespace

std::filesystem::path recon_frame_path(const std::filesystem::path& recon_dir, std::size_t spokes,
                                       std::size_t frames, const std::string& id, std::size_t t) {
    return recon_dir / ("s" + std::to_string(spokes) + "_T" + std::to_string(frames)) / id /
           ("frame_" + std::to_string(t) + ".img");
}

int cmd_simulate(const CommonOptions& common, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg;
    return run_command(
        "simulate", err,
        [&] {
            cfg = resolve_config(common);
            if (common.seed) cfg.dataset.train_seed_start = *common.seed;
            cfg.validate();
            require_out_dir(common.out);
        },
        [&] {
            const auto manifest = build_dataset(cfg.dataset, common.out, resolve_threads(common.threads));
            save_experiment_config(common.out / "config.json", cfg);
            out << "simulate: wrote " << manifest.train.size() << " train / " << manifest.val.size() << " val / "
                << manifest.test.size() << " test sequences (" << cfg.dataset.frames << " frames, "
                << cfg.dataset.spokes.size() << " spoke counts) to " << common.out.string() << "\n";
        });
}

int cmd_train(const CommonOptions& common, const TrainOptions& opts, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg;
    DatasetManifest manifest;
    return run_command(
        "train", err,
        [&] {
            cfg = resolve_config(common);
            if (common.seed) cfg.training.seed = *common.seed;
            if (opts.mask_lstm) cfg.training.mask_lstm = true;
            if (opts.no_discriminator) cfg.training.use_discriminator = false;
            if (opts.no_initializer) cfg.training.use_initializer = false;
            if (opts.steps) cfg.training.steps = *opts.steps;
            if (opts.spokes) cfg.training.spokes = *opts.spokes;
            manifest = require_dataset(opts.dataset);
            cfg.dataset = manifest.config;
            cfg.validate();
            if (manifest.train.empty()) throw std::invalid_argument("dataset has no training sequences");
            require_out_dir(common.out);
        },
        [&] {
            const auto threads = resolve_threads(common.threads ? common.threads : cfg.training.threads);
            const auto samples =
                load_training_samples(opts.dataset, manifest.train, cfg.training.spokes, cfg.training.frames, threads);
            std::filesystem::create_directories(common.out);
            save_experiment_config(common.out / "config.json", cfg);
            const auto result = train(samples, cfg.model, cfg.training, common.out);
            const auto& last = result.history.back();
            out << "train: " << result.steps_run << " steps" << (result.early_stopped ? " (early stop)" : "")
                << ", final loss " << last.total << " (imse " << last.imse << "), checkpoint "
                << (common.out / "model.ckpt").string() << "\n";
        });
}

int cmd_reconstruct(const CommonOptions& common, const ReconstructOptions& opts, std::ostream& out,
                    std::ostream& err) {
    ExperimentConfig cfg;
    DatasetManifest manifest;
    ParamSet params;
    ModelConfig model;
    TrainConfig trained;
    std::vector<std::size_t> spokes, frames;
    std::string split;
    return run_command(
        "reconstruct", err,
        [&] {
            cfg = resolve_config(common);
            manifest = require_dataset(opts.dataset);
            cfg.dataset = manifest.config;
            const std::set<std::string> methods{"convlr", "grasp", "regrid", "truth"};
            if (!methods.count(opts.method)) throw std::invalid_argument("unknown --method '" + opts.method + "'");
            if (opts.method == "convlr") {
                if (opts.checkpoint.empty()) throw std::invalid_argument("--checkpoint is required for --method convlr");
                if (!std::filesystem::is_regular_file(opts.checkpoint)) {
                    throw std::invalid_argument("checkpoint " + opts.checkpoint.string() + " does not exist");
                }
                read_checkpoint_sidecar(sidecar_for(opts.checkpoint), model, trained);
                model.validate();
                params = load_checkpoint(opts.checkpoint);
                const auto expected = init_convlr_params(model);
                for (const auto& e : expected.entries()) {
                    if (!params.contains(e.name) || params.get(e.name).shape() != e.tensor.shape()) {
                        throw std::invalid_argument("checkpoint does not match its sidecar model config at " + e.name);
                    }
                }
                if (model.image_size != manifest.config.image_size) {
                    throw std::invalid_argument("checkpoint image_size differs from the dataset");
                }
                spokes = opts.spokes.empty() ? std::vector<std::size_t>{trained.spokes} : opts.spokes;
            } else {
                spokes = opts.spokes.empty() ? cfg.evaluation.spokes : opts.spokes;
            }
            frames = opts.frames.empty() ? cfg.evaluation.frame_counts : opts.frames;
            split = opts.split.empty() ? cfg.evaluation.split : opts.split;
            const auto& sp = manifest.config.spokes;
            for (auto s : spokes) {
                if (std::find(sp.begin(), sp.end(), s) == sp.end()) {
                    throw std::invalid_argument("spoke count " + std::to_string(s) + " is not in the dataset");
                }
            }
            for (auto t : frames) {
                if (t == 0 || t > manifest.config.frames) {
                    throw std::invalid_argument("frame count " + std::to_string(t) + " outside [1, " +
                                                std::to_string(manifest.config.frames) + "]");
                }
            }
            if (split_ids(manifest, split).empty()) throw std::invalid_argument("split '" + split + "' is empty");
            cfg.grasp.validate();
            require_out_dir(common.out);
        },
        [&] {
            const auto& ids = split_ids(manifest, split);
            const auto threads = resolve_threads(common.threads);
            const std::size_t n = manifest.config.image_size;
            std::filesystem::create_directories(common.out);
            save_experiment_config(common.out / "config.json", cfg);
            const ForwardOptions fopts{trained.mask_lstm, trained.use_initializer};

            std::ofstream timing(common.out / "timing.jsonl", std::ios::trunc);
            nlohmann::json runs = nlohmann::json::array();
            double total_ms = 0.0;
            std::size_t total_frames = 0;
            for (auto S : spokes) {
                for (auto T : frames) {
                    std::vector<std::vector<double>> frame_ms(ids.size());
                    parallel_for(ids.size(), threads, [&](std::size_t i) {
                        const auto& id = ids[i];
                        const auto seq = load_sequence(opts.dataset, id);
                        std::vector<KSpaceData> y;
                        for (std::size_t t = 0; t < T; ++t) y.push_back(load_frame_kspace(opts.dataset, id, S, t));
                        std::filesystem::create_directories(recon_frame_path(common.out, S, T, id, 0).parent_path());
                        auto& ms = frame_ms[i];
                        using clock = std::chrono::steady_clock;
                        auto elapsed_ms = [](clock::time_point a) {
                            return std::chrono::duration<double, std::milli>(clock::now() - a).count();
                        };
                        if (opts.method == "convlr") {
                            ConvLrStream stream(params, model, fopts, seq.reference);
                            for (std::size_t t = 0; t < T; ++t) {
                                const auto t0 = clock::now();
                                const auto img = stream.push(y[t]);
                                ms.push_back(elapsed_ms(t0));
                                write_image(recon_frame_path(common.out, S, T, id, t), img);
                            }
                        } else if (opts.method == "grasp") {
                            const auto t0 = clock::now();
                            const auto r = grasp_reconstruct(y, n, n, cfg.grasp);
                            const double per = elapsed_ms(t0) / static_cast<double>(T);
                            std::ostringstream trace;
                            for (std::size_t k = 0; k < r.objective.size(); ++k) {
                                trace << nlohmann::json{{"iteration", k}, {"objective", r.objective[k]}}.dump() << "\n";
                            }
                            write_text(recon_frame_path(common.out, S, T, id, 0).parent_path() / "objective.jsonl",
                                       trace.str());
                            for (std::size_t t = 0; t < T; ++t) {
                                ms.push_back(per);
                                write_image(recon_frame_path(common.out, S, T, id, t), r.frames[t]);
                            }
                        } else if (opts.method == "regrid") {
                            for (std::size_t t = 0; t < T; ++t) {
                                const auto t0 = clock::now();
                                const auto img = regrid_reconstruct(y[t], n, n);
                                ms.push_back(elapsed_ms(t0));
                                write_image(recon_frame_path(common.out, S, T, id, t), img);
                            }
                        } else {
                            for (std::size_t t = 0; t < T; ++t) {
                                ms.push_back(0.0);
                                write_image(recon_frame_path(common.out, S, T, id, t), seq.frames[t]);
                            }
                        }
                    });
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                        for (std::size_t t = 0; t < frame_ms[i].size(); ++t) {
                            timing << nlohmann::json{{"spokes", S}, {"frames", T},      {"sequence", ids[i]},
                                                     {"frame", t},  {"ms", frame_ms[i][t]}}
                                          .dump()
                                   << "\n";
                            total_ms += frame_ms[i][t];
                            ++total_frames;
                        }
                    }
                    runs.push_back({{"spokes", S}, {"frames", T}});
                }
            }
            nlohmann::json meta = {{"format_version", 1}, {"method", opts.method}, {"split", split},
                                   {"runs", runs},        {"sequences", ids}};
            if (opts.method == "convlr") {
                meta["mask_lstm"] = trained.mask_lstm;
                meta["use_initializer"] = trained.use_initializer;
                meta["use_discriminator"] = trained.use_discriminator;
            }
            write_text(common.out / "recon.json", meta.dump(2) + "\n");
            out << "reconstruct: " << opts.method << ", " << ids.size() << " sequences x " << runs.size()
                << " runs, mean " << std::fixed << std::setprecision(3)
                << (total_frames ? total_ms / static_cast<double>(total_frames) : 0.0) << " ms/frame -> "
                << common.out.string() << "\n";
        });
}

int cmd_evaluate(const CommonOptions& common, const EvaluateOptions& opts, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg;
    DatasetManifest manifest;
    struct Job {
        std::filesystem::path dir;
        std::string method;
        std::size_t spokes, frames;
        std::string id;
    };
    std::vector<Job> jobs;
    return run_command(
        "evaluate", err,
        [&] {
            cfg = resolve_config(common);
            manifest = require_dataset(opts.dataset);
            cfg.dataset = manifest.config;
            cfg.evaluation.metrics.validate();
            if (opts.recon_dirs.empty()) throw std::invalid_argument("no reconstruction directories given");
            std::set<std::string> known(manifest.train.begin(), manifest.train.end());
            known.insert(manifest.val.begin(), manifest.val.end());
            known.insert(manifest.test.begin(), manifest.test.end());
            for (const auto& dir : opts.recon_dirs) {
                std::ifstream in(dir / "recon.json");
                if (!in) throw std::invalid_argument("no recon.json in " + dir.string());
                nlohmann::json meta;
                in >> meta;
                auto method = meta.at("method").get<std::string>();
                if (meta.value("mask_lstm", false)) method += "_masked";
                if (meta.contains("use_initializer") && !meta.at("use_initializer").get<bool>()) method += "_noinit";
                if (meta.contains("use_discriminator") && !meta.at("use_discriminator").get<bool>()) method += "_nodisc";
                for (const auto& run : meta.at("runs")) {
                    const auto S = run.at("spokes").get<std::size_t>();
                    const auto T = run.at("frames").get<std::size_t>();
                    for (const auto& id : meta.at("sequences").get<std::vector<std::string>>()) {
                        if (!known.count(id)) throw std::invalid_argument("sequence " + id + " is not in the dataset");
                        for (std::size_t t = 0; t < T; ++t) {
                            if (!std::filesystem::is_regular_file(recon_frame_path(dir, S, T, id, t))) {
                                throw std::invalid_argument("missing reconstruction " +
                                                            recon_frame_path(dir, S, T, id, t).string());
                            }
                        }
                        jobs.push_back({dir, method, S, T, id});
                    }
                }
            }
            require_out_dir(common.out);
        },
        [&] {
            std::vector<std::vector<FrameMetrics>> results(jobs.size());
            parallel_for(jobs.size(), resolve_threads(common.threads), [&](std::size_t j) {
                const auto& job = jobs[j];
                const auto seq = load_sequence(opts.dataset, job.id);
                for (std::size_t t = 0; t < job.frames; ++t) {
                    const auto rec = read_image(recon_frame_path(job.dir, job.spokes, job.frames, job.id, t));
                    auto m = evaluate_frame(rec, seq.frames[t], seq.roi, cfg.evaluation.metrics);
                    m.method = job.method;
                    m.spokes = job.spokes;
                    m.frames = job.frames;
                    m.sequence = job.id;
                    m.frame = t;
                    results[j].push_back(m);
                }
            });
            std::vector<FrameMetrics> items;
            for (auto& r : results) items.insert(items.end(), r.begin(), r.end());
            const auto report = aggregate_report(std::move(items));
            std::filesystem::create_directories(common.out);
            write_text(common.out / "report.csv", report_csv(report));
            write_text(common.out / "report.json", report_json(report));
            save_experiment_config(common.out / "config.json", cfg);
            out << "evaluate: " << report.items.size() << " frames\n";
            out << std::left << std::setw(22) << "method" << std::setw(8) << "spokes" << std::setw(8) << "frames"
                << std::setw(20) << "SSIM" << std::setw(20) << "NMSE" << "PSNR\n";
            for (const auto& c : report.cells) {
                auto cell = [](const Stat& s, int precision) {
                    std::ostringstream os;
                    os << std::fixed << std::setprecision(precision) << s.mean << "+-" << s.std;
                    return os.str();
                };
                out << std::left << std::setw(22) << c.method << std::setw(8) << c.spokes << std::setw(8) << c.frames
                    << std::setw(20) << cell(c.ssim, 3) << std::setw(20) << cell(c.nmse, 3) << cell(c.psnr, 2) << "\n";
            }
        });
}

int cmd_gradcheck(const GradcheckOptions& opts, std::ostream& out, std::ostream& err) {
    std::vector<GradCheckCase> cases;
    int code = run_command(
        "gradcheck", err,
        [&] {
            if (!(opts.tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
        },
        [&] { cases = run_gradcheck_suite(opts.tolerance, 1e-5, opts.sabotage); });
    if (code != kExitOk) return code;
    std::size_t failed = 0;
    for (const auto& c : cases) {
        const auto& r = c.result;
        out << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(36) << c.name << " max_rel=" << std::scientific
            << std::setprecision(3) << r.max_rel_error << "  worst: leaf " << r.leaf << " coord " << r.coordinate
            << " analytic " << r.analytic << " numeric " << r.numeric << std::defaultfloat << "\n";
        if (!c.passed) ++failed;
    }
    out << "gradcheck: " << cases.size() - failed << "/" << cases.size() << " passed (tolerance " << opts.tolerance
        << ")\n";
    if (failed) {
        err << "gradcheck: " << failed << " check(s) above tolerance\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace convlr
