#include "convlr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "convlr/config.hpp"
#include "convlr/parallel.hpp"
#include "json.hpp"

namespace convlr {

void TrainConfig::validate() const {
    if (!(lr_generator > 0.0) || !(lr_discriminator > 0.0)) throw std::invalid_argument("training: learning rates must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("training: Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw std::invalid_argument("training: adam_eps must be > 0");
    if (batch_size == 0 || steps == 0 || frames == 0 || spokes == 0) {
        throw std::invalid_argument("training: batch_size, steps, frames and spokes must be >= 1");
    }
    if (discriminator_channels == 0) throw std::invalid_argument("training: discriminator_channels must be >= 1");
    if (early_stop_window == 0 || !(early_stop_tolerance >= 0.0)) {
        throw std::invalid_argument("training: early_stop_window must be >= 1 and tolerance >= 0");
    }
    weights.validate();
}

TrainingSample make_training_sample(const std::string& id, const FrameSequence& seq,
                                    const std::vector<KSpaceData>& kspace, std::size_t frames) {
    if (frames == 0 || frames > seq.frames.size() || frames > kspace.size()) {
        throw std::invalid_argument("make_training_sample: sequence " + id + " has fewer than " +
                                    std::to_string(frames) + " frames");
    }
    TrainingSample s;
    s.id = id;
    s.reference = image_tensor(seq.reference);
    for (std::size_t t = 0; t < frames; ++t) {
        s.frames.push_back(prepare_frame(kspace[t], seq.reference.width(), seq.reference.height()));
        s.targets.push_back(image_tensor(seq.frames[t]));
    }
    return s;
}

std::vector<TrainingSample> load_training_samples(const std::filesystem::path& dataset_dir,
                                                  const std::vector<std::string>& ids, std::size_t spokes,
                                                  std::size_t frames, std::size_t threads) {
    std::vector<TrainingSample> out(ids.size());
    parallel_for(ids.size(), resolve_threads(threads), [&](std::size_t i) {
        const auto seq = load_sequence(dataset_dir, ids[i]);
        std::vector<KSpaceData> k;
        for (std::size_t t = 0; t < frames && t < seq.frames.size(); ++t) {
            k.push_back(load_frame_kspace(dataset_dir, ids[i], spokes, t));
        }
        out[i] = make_training_sample(ids[i], seq, k, frames);
    });
    return out;
}

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParamSet& params, const std::vector<std::vector<double>>& grads) {
    auto& entries = params.entries();
    if (grads.size() != entries.size()) throw std::invalid_argument("Adam: gradient count mismatch");
    if (m_.empty()) {
        for (const auto& e : entries) {
            m_.emplace_back(e.tensor.size(), 0.0);
            v_.emplace_back(e.tensor.size(), 0.0);
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto values = entries[i].tensor.mutable_values();
        if (grads[i].size() != values.size()) throw std::invalid_argument("Adam: gradient size mismatch");
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double g = grads[i][j];
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            values[j] -= lr_ * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + eps_);
        }
    }
}

LossParts sequence_loss_parts(const TrainingSample& sample, const std::vector<ad::Tensor>& outputs,
                              const ParamSet* d_params, const DiscriminatorConfig& dcfg,
                              const PerceptualFeatures& features, bool squared_imse) {
    if (outputs.size() != sample.targets.size()) throw std::invalid_argument("sequence_loss_parts: frame count mismatch");
    const double inv = 1.0 / static_cast<double>(outputs.size());
    LossParts parts;
    auto accumulate = [inv](ad::Tensor& acc, const ad::Tensor& term) {
        const auto scaled = ad::scale(term, inv);
        acc = acc.defined() ? ad::add(acc, scaled) : scaled;
    };
    for (std::size_t t = 0; t < outputs.size(); ++t) {
        accumulate(parts.imse, loss_imse(outputs[t], sample.targets[t], squared_imse));
        accumulate(parts.fmse, loss_fmse(outputs[t], sample.targets[t]));
        accumulate(parts.perceptual, loss_perceptual(outputs[t], sample.targets[t], features));
        if (d_params) accumulate(parts.gen, loss_gen(discriminator_forward(outputs[t], *d_params, dcfg)));
    }
    return parts;
}

bool plateaued(const std::vector<double>& totals, std::size_t window, double tolerance) {
    if (window == 0 || totals.size() < 2 * window) return false;
    const auto n = totals.size();
    double prev = 0.0, last = 0.0;
    for (std::size_t i = n - 2 * window; i < n - window; ++i) prev += totals[i];
    for (std::size_t i = n - window; i < n; ++i) last += totals[i];
    prev /= static_cast<double>(window);
    last /= static_cast<double>(window);
    return prev - last < tolerance * std::abs(prev);
}

void write_checkpoint_sidecar(const std::filesystem::path& path, const ModelConfig& model, const TrainConfig& cfg,
                              std::size_t step) {
    nlohmann::json j = {{"format_version", 1},
                        {"step", step},
                        {"model", model_config_to_json(model)},
                        {"training", train_config_to_json(cfg)}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void read_checkpoint_sidecar(const std::filesystem::path& path, ModelConfig& model, TrainConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("missing checkpoint sidecar " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        model = model_config_from_json(j.at("model"));
        cfg = train_config_from_json(j.at("training"));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("malformed checkpoint sidecar " + path.string() + ": " + e.what());
    }
}

namespace {

ParamSet frozen(const ParamSet& p) {
    ParamSet out;
    for (const auto& e : p.entries()) {
        const auto v = e.tensor.values();
        out.add(e.name, ad::Tensor::constant(e.tensor.shape(), {v.begin(), v.end()}));
    }
    return out;
}

std::vector<std::vector<double>> grads_of(const ParamSet& p) {
    std::vector<std::vector<double>> g;
    g.reserve(p.size());
    for (const auto& e : p.entries()) g.push_back(e.tensor.grad());
    return g;
}

// Sums per-sample gradients in batch order and averages them.
std::vector<std::vector<double>> reduce(const std::vector<std::vector<std::vector<double>>>& per_sample) {
    auto total = per_sample.front();
    for (std::size_t b = 1; b < per_sample.size(); ++b) {
        for (std::size_t i = 0; i < total.size(); ++i) {
            for (std::size_t j = 0; j < total[i].size(); ++j) total[i][j] += per_sample[b][i][j];
        }
    }
    const double inv = 1.0 / static_cast<double>(per_sample.size());
    for (auto& g : total) {
        for (auto& v : g) v *= inv;
    }
    return total;
}

bool all_finite(const std::vector<std::vector<double>>& grads) {
    for (const auto& g : grads) {
        for (double v : g) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

std::string checkpoint_name(std::size_t step) {
    std::ostringstream os;
    os << "ckpt_step" << std::setw(6) << std::setfill('0') << step;
    return os.str();
}

class BatchSampler {
public:
    BatchSampler(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) {}

    std::vector<std::size_t> next(std::size_t batch) {
        std::vector<std::size_t> out;
        out.reserve(batch);
        while (out.size() < batch) {
            if (pos_ == order_.size()) reshuffle();
            out.push_back(order_[pos_++]);
        }
        return out;
    }

private:
    void reshuffle() {
        order_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
        // Fisher-Yates with explicit draws so the order is the same on every standard library.
        for (std::size_t i = n_; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng_() % i);
            std::swap(order_[i - 1], order_[j]);
        }
        pos_ = 0;
    }

    std::size_t n_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

}  // namespace

TrainResult train(const std::vector<TrainingSample>& samples, ModelConfig model, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir) {
    cfg.validate();
    model.validate();
    if (samples.empty()) throw std::invalid_argument("train: no training sequences");
    for (const auto& s : samples) {
        if (s.frames.size() != cfg.frames || s.targets.size() != cfg.frames) {
            throw std::invalid_argument("train: sequence " + s.id + " does not have " + std::to_string(cfg.frames) +
                                        " frames");
        }
        if (s.reference.dim(1) != model.image_size || s.reference.dim(2) != model.image_size) {
            throw std::invalid_argument("train: sequence " + s.id + " does not match model.image_size");
        }
    }
    if (model.alpha_scale == 0.0) {
        const auto& traj = samples.front().frames.front().op->trajectory();
        model.alpha_scale = calibrate_alpha_scale(model.image_size, traj.n_spokes(), traj.n_readout);
    }

    TrainResult result;
    result.model = model;
    ParamSet generator = init_convlr_params(model);
    const DiscriminatorConfig dcfg{model.image_size, cfg.discriminator_channels, model.init_seed + 1};
    ParamSet discriminator;
    if (cfg.use_discriminator) discriminator = init_discriminator_params(dcfg);
    const PerceptualFeatures features;
    const ForwardOptions fopts{cfg.mask_lstm, cfg.use_initializer};

    Adam adam_g(cfg.lr_generator, cfg.beta1, cfg.beta2, cfg.adam_eps);
    Adam adam_d(cfg.lr_discriminator, cfg.beta1, cfg.beta2, cfg.adam_eps);
    BatchSampler sampler(samples.size(), cfg.seed);
    const std::size_t threads = resolve_threads(cfg.threads);

    std::ofstream log;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        log.open(out_dir / "train_log.jsonl", std::ios::trunc);
        if (!log) throw std::runtime_error("cannot write " + (out_dir / "train_log.jsonl").string());
    }
    const auto t_start = std::chrono::steady_clock::now();
    auto save = [&](const std::string& stem, std::size_t step) {
        if (out_dir.empty()) return;
        save_checkpoint(out_dir / (stem + ".ckpt"), generator);
        write_checkpoint_sidecar(out_dir / (stem + ".json"), model, cfg, step);
        if (cfg.use_discriminator) save_checkpoint(out_dir / (stem + ".disc.ckpt"), discriminator);
    };
    auto abort = [&](std::size_t step, const std::string& what) {
        if (log) {
            log << nlohmann::json{{"step", step}, {"aborted", what}}.dump() << "\n";
            log.flush();
        }
        throw TrainingAborted(step, "training aborted at step " + std::to_string(step) + ": " + what);
    };

    std::vector<double> totals;
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const auto batch = sampler.next(cfg.batch_size);
        const std::size_t B = batch.size();

        struct Work {
            ParamSet g;
            std::vector<ad::Tensor> outputs;
        };
        std::vector<Work> work(B);
        parallel_for(B, threads, [&](std::size_t b) {
            const auto& s = samples[batch[b]];
            work[b].g = generator.clone();
            work[b].outputs = convlr_forward(s.frames, s.reference, work[b].g, model, fopts);
        });

        StepRecord rec;
        rec.step = step;
        if (cfg.use_discriminator) {
            std::vector<std::vector<std::vector<double>>> grads(B);
            std::vector<double> losses(B);
            parallel_for(B, threads, [&](std::size_t b) {
                const auto& s = samples[batch[b]];
                auto d = discriminator.clone();
                ad::Tensor total;
                const double inv = 1.0 / static_cast<double>(s.targets.size());
                for (std::size_t t = 0; t < s.targets.size(); ++t) {
                    const auto real = discriminator_forward(s.targets[t], d, dcfg);
                    const auto fake = discriminator_forward(work[b].outputs[t].detach(), d, dcfg);
                    const auto l = ad::scale(loss_discriminator(real, fake), inv);
                    total = total.defined() ? ad::add(total, l) : l;
                }
                ad::backward(total);
                losses[b] = total.item();
                grads[b] = grads_of(d);
            });
            for (double l : losses) rec.discriminator += l / static_cast<double>(B);
            auto g = reduce(grads);
            if (!std::isfinite(rec.discriminator) || !all_finite(g)) abort(step, "non-finite discriminator loss");
            adam_d.step(discriminator, g);
        }

        const ParamSet d_frozen = cfg.use_discriminator ? frozen(discriminator) : ParamSet{};
        std::vector<std::vector<std::vector<double>>> grads(B);
        std::vector<StepRecord> parts(B);
        parallel_for(B, threads, [&](std::size_t b) {
            const auto& s = samples[batch[b]];
            const ParamSet d_local = cfg.use_discriminator ? frozen(d_frozen) : ParamSet{};
            const auto lp = sequence_loss_parts(s, work[b].outputs, cfg.use_discriminator ? &d_local : nullptr, dcfg,
                                                features, cfg.squared_imse);
            const auto total = loss_total(lp, cfg.weights);
            ad::backward(total);
            parts[b].total = total.item();
            parts[b].imse = lp.imse.item();
            parts[b].fmse = lp.fmse.item();
            parts[b].perceptual = lp.perceptual.item();
            parts[b].gen = lp.gen.defined() ? lp.gen.item() : 0.0;
            grads[b] = grads_of(work[b].g);
        });
        const double inv_b = 1.0 / static_cast<double>(B);
        for (const auto& p : parts) {
            rec.total += p.total * inv_b;
            rec.imse += p.imse * inv_b;
            rec.fmse += p.fmse * inv_b;
            rec.perceptual += p.perceptual * inv_b;
            rec.gen += p.gen * inv_b;
        }
        auto g = reduce(grads);
        if (!std::isfinite(rec.total) || !all_finite(g)) abort(step, "non-finite generator loss");
        adam_g.step(generator, g);

        result.history.push_back(rec);
        totals.push_back(rec.total);
        result.steps_run = step;
        if (log) {
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
            nlohmann::json line = {{"step", step},           {"loss", rec.total},       {"imse", rec.imse},
                                   {"fmse", rec.fmse},       {"perceptual", rec.perceptual},
                                   {"gen", rec.gen},         {"discriminator", rec.discriminator},
                                   {"elapsed_s", elapsed},
                                   {"timestamp", std::chrono::duration_cast<std::chrono::milliseconds>(
                                                     std::chrono::system_clock::now().time_since_epoch())
                                                     .count()}};
            log << line.dump() << "\n";
            log.flush();
        }
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) save(checkpoint_name(step), step);
        if (cfg.early_stop && plateaued(totals, cfg.early_stop_window, cfg.early_stop_tolerance)) {
            result.early_stopped = true;
            break;
        }
    }

    save("model", result.steps_run);
    result.generator = std::move(generator);
    result.discriminator = std::move(discriminator);
    return result;
}

}  // namespace convlr
