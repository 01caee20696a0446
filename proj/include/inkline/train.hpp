#pragma once

#include <chrono>
#include <functional>
#include <limits>

#include "inkline/checkpoint.hpp"
#include "inkline/data.hpp"

namespace inkline {

// Glorot normal: sd = sqrt(2/(fan_in+fan_out)). Matrices and conv kernels are
// weights; rank-1 tensors keep their constructed fill (zero biases, unit
// gains) except attention score vectors, named with a ".w" suffix.
inline void glorot_init(const std::vector<Parameter*>& params, Rng& rng) {
    for (Parameter* p : params) {
        const auto& sh = p->value.shape;
        size_t fan_in = 0, fan_out = 0;
        if (sh.size() == 4) {
            fan_in = sh[0] * sh[1] * sh[2];
            fan_out = sh[0] * sh[1] * sh[3];
        } else if (sh.size() == 2) {
            fan_in = sh[0];
            fan_out = sh[1];
        } else if (sh.size() == 1 && p->name.size() > 2 && p->name.compare(p->name.size() - 2, 2, ".w") == 0) {
            fan_in = sh[0];
            fan_out = 1;
        } else {
            continue;
        }
        double sd = std::sqrt(2.0 / (fan_in + fan_out));
        for (double& v : p->value.v) v = rng.normal(0.0, sd);
    }
}

inline double lr_at(double lr0, double decay_per_epoch, size_t epoch) {
    return lr0 * std::pow(1.0 - decay_per_epoch, static_cast<double>(epoch));
}

struct OptimizerConfig {
    std::string kind = "adam";  // adam | rmsprop
    double lr = 0.001;
    double decay = 0.02;  // per-epoch multiplicative lr decay
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double rho = 0.9;  // rmsprop
};

class Optimizer {
public:
    Optimizer(std::vector<Parameter*> params, const OptimizerConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
        if (cfg.kind != "adam" && cfg.kind != "rmsprop") throw std::invalid_argument("unknown optimizer: " + cfg.kind);
        v_.reserve(params_.size());
        for (Parameter* p : params_) v_.emplace_back(p->value.shape);
        if (cfg.kind == "adam") {
            m_.reserve(params_.size());
            for (Parameter* p : params_) m_.emplace_back(p->value.shape);
        }
    }

    void step(double lr) {
        ++t_;
        if (cfg_.kind == "adam") {
            double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
            double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
            for (size_t i = 0; i < params_.size(); ++i) {
                Tensor& th = params_[i]->value;
                Tensor& g = params_[i]->grad;
                for (size_t j = 0; j < th.size(); ++j) {
                    m_[i][j] = cfg_.beta1 * m_[i][j] + (1 - cfg_.beta1) * g[j];
                    v_[i][j] = cfg_.beta2 * v_[i][j] + (1 - cfg_.beta2) * g[j] * g[j];
                    th[j] -= lr * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + cfg_.eps);
                }
            }
        } else {
            for (size_t i = 0; i < params_.size(); ++i) {
                Tensor& th = params_[i]->value;
                Tensor& g = params_[i]->grad;
                for (size_t j = 0; j < th.size(); ++j) {
                    v_[i][j] = cfg_.rho * v_[i][j] + (1 - cfg_.rho) * g[j] * g[j];
                    th[j] -= lr * g[j] / (std::sqrt(v_[i][j]) + cfg_.eps);
                }
            }
        }
    }

    size_t steps() const { return t_; }

private:
    std::vector<Parameter*> params_;
    OptimizerConfig cfg_;
    std::vector<Tensor> m_, v_;
    size_t t_ = 0;
};

// Patience rule on a validation trace: stop once `patience` epochs pass with
// no strict improvement; the winner is the earliest minimum seen.
inline size_t best_epoch_by_patience(const std::vector<double>& val_metric, size_t patience,
                                     size_t* stopped_after = nullptr) {
    if (val_metric.empty()) throw std::invalid_argument("empty validation trace");
    size_t best = 0;
    size_t ran = val_metric.size();
    for (size_t t = 1; t < val_metric.size(); ++t) {
        if (val_metric[t] < val_metric[best]) best = t;
        else if (t - best >= patience) {
            ran = t + 1;
            break;
        }
    }
    if (stopped_after) *stopped_after = ran;
    return best;
}

struct TrainConfig {
    OptimizerConfig opt;
    size_t epochs = 100;
    size_t batch = 128;
    size_t patience = 20;
    double dropout = 0.5;
    double l2 = 1e-4;
    uint64_t seed = 1;
    size_t max_decode_len = 32;
    bool stop_at_zero_wer = false;  // finish as soon as validation is perfect
    std::string checkpoint_path;    // best model written here when set
    std::string stats_path;         // per-epoch CSV when set
};

struct EpochStats {
    size_t epoch = 0;
    double lr = 0, train_loss = 0, val_cer = 0, val_wer = 0, seconds = 0;
};

struct TrainResult {
    size_t best_epoch = 0;
    double best_val_wer = 0, best_val_cer = 0;
    bool stopped_early = false;
    std::vector<EpochStats> history;
};

struct EvalResult {
    double cer = 0, wer = 0;
    std::vector<std::string> predictions;
};

// fresh image per (sample, epoch); the hook point for augmentation
using SampleTransform = std::function<GrayImage(const GrayImage&, size_t sample, size_t epoch)>;

inline EvalResult evaluate_model(Seq2SeqModel& model, const std::vector<Sample>& samples, size_t max_decode_len) {
    EvalResult r;
    std::vector<std::string> reals;
    for (const Sample& s : samples) {
        r.predictions.push_back(model.greedy_decode(s.image, max_decode_len));
        reals.push_back(s.text);
    }
    r.cer = corpus_cer(r.predictions, reals);
    r.wer = wer(r.predictions, reals);
    return r;
}

inline TrainResult train_loop(Seq2SeqModel& model, const std::vector<Sample>& train_set,
                              const std::vector<Sample>& val_set, const TrainConfig& cfg,
                              const SampleTransform& transform = nullptr, std::ostream* log = nullptr,
                              const nlohmann::json& checkpoint_extra = {}) {
    if (train_set.empty()) throw std::invalid_argument("train_loop: empty training set");
    if (val_set.empty()) throw std::invalid_argument("train_loop: empty validation set");

    auto params = model.parameters();
    Rng init_rng(mix64(cfg.seed, 0x9107));
    glorot_init(params, init_rng);
    Optimizer opt(params, cfg.opt);

    std::vector<std::vector<int>> targets;
    targets.reserve(train_set.size());
    for (const Sample& s : train_set) {
        auto enc = model.vocab.encode(s.text);
        targets.emplace_back(enc.begin() + 1, enc.end());  // decoder targets: chars + END
    }

    std::ofstream stats;
    if (!cfg.stats_path.empty()) {
        stats.open(cfg.stats_path, std::ios::trunc);
        if (!stats) throw std::runtime_error("cannot write stats: " + cfg.stats_path);
        stats << "epoch,lr,train_loss,val_cer,val_wer,seconds\n";
    }

    auto snapshot = [&] {
        std::vector<Tensor> snap;
        for (auto& [name, t] : model.state_tensors()) snap.push_back(*t);
        return snap;
    };
    auto restore = [&](const std::vector<Tensor>& snap) {
        auto ts = model.state_tensors();
        for (size_t i = 0; i < ts.size(); ++i) *ts[i].second = snap[i];
    };

    TrainResult result;
    std::vector<Tensor> best_state = snapshot();
    double best_wer = std::numeric_limits<double>::infinity();
    size_t best_epoch = 0;

    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        double lr = lr_at(cfg.opt.lr, cfg.opt.decay, epoch);
        Rng shuffle_rng(mix64(cfg.seed, 0x0dd5, epoch));
        shuffle_rng.shuffle(order);

        model.dropout = cfg.dropout;
        double loss_sum = 0;
        size_t done = 0;
        while (done < order.size()) {
            size_t bsz = std::min(cfg.batch, order.size() - done);
            for (Parameter* p : params) p->zero_grad();
            for (size_t b = 0; b < bsz; ++b) {
                size_t idx = order[done + b];
                const Sample& s = train_set[idx];
                GrayImage img = transform ? transform(s.image, idx, epoch) : s.image;
                Graph g;
                g.training = true;
                Rng drop_rng(mix64(cfg.seed, mix64(0xd409, epoch, idx)));
                g.rng = &drop_rng;
                auto out = model.forward_train(g, img, targets[idx], true);
                std::vector<double> w(targets[idx].size(), 1.0);
                Var loss = g.weighted_sequence_cross_entropy(out.logits, targets[idx], w);
                loss_sum += g.val(loss)[0];
                g.backward(loss);
            }
            double inv = 1.0 / static_cast<double>(bsz);
            for (Parameter* p : params)
                for (size_t j = 0; j < p->grad.size(); ++j) {
                    p->grad[j] *= inv;
                    if (cfg.l2 > 0) p->grad[j] += 2.0 * cfg.l2 * p->value[j];
                }
            opt.step(lr);
            done += bsz;
        }

        model.dropout = 0.0;
        EvalResult ev = evaluate_model(model, val_set, cfg.max_decode_len);

        EpochStats es;
        es.epoch = epoch;
        es.lr = lr;
        es.train_loss = loss_sum / static_cast<double>(train_set.size());
        es.val_cer = ev.cer;
        es.val_wer = ev.wer;
        es.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(es);
        if (stats.is_open()) {
            stats << es.epoch << ',' << es.lr << ',' << es.train_loss << ',' << es.val_cer << ',' << es.val_wer << ','
                  << es.seconds << '\n';
            stats.flush();
        }
        if (log)
            (*log) << "epoch " << epoch << " lr " << lr << " loss " << es.train_loss << " val_cer " << ev.cer
                   << " val_wer " << ev.wer << "\n";

        if (ev.wer < best_wer) {
            best_wer = ev.wer;
            result.best_val_cer = ev.cer;
            best_epoch = epoch;
            best_state = snapshot();
            if (!cfg.checkpoint_path.empty()) save_model(cfg.checkpoint_path, model, checkpoint_extra);
        }
        if (cfg.stop_at_zero_wer && ev.wer == 0.0) break;
        if (epoch > best_epoch && epoch - best_epoch >= cfg.patience) {
            result.stopped_early = true;
            break;
        }
    }

    restore(best_state);
    result.best_epoch = best_epoch;
    result.best_val_wer = best_wer;
    return result;
}

}  // namespace inkline
