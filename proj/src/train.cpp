#include "biograd/train.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <span>

#include "biograd/error.hpp"
#include "biograd/rng.hpp"
#include "biograd/zca.hpp"

namespace biograd {

std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::None: return "none";
        case NoiseKind::Random: return "random";
        case NoiseKind::Pepper: return "pepper";
    }
    return "?";
}

NoiseKind noise_from_string(const std::string& s) {
    if (s == "none") return NoiseKind::None;
    if (s == "random") return NoiseKind::Random;
    if (s == "pepper") return NoiseKind::Pepper;
    throw ConfigError("unknown noise kind '" + s + "' (expected none, random or pepper)");
}

double lr_at_epoch(double eta0, const LrSchedule& s, std::size_t epoch) {
    if (s.kind == LrSchedule::Kind::Constant) return eta0;
    return eta0 * std::pow(s.gamma, double(epoch / s.step_size));
}

// ---------------------------------------------------------------------------
// Config identity
// ---------------------------------------------------------------------------

namespace {

namespace seedlab {
constexpr std::uint64_t kInit = 1;
constexpr std::uint64_t kFeedback = 2;
constexpr std::uint64_t kMask = 3;
constexpr std::uint64_t kShuffle = 4;
} // namespace seedlab

std::string num(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

Tensor one_hot(std::size_t classes, std::size_t idx) {
    Tensor t({classes});
    t[idx] = 1.0;
    return t;
}

} // namespace

std::string config_canonical(const TrainingConfig& cfg) {
    std::string s;
    s += "rule=" + to_string(cfg.rule.kind);
    s += ";eta=" + num(cfg.rule.eta);
    s += ";kwta_k=" + std::to_string(cfg.rule.kwta_k);
    s += ";weight_decay=" + num(cfg.rule.weight_decay);
    s += ";prune=" + num(cfg.rule.prune_fraction);
    s += ";input=" + shape_str(cfg.input_shape);
    s += ";classes=" + std::to_string(cfg.class_count);
    s += ";layers=";
    for (const LayerSpec& l : cfg.layers) {
        s += to_string(l.kind) + ":" + std::to_string(l.fan_out) + ":" +
             std::to_string(l.kernel) + ":" + std::to_string(l.stride) + ":" +
             std::to_string(l.padding) + ",";
    }
    s += ";epochs=" + std::to_string(cfg.epochs);
    s += ";batch=" + std::to_string(cfg.batch_size);
    s += ";fraction=" + num(cfg.data_fraction);
    s += ";sched=" + std::string(cfg.schedule.kind == LrSchedule::Kind::Step ? "step" : "constant");
    s += ";gamma=" + num(cfg.schedule.gamma);
    s += ";step_size=" + std::to_string(cfg.schedule.step_size);
    s += ";sparsity=" + num(cfg.sparsity);
    s += ";noise=" + to_string(cfg.noise.kind) + ":" + num(cfg.noise.level);
    s += ";eval_every=" + std::to_string(cfg.eval_every);
    s += ";gain=" + num(cfg.init_gain);
    s += ";ridge_lambda=" + num(cfg.ridge_lambda);
    s += ";hb_zca=" + std::string(cfg.hb_zca ? "1" : "0");
    s += ";zca_eps=" + num(cfg.zca_epsilon);
    return s;
}

std::string config_fingerprint(const TrainingConfig& cfg) {
    const std::string s = config_canonical(cfg);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hex[h & 0xf];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Network assembly per rule
// ---------------------------------------------------------------------------

Network build_for_rule(const TrainingConfig& cfg) {
    if (cfg.class_count < 2) throw ConfigError("build_for_rule: class_count must be >= 2");
    const bool hebbian = is_hebbian_rule(cfg.rule.kind);

    std::vector<LayerSpec> specs = cfg.layers;
    for (LayerSpec& l : specs) {
        if (l.kind == LayerKind::Pool)
            l.activation = Activation::Identity;
        else
            l.activation = hebbian ? Activation::Triangle : Activation::Relu;
    }
    if (!hebbian) {
        LayerSpec head;
        head.kind = LayerKind::Dense;
        head.fan_out = cfg.class_count;
        head.activation = Activation::Identity;
        specs.push_back(head);
    }
    const std::uint64_t init_seed = Rng(cfg.seed).fork(seedlab::kInit).seed();
    return build_network(std::move(specs), hebbian ? HeadKind::Ridge : HeadKind::Linear,
                         init_seed, cfg.input_shape, cfg.init_gain);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

// Ridge features: flattened network output with a trailing constant 1.
Tensor feature_row(const Network& net, const Tensor& x) {
    Tensor f = forward(net, x).first;
    Tensor row({f.size() + 1});
    for (std::size_t i = 0; i < f.size(); ++i) row[i] = f[i];
    row[f.size()] = 1.0;
    return row;
}

std::size_t argmax_lowest(const Tensor& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

} // namespace

double evaluate(const Network& net, const RidgeClassifier* head, const Dataset& ds) {
    if (ds.size() == 0) throw ConfigError("evaluate: empty dataset");
    if ((net.head == HeadKind::Ridge) != (head != nullptr))
        throw ConfigError("evaluate: ridge classifier required iff the network has a ridge head");

    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Tensor x = ds.sample(i);
        std::size_t pred;
        if (head) {
            pred = ridge_predict(*head, feature_row(net, x))[0];
        } else {
            pred = argmax_lowest(forward(net, x).first);
        }
        if (pred == ds.labels[i]) ++correct;
    }
    return double(correct) / double(ds.size());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

bool params_finite(const Network& net) {
    for (const LayerParams& p : net.params)
        if (!p.weights.all_finite() || !p.bias.all_finite()) return false;
    return true;
}

void magnitude_prune(Tensor& w, double fraction) {
    if (fraction <= 0.0) return;
    std::vector<double> mag(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) mag[i] = std::fabs(w[i]);
    std::vector<std::size_t> order(w.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&mag](std::size_t a, std::size_t b) { return mag[a] < mag[b]; });
    const std::size_t cut = std::size_t(fraction * double(w.size()));
    for (std::size_t i = 0; i < cut; ++i) w[order[i]] = 0.0;
}

struct EpochStats {
    double accuracy = 0.0;
    double sparsity = 0.0;
};

RunRecord make_record(const TrainingConfig& cfg) {
    RunRecord rec;
    rec.fingerprint = config_fingerprint(cfg);
    rec.seed = cfg.seed;
    rec.rule = to_string(cfg.rule.kind);
    rec.data_fraction = cfg.data_fraction;
    rec.noise_kind = to_string(cfg.noise.kind);
    rec.noise_level = cfg.noise.level;
    rec.sparsity_cfg = cfg.sparsity;
    rec.epochs = cfg.epochs;
    rec.eval_every = cfg.eval_every;
    return rec;
}

void train_gradient(Network& net, const TrainingConfig& cfg, const Dataset& train_ds,
                    const Dataset& test_ds, RunRecord& rec) {
    Rng base(cfg.seed);

    if (cfg.sparsity > 0.0)
        install_masks(net, make_mask(net, cfg.sparsity, base.fork(seedlab::kMask).seed()));

    FeedbackMatrices fb;
    if (cfg.rule.kind == RuleKind::Fa)
        fb = make_feedback(net, FeedbackMode::Fa, base.fork(seedlab::kFeedback).seed());
    else if (cfg.rule.kind == RuleKind::Dfa)
        fb = make_feedback(net, FeedbackMode::Dfa, base.fork(seedlab::kFeedback).seed());

    const std::size_t n = train_ds.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at_epoch(cfg.rule.eta, cfg.schedule, epoch);

        Rng shuffle_rng = base.fork(seedlab::kShuffle).fork(epoch);
        shuffle_rng.shuffle(order);

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, n);

            std::vector<LayerGrads> acc(net.specs.size());
            for (std::size_t i = 0; i < net.specs.size(); ++i) {
                if (net.params[i].weights.size() == 0) continue;
                acc[i].dw = Tensor(net.params[i].weights.shape());
                acc[i].db = Tensor(net.params[i].bias.shape());
            }

            for (std::size_t s = start; s < stop; ++s) {
                const Tensor x = train_ds.sample(order[s]);
                auto [scores, cache] = forward(net, x);
                const Tensor e_f =
                    loss_grad_softmax_ce(scores, one_hot(train_ds.class_count,
                                                         train_ds.labels[order[s]]));
                ErrorSignal errs;
                switch (cfg.rule.kind) {
                    case RuleKind::Bp: errs = bp_backward(net, cache, e_f); break;
                    case RuleKind::Fa: errs = fa_backward(net, fb, cache, e_f); break;
                    default: errs = dfa_backward(net, fb, cache, e_f); break;
                }
                std::vector<LayerGrads> g = grads_from_errors(net, cache, errs);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (g[i].dw.size() == 0) continue;
                    for (std::size_t j = 0; j < g[i].dw.size(); ++j) acc[i].dw[j] += g[i].dw[j];
                    for (std::size_t j = 0; j < g[i].db.size(); ++j) acc[i].db[j] += g[i].db[j];
                }
            }

            const double scale = lr / double(stop - start);
            for (std::size_t i = 0; i < net.specs.size(); ++i) {
                if (acc[i].dw.size() == 0) continue;
                Tensor& w = net.params[i].weights;
                Tensor& b = net.params[i].bias;
                for (std::size_t j = 0; j < w.size(); ++j) w[j] -= scale * acc[i].dw[j];
                for (std::size_t j = 0; j < b.size(); ++j) b[j] -= scale * acc[i].db[j];
            }
            apply_masks(net);

            if (!params_finite(net)) {
                rec.failed = true;
                return;
            }
        }

        if ((epoch + 1) % cfg.eval_every == 0) {
            rec.accuracy.push_back(evaluate(net, nullptr, test_ds));
            rec.sparsity_series.push_back(measured_sparsity(net));
            rec.epoch_seconds.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
    }
}

void train_hebbian(Network& net, const TrainingConfig& cfg, const Dataset& train_ds,
                   const Dataset& test_ds, RunRecord& rec) {
    Rng base(cfg.seed);
    const std::size_t n = train_ds.size();
    const Shape sample_shape = train_ds.sample_shape();
    const std::size_t dim = shape_numel(sample_shape);

    // Optional whitening, fit on the training inputs as given.
    std::vector<Tensor> train_in(n), test_in(test_ds.size());
    if (cfg.hb_zca) {
        Tensor flat_train = train_ds.images.reshaped({n, dim});
        ZcaTransform zca = zca_fit(flat_train, cfg.zca_epsilon);
        Tensor wt = zca_apply(zca, flat_train);
        for (std::size_t i = 0; i < n; ++i) {
            Tensor row({dim});
            std::copy_n(wt.data().data() + i * dim, dim, row.data().data());
            train_in[i] = row.reshaped(sample_shape);
        }
        Tensor flat_test = test_ds.images.reshaped({test_ds.size(), dim});
        Tensor wt2 = zca_apply(zca, flat_test);
        for (std::size_t i = 0; i < test_ds.size(); ++i) {
            Tensor row({dim});
            std::copy_n(wt2.data().data() + i * dim, dim, row.data().data());
            test_in[i] = row.reshaped(sample_shape);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) train_in[i] = train_ds.sample(i);
        for (std::size_t i = 0; i < test_ds.size(); ++i) test_in[i] = test_ds.sample(i);
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();

        Rng shuffle_rng = base.fork(seedlab::kShuffle).fork(epoch);
        shuffle_rng.shuffle(order);
        std::vector<Tensor> pass(n);
        for (std::size_t i = 0; i < n; ++i) pass[i] = train_in[order[i]];

        // Greedy bottom-up: each parameterized layer trains over the full
        // pass while everything below stays frozen at its current state.
        for (std::size_t layer = 0; layer < net.specs.size(); ++layer) {
            if (net.params[layer].weights.size() == 0) continue;
            hebbian_train_layer(net, layer, std::span<const Tensor>(pass), cfg.rule);
            Tensor& w = net.params[layer].weights;
            if (cfg.rule.weight_decay != 1.0)
                for (double& v : w.data()) v *= cfg.rule.weight_decay;
            magnitude_prune(w, cfg.rule.prune_fraction);
        }

        if ((epoch + 1) % cfg.eval_every == 0) {
            // Refit the readout on the current features.
            const std::size_t fdim = shape_numel(output_shape(net)) + 1;
            Tensor xtr({n, fdim}), ytr({n, train_ds.class_count});
            for (std::size_t i = 0; i < n; ++i) {
                Tensor row = feature_row(net, train_in[i]);
                std::copy_n(row.data().data(), fdim, xtr.data().data() + i * fdim);
                ytr[i * train_ds.class_count + train_ds.labels[i]] = 1.0;
            }
            RidgeClassifier clf = ridge_fit(xtr, ytr, cfg.ridge_lambda);

            std::size_t correct = 0;
            for (std::size_t i = 0; i < test_ds.size(); ++i) {
                const std::size_t pred = ridge_predict(clf, feature_row(net, test_in[i]))[0];
                if (pred == test_ds.labels[i]) ++correct;
            }
            rec.accuracy.push_back(double(correct) / double(test_ds.size()));
            rec.sparsity_series.push_back(measured_sparsity(net));
            rec.epoch_seconds.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
    }
}

} // namespace

RunRecord train(Network& net, const TrainingConfig& cfg, const Dataset& train_ds,
                const Dataset& test_ds) {
    const bool hebbian = is_hebbian_rule(cfg.rule.kind);
    if ((net.head == HeadKind::Ridge) != hebbian)
        throw ConfigError("train: ridge head required iff the rule is Hebbian");
    if (cfg.epochs < 1 || cfg.batch_size < 1)
        throw ConfigError("train: epochs and batch_size must be >= 1");
    if (cfg.rule.eta < 0.0) throw ConfigError("train: eta must be >= 0");
    if (hebbian && cfg.sparsity > 0.0)
        throw ConfigError("train: the sparsity benchmark does not apply to Hebbian rules");

    RunRecord rec = make_record(cfg);
    try {
        if (hebbian)
            train_hebbian(net, cfg, train_ds, test_ds, rec);
        else
            train_gradient(net, cfg, train_ds, test_ds, rec);
    } catch (const NumericError&) {
        rec.failed = true;
    }
    rec.final_sparsity = measured_sparsity(net);
    return rec;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

Aggregate aggregate(const std::vector<RunRecord>& runs) {
    if (runs.empty()) throw ConfigError("aggregate: no runs");
    const RunRecord& first = runs.front();
    for (const RunRecord& r : runs) {
        if (r.fingerprint == first.fingerprint) continue;
        std::string fields;
        auto note = [&fields](const char* name) {
            if (!fields.empty()) fields += ", ";
            fields += name;
        };
        if (r.rule != first.rule) note("rule");
        if (r.data_fraction != first.data_fraction) note("data_fraction");
        if (r.noise_kind != first.noise_kind) note("noise_kind");
        if (r.noise_level != first.noise_level) note("noise_level");
        if (r.sparsity_cfg != first.sparsity_cfg) note("sparsity");
        if (r.epochs != first.epochs) note("epochs");
        if (fields.empty()) fields = "hyper-parameters (fingerprint mismatch)";
        throw ConfigError("aggregate: runs differ in " + fields);
    }

    std::size_t len = 0;
    for (const RunRecord& r : runs) len = std::max(len, r.accuracy.size());

    Aggregate agg;
    agg.run_count = runs.size();
    agg.mean.resize(len, 0.0);
    agg.stddev.resize(len, 0.0);
    for (std::size_t e = 0; e < len; ++e) {
        std::size_t count = 0;
        double sum = 0.0;
        for (const RunRecord& r : runs)
            if (e < r.accuracy.size()) {
                sum += r.accuracy[e];
                ++count;
            }
        const double mean = sum / double(count);
        agg.mean[e] = mean;
        if (count > 1) {
            double ss = 0.0;
            for (const RunRecord& r : runs)
                if (e < r.accuracy.size()) ss += (r.accuracy[e] - mean) * (r.accuracy[e] - mean);
            agg.stddev[e] = std::sqrt(ss / double(count - 1));
        }
    }
    return agg;
}

} // namespace biograd
