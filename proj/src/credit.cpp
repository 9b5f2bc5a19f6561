#include "biograd/credit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "biograd/error.hpp"
#include "biograd/rng.hpp"

namespace biograd {

std::string to_string(RuleKind k) {
    switch (k) {
        case RuleKind::Bp: return "bp";
        case RuleKind::Fa: return "fa";
        case RuleKind::Dfa: return "dfa";
        case RuleKind::HebbVanilla: return "hb_vanilla";
        case RuleKind::HebbInstar: return "hb";
    }
    return "?";
}

RuleKind rule_from_string(const std::string& s) {
    if (s == "bp") return RuleKind::Bp;
    if (s == "fa") return RuleKind::Fa;
    if (s == "dfa") return RuleKind::Dfa;
    if (s == "hb") return RuleKind::HebbInstar;
    if (s == "hb_vanilla") return RuleKind::HebbVanilla;
    throw ConfigError("unknown rule '" + s + "' (expected bp, fa, dfa, hb or hb_vanilla)");
}

bool is_gradient_rule(RuleKind k) {
    return k == RuleKind::Bp || k == RuleKind::Fa || k == RuleKind::Dfa;
}

bool is_hebbian_rule(RuleKind k) {
    return k == RuleKind::HebbVanilla || k == RuleKind::HebbInstar;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

namespace {

void check_one_hot(const Tensor& t) {
    double sum = 0.0;
    for (double v : t.data()) {
        if (v != 0.0 && v != 1.0) throw ConfigError("target is not one-hot");
        sum += v;
    }
    if (sum != 1.0) throw ConfigError("target is not one-hot");
}

Tensor softmax(const Tensor& scores) {
    Tensor p(scores.shape());
    double mx = scores[0];
    for (double v : scores.data()) mx = std::max(mx, v);
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] - mx);
        z += p[i];
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] /= z;
    return p;
}

} // namespace

Tensor loss_grad_softmax_ce(const Tensor& scores, const Tensor& one_hot) {
    if (!scores.all_finite()) throw NumericError("loss_grad_softmax_ce: non-finite scores");
    if (scores.shape() != one_hot.shape())
        throw DimensionError("loss_grad_softmax_ce: scores " + shape_str(scores.shape()) +
                             " vs target " + shape_str(one_hot.shape()));
    check_one_hot(one_hot);
    Tensor e = softmax(scores);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] -= one_hot[i];
    return e;
}

double softmax_ce_loss(const Tensor& scores, const Tensor& one_hot) {
    if (!scores.all_finite()) throw NumericError("softmax_ce_loss: non-finite scores");
    double mx = scores[0];
    for (double v : scores.data()) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : scores.data()) z += std::exp(v - mx);
    double loss = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (one_hot[i] != 0.0) loss -= one_hot[i] * (scores[i] - mx - std::log(z));
    return loss;
}

// ---------------------------------------------------------------------------
// Feedback matrices
// ---------------------------------------------------------------------------

namespace {

std::size_t last_param_layer(const Network& net) {
    for (std::size_t i = net.specs.size(); i-- > 0;)
        if (net.params[i].weights.size() > 0) return i;
    throw ConfigError("network has no parameterized layers");
}

Shape preactivation_shape(const Network& net, std::size_t layer) {
    Shape cur = net.input_shape;
    for (std::size_t i = 0; i <= layer; ++i) cur = layer_output_shape(net.specs[i], cur);
    return cur;
}

} // namespace

FeedbackMatrices make_feedback(const Network& net, FeedbackMode mode, std::uint64_t seed) {
    FeedbackMatrices fb;
    fb.mode = mode;
    fb.b.resize(net.specs.size());
    Rng base(seed);
    const std::size_t head = last_param_layer(net);

    for (std::size_t i = 0; i < net.specs.size(); ++i) {
        const LayerSpec& spec = net.specs[i];
        if (spec.kind == LayerKind::Pool) continue;

        if (mode == FeedbackMode::Fa) {
            if (i == 0) continue; // nothing below to project onto
            Rng r = base.fork(i);
            if (spec.kind == LayerKind::Dense) {
                // Mirrors w^T: in x out.
                const std::size_t out = net.params[i].weights.dim(0);
                const std::size_t in = net.params[i].weights.dim(1);
                const double stddev = 1.0 / std::sqrt(double(out));
                fb.b[i] = Tensor({in, out});
                for (double& v : fb.b[i].data()) v = r.normal(0.0, stddev);
            } else {
                // Same shape as the kernels; used by the input-gradient routine.
                const Shape ks = net.params[i].weights.shape();
                const double stddev = 1.0 / std::sqrt(double(ks[0] * ks[2] * ks[3]));
                fb.b[i] = Tensor(ks);
                for (double& v : fb.b[i].data()) v = r.normal(0.0, stddev);
            }
        } else {
            if (i == head) continue; // final layer consumes e_f directly
            Rng r = base.fork(i);
            const std::size_t width = shape_numel(preactivation_shape(net, i));
            const std::size_t classes = net.params[head].weights.dim(0);
            const double stddev = 1.0 / std::sqrt(double(classes));
            fb.b[i] = Tensor({width, classes});
            for (double& v : fb.b[i].data()) v = r.normal(0.0, stddev);
        }
    }
    return fb;
}

// ---------------------------------------------------------------------------
// Backward passes
// ---------------------------------------------------------------------------

namespace {

Tensor hadamard(Tensor a, const Tensor& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
    return a;
}

// Error transport shared by bp and fa. `transport` carries the matrix used to
// project layer j's error onto its input: the layer's own weights for bp, the
// feedback matrix for fa. Dense matrices for bp are in forward orientation
// (out x in) and get applied transposed; fa supplies the mirrored layout.
ErrorSignal descend(const Network& net, const ForwardCache& cache, const Tensor& e_f,
                    const std::function<const Tensor&(std::size_t)>& transport,
                    bool transport_is_forward_weights) {
    const std::size_t n = net.specs.size();
    if (cache.pre.size() != n)
        throw DimensionError("backward: cache does not match network layer count");
    if (e_f.size() != cache.pre.back().size())
        throw DimensionError("backward: final error " + shape_str(e_f.shape()) +
                             " does not match head pre-activations " +
                             shape_str(cache.pre.back().shape()));

    ErrorSignal sig;
    sig.final_error = e_f;
    sig.layer_error.resize(n);

    sig.layer_error[n - 1] =
        hadamard(e_f, activation_deriv(net.specs[n - 1].activation, cache.pre[n - 1]));

    for (std::size_t i = n - 1; i-- > 0;) {
        const std::size_t above = i + 1;
        const Tensor& e_above = sig.layer_error[above];
        Tensor u;
        switch (net.specs[above].kind) {
            case LayerKind::Dense: {
                const Tensor& m = transport(above);
                Tensor flat = transport_is_forward_weights
                                  ? matvec_transpose(m, e_above)
                                  : matvec(m, e_above);
                u = flat.reshaped(cache.pre[i].shape());
                break;
            }
            case LayerKind::Conv: {
                const Tensor& m = transport(above);
                u = conv2d_backward_input(m, e_above, cache.post[i].shape(),
                                          net.specs[above].stride, net.specs[above].padding);
                break;
            }
            case LayerKind::Pool: {
                u = maxpool2d_backward(*cache.pool[above], e_above);
                break;
            }
        }
        sig.layer_error[i] =
            hadamard(std::move(u), activation_deriv(net.specs[i].activation, cache.pre[i]));
    }
    return sig;
}

} // namespace

ErrorSignal bp_backward(const Network& net, const ForwardCache& cache, const Tensor& e_f) {
    return descend(net, cache, e_f,
                   [&net](std::size_t j) -> const Tensor& { return net.params[j].weights; },
                   /*transport_is_forward_weights=*/true);
}

ErrorSignal fa_backward(const Network& net, const FeedbackMatrices& fb, const ForwardCache& cache,
                        const Tensor& e_f) {
    if (fb.mode != FeedbackMode::Fa)
        throw ConfigError("fa_backward: feedback matrices were built for dfa");
    if (fb.b.size() != net.specs.size())
        throw ConfigError("fa_backward: feedback built for a different topology");
    for (std::size_t j = 1; j < net.specs.size(); ++j) {
        if (net.specs[j].kind == LayerKind::Pool) continue;
        if (fb.b[j].size() == 0)
            throw ConfigError("fa_backward: missing feedback matrix for layer " +
                              std::to_string(j));
        if (net.specs[j].kind == LayerKind::Conv &&
            fb.b[j].shape() != net.params[j].weights.shape())
            throw ConfigError("fa_backward: feedback built for a different topology at layer " +
                              std::to_string(j));
    }
    return descend(net, cache, e_f,
                   [&fb](std::size_t j) -> const Tensor& { return fb.b[j]; },
                   /*transport_is_forward_weights=*/false);
}

ErrorSignal dfa_backward(const Network& net, const FeedbackMatrices& fb, const ForwardCache& cache,
                         const Tensor& e_f) {
    if (fb.mode != FeedbackMode::Dfa)
        throw ConfigError("dfa_backward: feedback matrices were built for fa");
    if (fb.b.size() != net.specs.size())
        throw ConfigError("dfa_backward: feedback built for a different topology");
    const std::size_t n = net.specs.size();
    const std::size_t head = last_param_layer(net);
    if (e_f.size() != cache.pre[head].size())
        throw DimensionError("dfa_backward: final error " + shape_str(e_f.shape()) +
                             " does not match head pre-activations");

    ErrorSignal sig;
    sig.final_error = e_f;
    sig.layer_error.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (net.params[i].weights.size() == 0) continue; // pools carry no update
        if (i == head) {
            sig.layer_error[i] =
                hadamard(e_f, activation_deriv(net.specs[i].activation, cache.pre[i]));
            continue;
        }
        const Tensor& b = fb.b[i];
        if (b.size() == 0)
            throw ConfigError("dfa_backward: missing feedback matrix for layer " +
                              std::to_string(i));
        if (b.dim(0) != cache.pre[i].size() || b.dim(1) != e_f.size())
            throw ConfigError("dfa_backward: feedback built for a different topology at layer " +
                              std::to_string(i));
        Tensor u = matvec(b, e_f).reshaped(cache.pre[i].shape());
        sig.layer_error[i] =
            hadamard(std::move(u), activation_deriv(net.specs[i].activation, cache.pre[i]));
    }
    return sig;
}

// ---------------------------------------------------------------------------
// Updates
// ---------------------------------------------------------------------------

Tensor weight_update_from_error(const Tensor& error, const Tensor& z_prev, double eta) {
    Tensor dw = outer(error.flattened(), z_prev.flattened());
    for (double& v : dw.data()) v *= -eta;
    return dw;
}

Tensor bias_update_from_error(const Tensor& error, double eta) {
    Tensor db = error;
    for (double& v : db.data()) v *= -eta;
    return db;
}

std::vector<LayerGrads> grads_from_errors(const Network& net, const ForwardCache& cache,
                                          const ErrorSignal& errs) {
    if (errs.layer_error.size() != net.specs.size())
        throw DimensionError("grads_from_errors: error signal does not match network");
    std::vector<LayerGrads> grads(net.specs.size());
    for (std::size_t i = 0; i < net.specs.size(); ++i) {
        const LayerSpec& spec = net.specs[i];
        if (net.params[i].weights.size() == 0) continue;
        const Tensor& e = errs.layer_error[i];
        if (e.size() == 0)
            throw DimensionError("grads_from_errors: no error for layer " + std::to_string(i));
        const Tensor& input = i == 0 ? cache.input : cache.post[i - 1];
        if (spec.kind == LayerKind::Dense) {
            grads[i].dw = outer(e.flattened(), input.flattened());
            grads[i].db = e.flattened();
        } else {
            auto [dw, db] = conv2d_backward_params(input, e, net.params[i].weights.shape(),
                                                   spec.stride, spec.padding);
            grads[i].dw = std::move(dw);
            grads[i].db = std::move(db);
        }
    }
    return grads;
}

Tensor hebbian_vanilla_update(const Tensor& x, const Tensor& z, double eta) {
    Tensor dw = outer(z.flattened(), x.flattened());
    for (double& v : dw.data()) v *= eta;
    return dw;
}

Tensor instar_update(const Tensor& x, const Tensor& z, const Tensor& w, double eta) {
    const std::size_t units = z.size(), in = x.size();
    if (w.size() != units * in)
        throw DimensionError("instar_update: weights " + shape_str(w.shape()) +
                             " incompatible with " + std::to_string(units) + " units x " +
                             std::to_string(in) + " inputs");
    Tensor dw(w.shape());
    for (std::size_t j = 0; j < units; ++j)
        for (std::size_t i = 0; i < in; ++i)
            dw[j * in + i] = eta * z[j] * (x[i] - w[j * in + i]);
    return dw;
}

Tensor kwta_triangle(const Tensor& pre_activations, std::size_t k) {
    const std::size_t f = pre_activations.size();
    if (k < 1 || k > f)
        throw ConfigError("kwta_triangle: k = " + std::to_string(k) +
                          " out of range for " + std::to_string(f) + " units");
    double mean = 0.0;
    for (double v : pre_activations.data()) mean += v;
    mean /= double(f);

    Tensor t(pre_activations.shape());
    for (std::size_t i = 0; i < f; ++i)
        t[i] = std::max(0.0, pre_activations[i] - mean);
    if (k == f) return t;

    std::vector<std::size_t> order(f);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&t](std::size_t a, std::size_t b) { return t[a] > t[b]; });
    Tensor z(pre_activations.shape());
    for (std::size_t i = 0; i < k; ++i) z[order[i]] = t[order[i]];
    return z;
}

// ---------------------------------------------------------------------------
// Layer-local unsupervised training
// ---------------------------------------------------------------------------

namespace {

Tensor forward_below(const Network& net, std::size_t layer, const Tensor& x) {
    Tensor cur = x;
    for (std::size_t i = 0; i < layer; ++i) {
        const LayerSpec& spec = net.specs[i];
        Tensor a;
        switch (spec.kind) {
            case LayerKind::Conv:
                a = conv2d_forward(cur, net.params[i].weights, net.params[i].bias, spec.stride,
                                   spec.padding)
                        .first;
                break;
            case LayerKind::Pool:
                a = maxpool2d(cur, spec.kernel, spec.stride).first;
                break;
            case LayerKind::Dense:
                a = affine(net.params[i].weights, cur.flattened(), net.params[i].bias);
                break;
        }
        cur = activation_apply(spec.activation, a);
    }
    return cur;
}

} // namespace

void hebbian_train_layer(Network& net, std::size_t layer, std::span<const Tensor> samples,
                         const UpdateRule& rule) {
    if (!is_hebbian_rule(rule.kind))
        throw ConfigError("hebbian_train_layer: rule must be hb or hb_vanilla");
    if (layer >= net.specs.size() || net.params[layer].weights.size() == 0)
        throw ConfigError("hebbian_train_layer: layer " + std::to_string(layer) +
                          " has no weights");

    const LayerSpec& spec = net.specs[layer];
    Tensor& w = net.params[layer].weights;
    const bool instar = rule.kind == RuleKind::HebbInstar;

    std::size_t step = 0;
    for (const Tensor& sample : samples) {
        ++step;
        Tensor u = forward_below(net, layer, sample);

        if (spec.kind == LayerKind::Dense) {
            Tensor uf = u.flattened();
            Tensor a = affine(w, uf, net.params[layer].bias);
            Tensor z = kwta_triangle(a, std::min(rule.kwta_k, a.size()));
            const std::size_t in = uf.size();
            for (std::size_t j = 0; j < z.size(); ++j) {
                if (z[j] == 0.0) continue;
                double* row = w.data().data() + j * in;
                if (instar) {
                    for (std::size_t i = 0; i < in; ++i)
                        row[i] += rule.eta * z[j] * (uf[i] - row[i]);
                } else {
                    for (std::size_t i = 0; i < in; ++i) row[i] += rule.eta * z[j] * uf[i];
                }
            }
        } else {
            Tensor a = conv2d_forward(u, w, net.params[layer].bias, spec.stride, spec.padding)
                           .first;
            const std::size_t f = a.dim(0), oh = a.dim(1), ow = a.dim(2);
            const std::size_t c = u.dim(0), h = u.dim(1), wd = u.dim(2), k = spec.kernel;
            Tensor site({f});
            for (std::size_t y = 0; y < oh; ++y) {
                for (std::size_t x = 0; x < ow; ++x) {
                    for (std::size_t fi = 0; fi < f; ++fi) site[fi] = a(fi, y, x);
                    Tensor z = kwta_triangle(site, std::min(rule.kwta_k, f));
                    for (std::size_t fi = 0; fi < f; ++fi) {
                        if (z[fi] == 0.0) continue;
                        const double g = rule.eta * z[fi];
                        for (std::size_t ci = 0; ci < c; ++ci) {
                            for (std::size_t ky = 0; ky < k; ++ky) {
                                const std::ptrdiff_t iy = std::ptrdiff_t(y * spec.stride + ky) -
                                                          std::ptrdiff_t(spec.padding);
                                for (std::size_t kx = 0; kx < k; ++kx) {
                                    const std::ptrdiff_t ix =
                                        std::ptrdiff_t(x * spec.stride + kx) -
                                        std::ptrdiff_t(spec.padding);
                                    const bool inside = iy >= 0 && iy < std::ptrdiff_t(h) &&
                                                        ix >= 0 && ix < std::ptrdiff_t(wd);
                                    const double xi =
                                        inside ? u(ci, std::size_t(iy), std::size_t(ix)) : 0.0;
                                    double& wv = w(fi, ci, ky, kx);
                                    wv += instar ? g * (xi - wv) : g * xi;
                                }
                            }
                        }
                    }
                }
            }
        }
        if (!w.all_finite())
            throw NumericError("hebbian_train_layer: non-finite weights at step " +
                               std::to_string(step));
    }
}

// ---------------------------------------------------------------------------
// Ridge readout
// ---------------------------------------------------------------------------

RidgeClassifier ridge_fit(const Tensor& features, const Tensor& one_hot_labels, double lambda) {
    if (features.rank() != 2 || one_hot_labels.rank() != 2 ||
        features.dim(0) != one_hot_labels.dim(0))
        throw DimensionError("ridge_fit: features " + shape_str(features.shape()) +
                             " vs labels " + shape_str(one_hot_labels.shape()));
    if (features.dim(0) < 1) throw ConfigError("ridge_fit: need at least one sample");
    if (lambda < 0.0) throw ConfigError("ridge_fit: lambda must be >= 0");

    const std::size_t n = features.dim(0), d = features.dim(1), c = one_hot_labels.dim(1);
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> x(features.data().data(), Eigen::Index(n), Eigen::Index(d));
    Eigen::Map<const RowMat> y(one_hot_labels.data().data(), Eigen::Index(n), Eigen::Index(c));

    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    Eigen::MatrixXd rhs = x.transpose() * y;

    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericError("ridge_fit: singular normal equations; use lambda > 0");
    Eigen::MatrixXd wt = llt.solve(rhs); // d x c

    RidgeClassifier clf;
    clf.lambda = lambda;
    clf.weights = Tensor({c, d});
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t di = 0; di < d; ++di)
            clf.weights[ci * d + di] = wt(Eigen::Index(di), Eigen::Index(ci));
    if (!clf.weights.all_finite())
        throw NumericError("ridge_fit: non-finite solution; use lambda > 0");
    return clf;
}

Tensor ridge_scores(const RidgeClassifier& clf, const Tensor& features) {
    const std::size_t c = clf.weights.dim(0), d = clf.weights.dim(1);
    if (features.rank() == 1) {
        if (features.size() != d)
            throw DimensionError("ridge_scores: features " + shape_str(features.shape()) +
                                 " vs weights " + shape_str(clf.weights.shape()));
        return matvec(clf.weights, features);
    }
    if (features.rank() != 2 || features.dim(1) != d)
        throw DimensionError("ridge_scores: features " + shape_str(features.shape()) +
                             " vs weights " + shape_str(clf.weights.shape()));
    const std::size_t n = features.dim(0);
    Tensor out({n, c});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ci = 0; ci < c; ++ci) {
            double acc = 0.0;
            for (std::size_t di = 0; di < d; ++di)
                acc += clf.weights[ci * d + di] * features[i * d + di];
            out[i * c + ci] = acc;
        }
    }
    return out;
}

std::vector<std::size_t> ridge_predict(const RidgeClassifier& clf, const Tensor& features) {
    Tensor scores = ridge_scores(clf, features.rank() == 1 ? features.reshaped({1, features.size()})
                                                           : features);
    const std::size_t n = scores.dim(0), c = scores.dim(1);
    std::vector<std::size_t> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t ci = 1; ci < c; ++ci)
            if (scores[i * c + ci] > scores[i * c + best]) best = ci; // ties to lowest index
        pred[i] = best;
    }
    return pred;
}

} // namespace biograd
