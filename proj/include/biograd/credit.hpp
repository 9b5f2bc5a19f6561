#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "biograd/network.hpp"
#include "biograd/tensor.hpp"

namespace biograd {

enum class RuleKind { Bp, Fa, Dfa, HebbVanilla, HebbInstar };

std::string to_string(RuleKind k);
RuleKind rule_from_string(const std::string& s);
bool is_gradient_rule(RuleKind k);
bool is_hebbian_rule(RuleKind k);

struct UpdateRule {
    RuleKind kind = RuleKind::Bp;
    double eta = 1e-3;          // learning rate
    std::size_t kwta_k = 1;     // winners per site (Hebbian)
    double weight_decay = 1.0;  // multiplicative per-epoch shrink (Hebbian)
    double prune_fraction = 0;  // optional per-layer magnitude prune (Hebbian)
};

enum class FeedbackMode { Fa, Dfa };

// Fixed random error-transport matrices, drawn once and immutable afterwards.
// Fa: per parameterized layer above the first, shaped like that layer's
//     weights so errors travel the mirrored pathway.
// Dfa: per parameterized hidden layer, mapping the final error vector
//      directly onto that layer's flattened pre-activations.
struct FeedbackMatrices {
    FeedbackMode mode = FeedbackMode::Fa;
    std::vector<Tensor> b; // index-aligned with net layers; unused slots empty
};

FeedbackMatrices make_feedback(const Network& net, FeedbackMode mode, std::uint64_t seed);

struct ErrorSignal {
    std::vector<Tensor> layer_error; // per layer, shaped like pre-activations
    Tensor final_error;
};

// e_f = softmax(scores) - one_hot
Tensor loss_grad_softmax_ce(const Tensor& scores, const Tensor& one_hot);
double softmax_ce_loss(const Tensor& scores, const Tensor& one_hot);

ErrorSignal bp_backward(const Network& net, const ForwardCache& cache, const Tensor& e_f);
ErrorSignal fa_backward(const Network& net, const FeedbackMatrices& fb, const ForwardCache& cache,
                        const Tensor& e_f);
ErrorSignal dfa_backward(const Network& net, const FeedbackMatrices& fb, const ForwardCache& cache,
                         const Tensor& e_f);

// Dense update: delta_w = -eta * e z^T, delta_b = -eta * e.
Tensor weight_update_from_error(const Tensor& error, const Tensor& z_prev, double eta);
Tensor bias_update_from_error(const Tensor& error, double eta);

// Raw parameter gradients (d loss / d w before the -eta scaling) per
// parameterized layer, computed from a backward error signal.
struct LayerGrads {
    Tensor dw;
    Tensor db;
};
std::vector<LayerGrads> grads_from_errors(const Network& net, const ForwardCache& cache,
                                          const ErrorSignal& errs);

// delta_w[j,i] = eta * z[j] * x[i]
Tensor hebbian_vanilla_update(const Tensor& x, const Tensor& z, double eta);

// delta_w[j,i] = eta * z[j] * (x[i] - w[j,i])
Tensor instar_update(const Tensor& x, const Tensor& z, const Tensor& w, double eta);

// Triangle response t = max(0, a - mean(a)) over one site's channel vector,
// gated to keep the k strongest responses (ties to lower index).
Tensor kwta_triangle(const Tensor& pre_activations, std::size_t k);

// Unsupervised competitive pass over `samples` updating exactly one layer;
// layers below are applied frozen. Throws NumericError (with the step index)
// if weights leave the finite range.
void hebbian_train_layer(Network& net, std::size_t layer, std::span<const Tensor> samples,
                         const UpdateRule& rule);

// ---------------------------------------------------------------------------
// Closed-form multiclass readout
// ---------------------------------------------------------------------------

struct RidgeClassifier {
    Tensor weights; // classes x features
    double lambda = 0.0;
};

// Solves (X^T X + lambda I) W^T = X^T Y.
RidgeClassifier ridge_fit(const Tensor& features, const Tensor& one_hot_labels, double lambda);

Tensor ridge_scores(const RidgeClassifier& clf, const Tensor& features);
std::vector<std::size_t> ridge_predict(const RidgeClassifier& clf, const Tensor& features);

} // namespace biograd
