#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "biograd/credit.hpp"
#include "biograd/dataset.hpp"
#include "biograd/network.hpp"

namespace biograd {

enum class NoiseKind { None, Random, Pepper };

std::string to_string(NoiseKind k);
NoiseKind noise_from_string(const std::string& s);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::None;
    double level = 0.0;
    std::uint64_t seed = 0;
};

struct LrSchedule {
    enum class Kind { Constant, Step };
    Kind kind = Kind::Constant;
    double gamma = 0.9;
    std::size_t step_size = 1;
};

// Learning rate in force during `epoch` (0-based): eta0 * gamma^floor(e/step).
double lr_at_epoch(double eta0, const LrSchedule& s, std::size_t epoch);

struct TrainingConfig {
    UpdateRule rule;
    std::vector<LayerSpec> layers; // feature stack, without the readout layer
    Shape input_shape;
    std::size_t class_count = 0;

    std::size_t epochs = 20;
    std::size_t batch_size = 100;
    double data_fraction = 1.0;
    LrSchedule schedule;
    double sparsity = 0.0;
    NoiseSpec noise;
    std::uint64_t seed = 0;
    std::size_t eval_every = 1;

    double init_gain = 1.0;
    double ridge_lambda = 1e-3; // Hebbian readout
    bool hb_zca = true;         // whiten inputs on the Hebbian path
    double zca_epsilon = 1e-5;
};

// Canonical description of every field except the seed.
std::string config_canonical(const TrainingConfig& cfg);
std::string config_fingerprint(const TrainingConfig& cfg);

struct RunRecord {
    std::string fingerprint;
    std::uint64_t seed = 0;
    std::vector<double> accuracy;        // per completed evaluation
    std::vector<double> sparsity_series; // measured at the same points
    std::vector<double> epoch_seconds;
    double final_sparsity = 0.0;
    bool failed = false;

    // Sweep axes echoed for CSV emission and aggregation diagnostics.
    std::string rule;
    double data_fraction = 1.0;
    std::string noise_kind = "none";
    double noise_level = 0.0;
    double sparsity_cfg = 0.0;
    std::size_t epochs = 0;
    std::size_t eval_every = 1;
};

// Builds the network demanded by the rule (linear readout for gradient rules,
// ridge head for Hebbian) and trains it on the given splits. Subsetting and
// noise are the caller's business; this function consumes the data as given.
RunRecord train(Network& net, const TrainingConfig& cfg, const Dataset& train_ds,
                const Dataset& test_ds);

// Top-1 accuracy; prediction ties break to the lowest class index. The ridge
// head is required iff the network was built with HeadKind::Ridge.
double evaluate(const Network& net, const RidgeClassifier* head, const Dataset& ds);

struct Aggregate {
    std::vector<double> mean;
    std::vector<double> stddev; // sample (n-1); zero for a single run
    std::size_t run_count = 0;
};

// Runs must share a fingerprint (seed excluded); mismatches name the fields
// that diverge.
Aggregate aggregate(const std::vector<RunRecord>& runs);

// Network construction per rule: relu feature stack plus a linear readout for
// bp/fa/dfa, triangle feature stack with a ridge head for Hebbian rules.
Network build_for_rule(const TrainingConfig& cfg);

} // namespace biograd
