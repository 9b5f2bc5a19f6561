#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "biograd/dataset.hpp"
#include "biograd/train.hpp"

namespace biograd {

// Declarative experiment file: one training setup plus sweep axes. Parsed
// strictly; unknown or duplicate keys are rejected with their position.
struct SweepConfig {
    std::string dataset = "synthetic"; // synthetic | cifar10 | cifar100
    std::string data_dir;
    std::string output_dir = "out";

    std::vector<LayerSpec> topology; // empty = per-dataset default
    std::vector<RuleKind> rules;
    std::size_t epochs = 20;
    std::size_t batch_size = 100;
    std::size_t eval_every = 1;

    std::vector<double> data_fractions{1.0};
    bool stratified_subset = true;
    NoiseKind noise_kind = NoiseKind::None;
    std::vector<double> noise_levels{0.0};
    bool pepper_per_channel = false;
    std::vector<double> sparsities{0.0};
    std::vector<std::uint64_t> seeds;

    double bp_lr = 1e-5;
    double fa_lr = 5e-5;
    double dfa_lr = 5e-5;
    double hb_lr = 1e-5;
    LrSchedule bp_schedule{LrSchedule::Kind::Step, 0.9, 1};
    double hb_weight_decay = 0.95;
    std::size_t hb_k = 1;
    double hb_prune = 0.0;
    bool hb_zca = true;
    double zca_epsilon = 1e-5;
    double ridge_lambda = 1e-3;
    double init_gain = 1.0;

    std::size_t synthetic_train_per_class = 300;
    std::size_t synthetic_test_per_class = 100;
    std::uint64_t synthetic_seed = 7;

    bool save_checkpoints = false;
};

SweepConfig parse_sweep_config(const std::string& path);
SweepConfig parse_sweep_config_text(const std::string& text);

// topology string: "conv:F:k:s:p, pool:w:s, ..."
std::vector<LayerSpec> parse_topology(const std::string& text);

Shape dataset_input_shape(const SweepConfig& cfg);
std::size_t dataset_class_count(const SweepConfig& cfg);
std::vector<LayerSpec> default_topology(const SweepConfig& cfg);

// Cartesian product of (rules x data_fractions x noise_levels x sparsities x
// seeds), in that nesting order. Validates every run up front.
std::vector<TrainingConfig> expand_sweep(const SweepConfig& cfg);

// Subsets/noises the data per run config and trains; used by the runner and
// directly by tests.
RunRecord run_single(const TrainingConfig& run, const SweepConfig& cfg,
                     const Dataset& base_train, const Dataset& base_test);

struct SweepResult {
    std::vector<RunRecord> runs; // expansion order
};

// Executes the whole sweep on `threads` workers, writes runs.jsonl and
// runs.csv under output_dir and a summary table to `log`.
SweepResult run_sweep(const SweepConfig& cfg, std::size_t threads, std::ostream& log);

void print_summary(const SweepResult& result, std::ostream& os);

} // namespace biograd
