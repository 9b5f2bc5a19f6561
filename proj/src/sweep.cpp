#include "biograd/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "biograd/checkpoint.hpp"
#include "biograd/error.hpp"
#include "biograd/records.hpp"
#include "biograd/rng.hpp"

namespace biograd {

// ---------------------------------------------------------------------------
// Strict key = value parsing
// ---------------------------------------------------------------------------

namespace {

namespace seedlab {
constexpr std::uint64_t kSubset = 5;
constexpr std::uint64_t kNoiseTrain = 6;
constexpr std::uint64_t kNoiseTest = 7;
} // namespace seedlab

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    const std::string last = trim(cur);
    if (!last.empty() || !out.empty()) out.push_back(last);
    if (out.size() == 1 && out[0].empty()) out.clear();
    return out;
}

struct Pos {
    int line;
    int col;
};

[[noreturn]] void fail(const std::string& msg, Pos p) { throw ParseError(msg, p.line, p.col); }

double parse_double_at(const std::string& v, Pos p) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) fail("bad number '" + v + "'", p);
        return d;
    } catch (const ParseError&) {
        throw;
    } catch (...) {
        fail("bad number '" + v + "'", p);
    }
}

std::uint64_t parse_u64_at(const std::string& v, Pos p) {
    try {
        std::size_t used = 0;
        unsigned long long u = std::stoull(v, &used);
        if (used != v.size()) fail("bad integer '" + v + "'", p);
        return u;
    } catch (const ParseError&) {
        throw;
    } catch (...) {
        fail("bad integer '" + v + "'", p);
    }
}

bool parse_bool_at(const std::string& v, Pos p) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail("bad boolean '" + v + "' (expected true or false)", p);
}

std::vector<double> parse_double_list(const std::string& v, Pos p) {
    std::vector<double> out;
    for (const std::string& item : split(v, ',')) out.push_back(parse_double_at(item, p));
    return out;
}

// Seeds accept "a..b" ranges alongside plain values.
std::vector<std::uint64_t> parse_seed_list(const std::string& v, Pos p) {
    std::vector<std::uint64_t> out;
    for (const std::string& item : split(v, ',')) {
        const std::size_t dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_u64_at(item, p));
            continue;
        }
        const std::uint64_t lo = parse_u64_at(trim(item.substr(0, dots)), p);
        const std::uint64_t hi = parse_u64_at(trim(item.substr(dots + 2)), p);
        if (hi < lo) fail("empty seed range '" + item + "'", p);
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    }
    return out;
}

} // namespace

std::vector<LayerSpec> parse_topology(const std::string& text) {
    std::vector<LayerSpec> layers;
    for (const std::string& item : split(text, ',')) {
        std::vector<std::string> parts = split(item, ':');
        if (parts.empty()) throw ConfigError("topology: empty layer entry");
        LayerSpec l;
        auto want = [&](std::size_t n) {
            if (parts.size() != n)
                throw ConfigError("topology: bad layer '" + item + "'");
        };
        auto part_num = [&](std::size_t i) -> std::size_t {
            try {
                return std::stoul(parts[i]);
            } catch (...) {
                throw ConfigError("topology: bad number in '" + item + "'");
            }
        };
        if (parts[0] == "conv") {
            want(5);
            l.kind = LayerKind::Conv;
            l.fan_out = part_num(1);
            l.kernel = part_num(2);
            l.stride = part_num(3);
            l.padding = part_num(4);
        } else if (parts[0] == "pool") {
            want(3);
            l.kind = LayerKind::Pool;
            l.kernel = part_num(1);
            l.stride = part_num(2);
        } else if (parts[0] == "dense") {
            want(2);
            l.kind = LayerKind::Dense;
            l.fan_out = part_num(1);
        } else {
            throw ConfigError("topology: unknown layer kind '" + parts[0] + "'");
        }
        layers.push_back(l);
    }
    return layers;
}

SweepConfig parse_sweep_config_text(const std::string& text) {
    SweepConfig cfg;
    std::map<std::string, Pos> seen;

    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = raw;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;

        const std::size_t eq = line.find('=');
        const std::size_t key_col = line.find_first_not_of(" \t") + 1;
        if (eq == std::string::npos)
            throw ParseError("expected 'key = value'", line_no, int(key_col));

        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const Pos kp{line_no, int(key_col)};
        const Pos vp{line_no, int(eq + 2)};

        if (seen.count(key))
            fail("duplicate key '" + key + "' (first at line " +
                     std::to_string(seen[key].line) + ")",
                 kp);
        seen[key] = kp;

        try {
            if (key == "dataset") {
                if (value != "synthetic" && value != "cifar10" && value != "cifar100")
                    fail("dataset must be synthetic, cifar10 or cifar100", vp);
                cfg.dataset = value;
            } else if (key == "data_dir") {
                cfg.data_dir = value;
            } else if (key == "output_dir") {
                cfg.output_dir = value;
            } else if (key == "topology") {
                cfg.topology = parse_topology(value);
            } else if (key == "rules") {
                cfg.rules.clear();
                for (const std::string& r : split(value, ','))
                    cfg.rules.push_back(rule_from_string(r));
            } else if (key == "epochs") {
                cfg.epochs = parse_u64_at(value, vp);
            } else if (key == "batch_size") {
                cfg.batch_size = parse_u64_at(value, vp);
            } else if (key == "eval_every") {
                cfg.eval_every = parse_u64_at(value, vp);
            } else if (key == "data_fractions") {
                cfg.data_fractions = parse_double_list(value, vp);
            } else if (key == "stratified_subset") {
                cfg.stratified_subset = parse_bool_at(value, vp);
            } else if (key == "noise_kind") {
                cfg.noise_kind = noise_from_string(value);
            } else if (key == "noise_levels") {
                cfg.noise_levels = parse_double_list(value, vp);
            } else if (key == "pepper_per_channel") {
                cfg.pepper_per_channel = parse_bool_at(value, vp);
            } else if (key == "sparsities") {
                cfg.sparsities = parse_double_list(value, vp);
            } else if (key == "seeds") {
                cfg.seeds = parse_seed_list(value, vp);
            } else if (key == "bp_lr") {
                cfg.bp_lr = parse_double_at(value, vp);
            } else if (key == "fa_lr") {
                cfg.fa_lr = parse_double_at(value, vp);
            } else if (key == "dfa_lr") {
                cfg.dfa_lr = parse_double_at(value, vp);
            } else if (key == "hb_lr") {
                cfg.hb_lr = parse_double_at(value, vp);
            } else if (key == "bp_schedule") {
                if (value == "constant")
                    cfg.bp_schedule.kind = LrSchedule::Kind::Constant;
                else if (value == "step")
                    cfg.bp_schedule.kind = LrSchedule::Kind::Step;
                else
                    fail("bp_schedule must be constant or step", vp);
            } else if (key == "bp_gamma") {
                cfg.bp_schedule.gamma = parse_double_at(value, vp);
            } else if (key == "bp_step_size") {
                cfg.bp_schedule.step_size = parse_u64_at(value, vp);
            } else if (key == "hb_weight_decay") {
                cfg.hb_weight_decay = parse_double_at(value, vp);
            } else if (key == "hb_k") {
                cfg.hb_k = parse_u64_at(value, vp);
            } else if (key == "hb_prune") {
                cfg.hb_prune = parse_double_at(value, vp);
            } else if (key == "hb_zca") {
                cfg.hb_zca = parse_bool_at(value, vp);
            } else if (key == "zca_epsilon") {
                cfg.zca_epsilon = parse_double_at(value, vp);
            } else if (key == "ridge_lambda") {
                cfg.ridge_lambda = parse_double_at(value, vp);
            } else if (key == "init_gain") {
                cfg.init_gain = parse_double_at(value, vp);
            } else if (key == "synthetic_train_per_class") {
                cfg.synthetic_train_per_class = parse_u64_at(value, vp);
            } else if (key == "synthetic_test_per_class") {
                cfg.synthetic_test_per_class = parse_u64_at(value, vp);
            } else if (key == "synthetic_seed") {
                cfg.synthetic_seed = parse_u64_at(value, vp);
            } else if (key == "save_checkpoints") {
                cfg.save_checkpoints = parse_bool_at(value, vp);
            } else {
                fail("unknown key '" + key + "'", kp);
            }
        } catch (const ConfigError& e) {
            fail(e.what(), vp);
        }
    }

    if (cfg.rules.empty() && !seen.count("rules"))
        throw ParseError("missing required key 'rules'", line_no + 1, 1);
    if (cfg.seeds.empty() && !seen.count("seeds"))
        throw ParseError("missing required key 'seeds'", line_no + 1, 1);
    return cfg;
}

SweepConfig parse_sweep_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_sweep_config_text(buf.str());
}

// ---------------------------------------------------------------------------
// Expansion
// ---------------------------------------------------------------------------

Shape dataset_input_shape(const SweepConfig& cfg) {
    if (cfg.dataset == "synthetic") return {3, 8, 8};
    return {3, 32, 32};
}

std::size_t dataset_class_count(const SweepConfig& cfg) {
    if (cfg.dataset == "synthetic") return 3;
    return cfg.dataset == "cifar100" ? 100 : 10;
}

std::vector<LayerSpec> default_topology(const SweepConfig& cfg) {
    if (cfg.dataset == "synthetic")
        return parse_topology("conv:12:3:1:1, pool:2:2, conv:24:3:1:1, pool:2:2");
    return parse_topology(
        "conv:100:5:1:2, pool:2:2, conv:196:5:1:2, pool:2:2, conv:400:5:1:2, pool:2:2");
}

std::vector<TrainingConfig> expand_sweep(const SweepConfig& cfg) {
    std::vector<TrainingConfig> runs;
    const std::vector<LayerSpec> topology =
        cfg.topology.empty() ? default_topology(cfg) : cfg.topology;

    for (RuleKind rule : cfg.rules) {
        for (double fraction : cfg.data_fractions) {
            for (double level : cfg.noise_levels) {
                for (double sparsity : cfg.sparsities) {
                    if (is_hebbian_rule(rule) && sparsity > 0.0)
                        throw ConfigError(
                            "sweep: sparsity " + format_double(sparsity) +
                            " cannot be combined with rule hb (the sparsity benchmark "
                            "excludes Hebbian runs)");
                    for (std::uint64_t seed : cfg.seeds) {
                        TrainingConfig run;
                        run.layers = topology;
                        run.input_shape = dataset_input_shape(cfg);
                        run.class_count = dataset_class_count(cfg);
                        run.epochs = cfg.epochs;
                        run.batch_size = cfg.batch_size;
                        run.eval_every = cfg.eval_every;
                        run.data_fraction = fraction;
                        run.sparsity = sparsity;
                        run.noise.kind = level > 0.0 ? cfg.noise_kind : NoiseKind::None;
                        run.noise.level = level;
                        run.seed = seed;
                        run.init_gain = cfg.init_gain;
                        run.ridge_lambda = cfg.ridge_lambda;
                        run.hb_zca = cfg.hb_zca;
                        run.zca_epsilon = cfg.zca_epsilon;

                        run.rule.kind = rule;
                        run.rule.kwta_k = cfg.hb_k;
                        run.rule.prune_fraction = cfg.hb_prune;
                        switch (rule) {
                            case RuleKind::Bp:
                                run.rule.eta = cfg.bp_lr;
                                run.schedule = cfg.bp_schedule;
                                break;
                            case RuleKind::Fa: run.rule.eta = cfg.fa_lr; break;
                            case RuleKind::Dfa: run.rule.eta = cfg.dfa_lr; break;
                            default:
                                run.rule.eta = cfg.hb_lr;
                                run.rule.weight_decay = cfg.hb_weight_decay;
                                break;
                        }

                        if (run.epochs < 1 || run.batch_size < 1)
                            throw ConfigError("sweep: epochs and batch_size must be >= 1");
                        if (fraction <= 0.0 || fraction > 1.0)
                            throw ConfigError("sweep: data fraction must lie in (0, 1]");
                        if (level < 0.0 || level > 1.0)
                            throw ConfigError("sweep: noise level must lie in [0, 1]");
                        if (sparsity < 0.0 || sparsity >= 1.0)
                            throw ConfigError("sweep: sparsity must lie in [0, 1)");
                        runs.push_back(std::move(run));
                    }
                }
            }
        }
    }
    return runs;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

RunRecord run_single(const TrainingConfig& run, const SweepConfig& cfg,
                     const Dataset& base_train, const Dataset& base_test) {
    Rng base(run.seed);

    // Fraction 1 bypasses subsetting so the plain pipeline is reproduced
    // bit for bit.
    Dataset train_ds = run.data_fraction < 1.0
                           ? subset(base_train, run.data_fraction,
                                    base.fork(seedlab::kSubset).seed(), cfg.stratified_subset)
                           : base_train;
    Dataset test_ds = base_test;

    if (run.noise.kind == NoiseKind::Random && run.noise.level > 0.0) {
        train_ds = add_random_noise(train_ds, run.noise.level,
                                    base.fork(seedlab::kNoiseTrain).seed());
        test_ds = add_random_noise(test_ds, run.noise.level,
                                   base.fork(seedlab::kNoiseTest).seed());
    } else if (run.noise.kind == NoiseKind::Pepper && run.noise.level > 0.0) {
        train_ds = add_pepper_noise(train_ds, run.noise.level,
                                    base.fork(seedlab::kNoiseTrain).seed(),
                                    cfg.pepper_per_channel);
        test_ds = add_pepper_noise(test_ds, run.noise.level,
                                   base.fork(seedlab::kNoiseTest).seed(),
                                   cfg.pepper_per_channel);
    }

    Network net = build_for_rule(run);
    RunRecord rec = train(net, run, train_ds, test_ds);

    if (cfg.save_checkpoints) {
        std::filesystem::create_directories(cfg.output_dir);
        const std::string name = "ckpt_" + rec.rule + "_f" + format_double(rec.data_fraction) +
                                 "_n" + format_double(rec.noise_level) + "_s" +
                                 format_double(rec.sparsity_cfg) + "_seed" +
                                 std::to_string(rec.seed) + ".biog";
        save_network(net, cfg.output_dir + "/" + name);
    }
    return rec;
}

SweepResult run_sweep(const SweepConfig& cfg, std::size_t threads, std::ostream& log) {
    std::vector<TrainingConfig> runs = expand_sweep(cfg);
    if (runs.empty()) throw ConfigError("no runs");

    Dataset base_train, base_test;
    if (cfg.dataset == "synthetic") {
        Rng synth(cfg.synthetic_seed);
        base_train = make_synthetic_shapes(cfg.synthetic_train_per_class,
                                           synth.fork(0).seed(), "train");
        base_test = make_synthetic_shapes(cfg.synthetic_test_per_class,
                                          synth.fork(1).seed(), "test");
    } else {
        const CifarVariant variant =
            cfg.dataset == "cifar100" ? CifarVariant::Cifar100 : CifarVariant::Cifar10;
        std::tie(base_train, base_test) = load_cifar(cfg.data_dir, variant);
    }

    SweepResult result;
    result.runs.resize(runs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= runs.size()) return;
            result.runs[i] = run_single(runs[i], cfg, base_train, base_test);
            ++done;
        }
    };

    const std::size_t pool = std::max<std::size_t>(1, std::min(threads, runs.size()));
    if (pool == 1) {
        worker();
    } else {
        std::vector<std::thread> ts;
        for (std::size_t i = 0; i < pool; ++i) ts.emplace_back(worker);
        for (std::thread& t : ts) t.join();
    }
    log << "completed " << done.load() << "/" << runs.size() << " runs\n";

    std::filesystem::create_directories(cfg.output_dir);
    write_jsonl(result.runs, cfg.output_dir + "/runs.jsonl");
    write_tidy_csv(result.runs, cfg.output_dir + "/runs.csv");
    return result;
}

void print_summary(const SweepResult& result, std::ostream& os) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<RunRecord>> groups;
    for (const RunRecord& r : result.runs) {
        if (!groups.count(r.fingerprint)) order.push_back(r.fingerprint);
        groups[r.fingerprint].push_back(r);
    }
    os << "rule\tfraction\tnoise\tsparsity\tfinal accuracy (mean +/- std, n)\n";
    for (const std::string& fp : order) {
        const auto& g = groups[fp];
        const Aggregate agg = aggregate(g);
        const RunRecord& head = g.front();
        const double m = agg.mean.empty() ? 0.0 : agg.mean.back();
        const double s = agg.stddev.empty() ? 0.0 : agg.stddev.back();
        os << head.rule << '\t' << format_double(head.data_fraction) << '\t' << head.noise_kind
           << ':' << format_double(head.noise_level) << '\t' << format_double(head.sparsity_cfg)
           << '\t' << format_double(m) << " +/- " << format_double(s) << " (n=" << g.size()
           << ")\n";
    }
}

} // namespace biograd
