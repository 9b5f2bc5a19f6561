#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <thread>

#include "biograd/checkpoint.hpp"
#include "biograd/error.hpp"
#include "biograd/filters.hpp"
#include "biograd/records.hpp"
#include "biograd/sweep.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int cmd_run(const std::string& config_path, std::size_t threads, const std::string& data_dir,
            bool synthetic, const std::string& output_dir) {
    biograd::SweepConfig cfg;
    try {
        cfg = biograd::parse_sweep_config(config_path);
    } catch (const biograd::ParseError& e) {
        std::cerr << config_path << ":" << e.line << ":" << e.column << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const biograd::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    if (synthetic) cfg.dataset = "synthetic";
    if (!data_dir.empty()) {
        cfg.data_dir = data_dir;
    } else if (const char* env = std::getenv("BIOGRAD_DATA_DIR"); env && cfg.data_dir.empty()) {
        cfg.data_dir = env;
    }
    if (!output_dir.empty()) cfg.output_dir = output_dir;

    biograd::SweepResult result;
    try {
        result = biograd::run_sweep(cfg, threads, std::cerr);
    } catch (const biograd::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const biograd::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    biograd::print_summary(result, std::cout);
    std::cout << "wrote " << cfg.output_dir << "/runs.jsonl and " << cfg.output_dir
              << "/runs.csv\n";

    for (const biograd::RunRecord& r : result.runs) {
        if (r.failed) {
            std::cerr << "error: run (rule=" << r.rule << ", seed=" << r.seed
                      << ") diverged; partial outputs retained\n";
            return kExitRuntime;
        }
    }
    return kExitOk;
}

int cmd_filters(const std::string& checkpoint_path, const std::string& out_image) {
    try {
        const biograd::Network net = biograd::load_network(checkpoint_path);
        const biograd::PpmImage img = biograd::render_first_layer(net);
        biograd::write_ppm(img, out_image);
        std::cout << "wrote " << out_image << " (" << img.width << "x" << img.height << ")\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_curves(const std::string& jsonl_path, const std::string& out_csv) {
    try {
        const std::vector<biograd::RunRecord> runs = biograd::read_jsonl(jsonl_path);
        if (runs.empty()) {
            std::cerr << "error: " << jsonl_path << " contains no runs\n";
            return kExitUsage;
        }
        biograd::write_curves_csv(runs, out_csv);
        std::cout << "wrote " << out_csv << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bio-inspired credit assignment benchmark harness"};
    app.require_subcommand(1);

    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    std::string data_dir;
    bool synthetic = false;
    std::string output_dir;

    std::string config_path;
    CLI::App* run = app.add_subcommand("run", "execute a sweep config");
    run->add_option("config", config_path, "experiment config file")->required();
    run->add_option("--threads", threads, "worker threads");
    run->add_option("--data-dir", data_dir, "dataset directory (overrides config and env)");
    run->add_flag("--synthetic", synthetic, "force the bundled synthetic dataset");
    run->add_option("--out", output_dir, "output directory (overrides config)");

    std::string ckpt_path, out_image;
    CLI::App* filters = app.add_subcommand("filters", "render first-layer filters to a PPM grid");
    filters->add_option("checkpoint", ckpt_path, "network checkpoint (.biog)")->required();
    filters->add_option("out", out_image, "output image (.ppm)")->required();

    std::string jsonl_path, out_csv;
    CLI::App* curves = app.add_subcommand("curves", "aggregate run records to a mean/std CSV");
    curves->add_option("jsonl", jsonl_path, "runs.jsonl produced by `run`")->required();
    curves->add_option("out", out_csv, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, threads, data_dir, synthetic, output_dir);
        if (filters->parsed()) return cmd_filters(ckpt_path, out_image);
        if (curves->parsed()) return cmd_curves(jsonl_path, out_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
