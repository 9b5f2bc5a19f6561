#include "biograd/records.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "biograd/error.hpp"

namespace biograd {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

std::string record_to_json(const RunRecord& rec) {
    json j;
    j["schema_version"] = kRecordSchemaVersion;
    j["rule"] = rec.rule;
    j["data_fraction"] = rec.data_fraction;
    j["noise_kind"] = rec.noise_kind;
    j["noise_level"] = rec.noise_level;
    j["sparsity"] = rec.sparsity_cfg;
    j["seed"] = rec.seed;
    j["fingerprint"] = rec.fingerprint;
    j["epochs"] = rec.epochs;
    j["eval_every"] = rec.eval_every;
    j["accuracy"] = rec.accuracy;
    j["sparsity_series"] = rec.sparsity_series;
    j["final_sparsity"] = rec.final_sparsity;
    j["epoch_seconds"] = rec.epoch_seconds;
    j["failed"] = rec.failed;
    return j.dump();
}

RunRecord record_from_json(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("records: bad JSON line: ") + e.what());
    }
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != kRecordSchemaVersion)
        throw IoError("records: unsupported schema version");

    RunRecord rec;
    rec.rule = j.at("rule").get<std::string>();
    rec.data_fraction = j.at("data_fraction").get<double>();
    rec.noise_kind = j.at("noise_kind").get<std::string>();
    rec.noise_level = j.at("noise_level").get<double>();
    rec.sparsity_cfg = j.at("sparsity").get<double>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.fingerprint = j.at("fingerprint").get<std::string>();
    rec.epochs = j.at("epochs").get<std::size_t>();
    rec.eval_every = j.at("eval_every").get<std::size_t>();
    rec.accuracy = j.at("accuracy").get<std::vector<double>>();
    rec.sparsity_series = j.at("sparsity_series").get<std::vector<double>>();
    rec.final_sparsity = j.at("final_sparsity").get<double>();
    rec.epoch_seconds = j.at("epoch_seconds").get<std::vector<double>>();
    rec.failed = j.at("failed").get<bool>();
    return rec;
}

void write_jsonl(const std::vector<RunRecord>& runs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("records: cannot open " + path + " for writing");
    for (const RunRecord& r : runs) os << record_to_json(r) << "\n";
    if (!os) throw IoError("records: write to " + path + " failed");
}

std::vector<RunRecord> read_jsonl(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("records: cannot open " + path);
    std::vector<RunRecord> runs;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        runs.push_back(record_from_json(line));
    }
    return runs;
}

void write_tidy_csv(const std::vector<RunRecord>& runs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("records: cannot open " + path + " for writing");
    os << "rule,data_fraction,noise_kind,noise_level,sparsity,seed,epoch,test_accuracy\n";
    for (const RunRecord& r : runs) {
        for (std::size_t i = 0; i < r.accuracy.size(); ++i) {
            const std::size_t epoch = (i + 1) * r.eval_every;
            os << r.rule << ',' << format_double(r.data_fraction) << ',' << r.noise_kind << ','
               << format_double(r.noise_level) << ',' << format_double(r.sparsity_cfg) << ','
               << r.seed << ',' << epoch << ',' << format_double(r.accuracy[i]) << "\n";
        }
    }
    if (!os) throw IoError("records: write to " + path + " failed");
}

void write_curves_csv(const std::vector<RunRecord>& runs, std::ostream& os) {
    // Group by fingerprint, keep first-seen order for deterministic output.
    std::vector<std::string> group_order;
    std::map<std::string, std::vector<RunRecord>> groups;
    for (const RunRecord& r : runs) {
        if (!groups.count(r.fingerprint)) group_order.push_back(r.fingerprint);
        groups[r.fingerprint].push_back(r);
    }

    os << "rule,data_fraction,noise_kind,noise_level,sparsity,epoch,mean_accuracy,"
          "std_accuracy,runs\n";
    for (const std::string& fp : group_order) {
        const std::vector<RunRecord>& g = groups[fp];
        const Aggregate agg = aggregate(g);
        const RunRecord& head = g.front();
        for (std::size_t i = 0; i < agg.mean.size(); ++i) {
            const std::size_t epoch = (i + 1) * head.eval_every;
            os << head.rule << ',' << format_double(head.data_fraction) << ',' << head.noise_kind
               << ',' << format_double(head.noise_level) << ','
               << format_double(head.sparsity_cfg) << ',' << epoch << ','
               << format_double(agg.mean[i]) << ',' << format_double(agg.stddev[i]) << ','
               << agg.run_count << "\n";
        }
    }
}

void write_curves_csv(const std::vector<RunRecord>& runs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("records: cannot open " + path + " for writing");
    write_curves_csv(runs, os);
    if (!os) throw IoError("records: write to " + path + " failed");
}

} // namespace biograd
