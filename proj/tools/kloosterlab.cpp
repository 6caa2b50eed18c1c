#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "kloosterlab/experiments.hpp"
#include "kloosterlab/parallel.hpp"

using namespace kloosterlab;

namespace {

// exit codes: 0 clean, 1 a hard invariant failed, 2 bad config, 3 runtime or I/O error
constexpr int kHardFailure = 1, kConfigError = 2, kRuntimeError = 3;

int cmd_run(const std::string& path, bool quick, std::string out_dir) {
    ExperimentConfig cfg;
    RunResult res;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        cfg = load_config(path, quick);
        std::cerr << "running " << cfg.experiment << (quick ? " (quick)" : "") << " with " << worker_count()
                  << " worker(s)\n";
        res = run_experiment(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    if (out_dir.empty()) out_dir = cfg.output.empty() ? "out/" + cfg.experiment : cfg.output;
    try {
        write_artifacts(cfg, res, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto summary = summarize(cfg, res);
    std::cout << cfg.experiment << ": " << res.table.rows.size() << " rows in " << secs << " s -> " << out_dir << '\n';
    for (auto& [fam, s] : summary["families"].items())
        std::cout << "  " << fam << ": n=" << s["count"] << " max=" << s["max_ratio"] << " median=" << s["median_ratio"]
                  << '\n';
    if (!res.notes.empty()) std::cout << "  notes: " << res.notes.dump() << '\n';
    std::cout << "  hard failures: " << res.failures.size() << '\n';
    for (std::size_t i = 0; i < res.failures.size() && i < 5; ++i) std::cout << "    " << res.failures[i] << '\n';
    return res.failures.empty() ? 0 : kHardFailure;
}

int cmd_export(const std::string& in_path, const std::string& format, const std::string& out_path) {
    try {
        std::ifstream in(in_path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + in_path);
        const int first = in.peek();
        ReportTable t = first == '{' ? read_jsonl(in) : read_csv(in);
        std::ofstream file;
        std::ostream* out = &std::cout;
        if (!out_path.empty()) {
            file.open(out_path, std::ios::binary | std::ios::trunc);
            if (!file) throw std::runtime_error("cannot open " + out_path + " for writing");
            out = &file;
        }
        if (format == "csv") write_csv(t, *out);
        else write_jsonl(t, *out);
        out->flush();
        if (!*out) throw std::runtime_error("write failed");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kloosterlab: experiment runner and report exporter"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    std::string config, out_dir;
    bool quick = false;
    run->add_option("config", config, "experiment config (JSON)")->required();
    run->add_flag("--quick", quick, "use the config's reduced sweep");
    run->add_option("--out", out_dir, "output directory (default: the config's output, else out/<experiment>)");

    auto* exp = app.add_subcommand("export", "convert a report between csv and jsonl");
    std::string report, format = "jsonl", out_file;
    exp->add_option("report", report, "report file (.csv or .jsonl)")->required();
    exp->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "jsonl"}));
    exp->add_option("--out", out_file, "output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kConfigError;
    }
    if (*run) return cmd_run(config, quick, out_dir);
    return cmd_export(report, format, out_file);
}
