// qdiff: command-line driver for the decomposition, estimation, zone and
// forecast pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "qdiff/qdiff.hpp"

namespace fs = std::filesystem;
using namespace qdiff;

namespace {

constexpr const char* version = "1.0.0";

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::configuration: return 2;
    case ErrorKind::data:
    case ErrorKind::lookup: return 3;
    default: return 4;
    }
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        fail(ErrorKind::numeric, "SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> input;
    std::optional<std::string> method;
};

RunConfig resolve(const Options& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (o.input) c.input = *o.input;
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.output = *o.out;
    if (o.method) c.method = parse_fit_method(*o.method);
    validate(c);
    return c;
}

void print_summary(const PipelineResult& r, Stage last) {
    std::printf("series: %zu observations, resolution %llds, %zu gaps\n", r.series.size(),
                static_cast<long long>(r.series.resolution()), r.series.gap_count());
    if (last == Stage::ingest) {
        std::printf("first: %s\nlast:  %s\n",
                    io::format_timestamp(r.series.timestamps().front()).c_str(),
                    io::format_timestamp(r.series.timestamps().back()).c_str());
    }
    if (r.zones) {
        const auto& z = *r.zones;
        std::printf("zones: A [%g, %g] B [%g, %g] C [%g, %g]; alpha %.3f / %.3f / %.3f\n",
                    z.zones[0].start_horizon, z.zones[0].end_horizon, z.zones[1].start_horizon,
                    z.zones[1].end_horizon, z.zones[2].start_horizon, z.zones[2].end_horizon,
                    z.zones[0].alpha, z.zones[1].alpha, z.zones[2].alpha);
        std::printf("%s\n", z.zone_c_note.c_str());
    }
    if (r.trend) {
        std::printf("trend: %s, I0=%g, collapse slope %g/day, recovery at day %g\n",
                    to_string(r.trend->kind).c_str(), r.trend->I0, r.trend->collapse_slope,
                    r.trend->recovery_time);
    }
    if (r.ensemble_accuracy) {
        std::printf("ensemble accuracy at level %g: %.4f (%zu/%zu path-days)\n",
                    r.ensemble_accuracy->level, r.ensemble_accuracy->fraction,
                    r.ensemble_accuracy->inside, r.ensemble_accuracy->total);
    }
    if (r.realized_accuracy) {
        std::printf("realized accuracy at level %g: %.4f (%zu/%zu days)\n",
                    r.realized_accuracy->level, r.realized_accuracy->fraction,
                    r.realized_accuracy->inside, r.realized_accuracy->total);
    }
}

std::vector<Stage> owned_stages(Stage s) {
    switch (s) {
    case Stage::fit: return {Stage::fit};
    case Stage::zones: return {Stage::zones};
    default: return {s};
    }
}

int run_stage(const Options& o, Stage last, bool everything) {
    const RunConfig c = resolve(o);
    const PipelineResult r = run_pipeline(c, last);
    print_summary(r, last);
    if (last == Stage::ingest) return 0;

    std::vector<Stage> stages = owned_stages(last);
    if (everything) {
        stages = {Stage::decompose, Stage::fit, Stage::zones, Stage::trend, Stage::forecast,
                  Stage::score};
    }
    ArtifactSet files = render_artifacts(r, c, stages);
    if (everything) {
        nlohmann::json m;
        m["tool"] = "qdiff";
        m["version"] = version;
        m["config"] = config_to_json(c);
        m["input_sha256"] = sha256_hex(io::read_file(c.input));
        nlohmann::json outputs = nlohmann::json::object();
        for (const auto& [name, content] : files) outputs[name] = sha256_hex(content);
        m["outputs"] = outputs;
        m["zone_c"] = r.zones->zone_c_note;
        files["manifest.json"] = m.dump(2) + "\n";
    }
    commit_artifacts(c.output, files);
    for (const auto& [name, content] : files) {
        std::printf("wrote %s\n", (fs::path(c.output) / name).string().c_str());
    }
    return 0;
}

int run_synth(const std::string& out_dir, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    const SyntheticIndex syn = make_synthetic_index(spec);
    io::Table t{{"date", "close"}, {}, {}};
    for (std::size_t i = 0; i < syn.series.size(); ++i) {
        t.rows.push_back({io::format_timestamp(syn.series.timestamps()[i]),
                          io::format_number(syn.series.values()[i])});
    }
    nlohmann::json cfg = {
        {"input", "synthetic_index.csv"},
        {"timestamp_column", "date"},
        {"value_column", "close"},
        {"decompose", {{"trend_window", 1260}}},
        {"estimate",
         {{"horizon_grid", {{"min", 1}, {"max", 128}, {"per_decade", 20}}},
          {"method", "cdf-ls"},
          {"alpha_window", 5}}},
        {"zones", {{"sensitivity", 0.02}, {"crossover_points", 1}}},
        {"trend",
         {{"kind", "hyperbola"},
          {"t0", io::format_timestamp(syn.t0)},
          {"fit_start", io::format_timestamp(syn.crash_start)},
          {"fit_end", io::format_timestamp(syn.t0)},
          {"recovery_days", spec.recovery_days},
          {"recovery_ratio", spec.recovery_ratio}}},
        {"forecast",
         {{"horizon_days", 60},
          {"levels", {0.05, 0.15, 0.3173, 0.5, 0.75}},
          {"paths", 10000},
          {"accuracy_level", 0.15}}},
        {"seed", 7},
        {"output", "out"}};
    ArtifactSet files;
    files["synthetic_index.csv"] = io::render_table(t);
    files["synthetic_config.json"] = cfg.dump(2) + "\n";
    commit_artifacts(out_dir, files);
    std::printf("wrote %zu observations; t0 %s\n", syn.series.size(),
                io::format_timestamp(syn.t0).c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"q-Gaussian anomalous-diffusion analysis and forecasting of index series"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version);

    Options opt;
    struct Sub {
        const char* name;
        const char* help;
        Stage stage;
        bool everything;
    };
    const Sub subs[] = {
        {"ingest-check", "Validate the input series and report its shape", Stage::ingest, false},
        {"decompose", "Write the trend/fluctuation decomposition", Stage::decompose, false},
        {"fit", "Write per-horizon parameter curves (q, beta, alpha, D)", Stage::fit, false},
        {"zones", "Write the diffusion-zone segmentation", Stage::zones, false},
        {"trend", "Write the deterministic response trend", Stage::trend, false},
        {"forecast", "Write the cone, contours, path summary and ensemble accuracy",
         Stage::forecast, false},
        {"score", "Score realized data against the cone", Stage::score, false},
        {"all", "Run every stage and write all artifacts plus a manifest", Stage::score, true},
    };
    std::vector<std::pair<CLI::App*, const Sub*>> commands;
    for (const auto& s : subs) {
        CLI::App* cmd = app.add_subcommand(s.name, s.help);
        cmd->add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
        cmd->add_option("--seed", opt.seed, "Random seed for path simulation");
        cmd->add_option("--out", opt.out, "Output directory");
        cmd->add_option("--input", opt.input, "Input series (overrides the config)");
        cmd->add_option("--method", opt.method, "Fitting method: pdf-ls | q-moments | cdf-ls");
        commands.emplace_back(cmd, &s);
    }
    std::string synth_out = "data";
    std::uint64_t synth_seed = SyntheticSpec{}.seed;
    CLI::App* synth = app.add_subcommand("synth", "Generate the synthetic example dataset");
    synth->add_option("--out", synth_out, "Output directory");
    synth->add_option("--seed", synth_seed, "Generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return run_synth(synth_out, synth_seed);
        for (const auto& [cmd, s] : commands) {
            if (cmd->parsed()) return run_stage(opt, s->stage, s->everything);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "qdiff: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "qdiff: %s\n", e.what());
        return 4;
    }
    return 0;
}
