#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "qdiff/qdiff.hpp"

using namespace qdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / "qdiff_test_pipeline" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

struct Fixture {
    fs::path dir;
    SyntheticIndex syn;
    RunConfig config;
};

// The bundled synthetic generator with a small ensemble.
const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture x;
        x.dir = scratch("fixture");
        x.syn = make_synthetic_index();
        io::Table t{{"date", "close"}, {}, {}};
        for (std::size_t i = 0; i < x.syn.series.size(); ++i) {
            t.rows.push_back({io::format_timestamp(x.syn.series.timestamps()[i]),
                              io::format_number(x.syn.series.values()[i])});
        }
        io::write_table(x.dir / "index.csv", t);
        const nlohmann::json cfg = {
            {"input", "index.csv"},
            {"decompose", {{"trend_window", 1260}}},
            {"estimate", {{"horizon_grid", {{"min", 1}, {"max", 128}, {"per_decade", 20}}}}},
            {"zones", {{"sensitivity", 0.02}, {"crossover_points", 1}}},
            {"trend",
             {{"t0", io::format_timestamp(x.syn.t0)},
              {"fit_start", io::format_timestamp(x.syn.crash_start)}}},
            {"forecast", {{"horizon_days", 60}, {"paths", 400}}},
            {"seed", 3}};
        io::write_file(x.dir / "run.json", cfg.dump(2));
        x.config = load_config(x.dir / "run.json");
        return x;
    }();
    return f;
}

const std::vector<Stage> all_stages{Stage::decompose, Stage::fit,      Stage::zones,
                                    Stage::trend,     Stage::forecast, Stage::score};

std::string reread(const std::string& name, const std::string& text) {
    using namespace artifacts;
    const auto t = io::parse_table(text, ',', name);
    if (name == "decomposition.csv") return io::render_table(to_table(read_decomposition(t)));
    if (name == "parameter_curves.csv") return io::render_table(to_table(read_curves(t)));
    if (name == "zones.csv") return io::render_table(to_table(read_zones(t)));
    if (name == "trend.csv") return io::render_table(to_table(read_trend(t)));
    if (name == "cone.csv") return io::render_table(to_table(read_cone(t)));
    if (name == "contours.csv") return io::render_table(to_table(read_contours(t)));
    if (name == "paths_summary.csv") return io::render_table(to_table(read_paths_summary(t)));
    if (name == "accuracy.csv") return io::render_table(to_table(read_accuracy(t)));
    if (name == "accuracy_flags.csv") return io::render_table(to_table(read_flags(t)));
    FAIL("no reader for " << name);
    return {};
}

int run_cli(const std::string& args, const fs::path& log) {
    const char* cli = std::getenv("QDIFF_CLI");
    REQUIRE(cli != nullptr);
    const std::string cmd = std::string(cli) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("end-to-end run on the synthetic index") {
    const auto& f = fixture();
    const auto r = run_pipeline(f.config, Stage::score);
    REQUIRE(r.zones);
    // History stops at the anchor.
    CHECK(r.history.timestamps().back() == f.syn.t0);
    CHECK(r.zones->boundaries[0] < r.zones->boundaries[1]);
    CHECK(r.curves->rows.front().zone == "A");
    CHECK(r.trend->t0 == f.syn.t0);
    CHECK(r.trend->collapse_slope < 0.0);
    CHECK(r.cone->days.size() == 60);
    CHECK(r.paths->paths == 400);
    CHECK(r.ensemble_accuracy->fraction == Catch::Approx(0.85).margin(0.05));
    CHECK(r.realized_accuracy->total == 60);
    for (const auto& row : r.curves->rows) {
        CHECK(row.q >= 1.0);
        CHECK(row.beta > 0.0);
    }
}

TEST_CASE("artifacts read back and re-render byte for byte") {
    const auto& f = fixture();
    const auto r = run_pipeline(f.config, Stage::score);
    const auto files = render_artifacts(r, f.config, all_stages);
    CHECK(files.size() == 9);
    for (const auto& [name, text] : files) {
        CAPTURE(name);
        const auto once = reread(name, text);
        CHECK(once == text);
        CHECK(reread(name, once) == once);
    }
}

TEST_CASE("reruns are byte-identical and the seed matters") {
    const auto& f = fixture();
    const auto a = render_artifacts(run_pipeline(f.config, Stage::forecast), f.config,
                                    {Stage::forecast});
    const auto b = render_artifacts(run_pipeline(f.config, Stage::forecast), f.config,
                                    {Stage::forecast});
    CHECK(a == b);
    auto other = f.config;
    other.seed = 4;
    const auto c = render_artifacts(run_pipeline(other, Stage::forecast), other, {Stage::forecast});
    CHECK(c.at("paths_summary.csv") != a.at("paths_summary.csv"));
    CHECK(c.at("cone.csv") == a.at("cone.csv"));
}

TEST_CASE("errors carry the stage that raised them") {
    const auto& f = fixture();
    auto tagged = [](const RunConfig& c, Stage last) -> std::string {
        try {
            run_pipeline(c, last);
        } catch (const Error& e) {
            return e.what();
        }
        return "";
    };
    auto no_fit = f.config;
    no_fit.trend.fit_start.reset();
    CHECK(tagged(no_fit, Stage::trend).find("[trend]") != std::string::npos);

    auto bad_t0 = f.config;
    bad_t0.trend.t0 = "2100-01-01";
    CHECK(tagged(bad_t0, Stage::decompose).find("[ingest]") != std::string::npos);

    auto missing = f.config;
    missing.input = (f.dir / "absent.csv").string();
    CHECK(tagged(missing, Stage::ingest).find("[ingest]") != std::string::npos);

    auto short_window = f.config;
    short_window.trend_window = 100'000;
    CHECK(tagged(short_window, Stage::decompose).find("[decompose]") != std::string::npos);

    auto wide = f.config;
    wide.forecast.horizon_days = 400;
    CHECK(tagged(wide, Stage::forecast).find("[forecast]") != std::string::npos);
}

TEST_CASE("a failed commit leaves no partial outputs") {
    const auto dir = scratch("commit");
    fs::create_directories(dir / "b.csv" / "occupied");
    ArtifactSet files{{"a.csv", "x\n1\n"}, {"b.csv", "y\n2\n"}};
    CHECK_THROWS_AS(commit_artifacts(dir, files), Error);
    CHECK_FALSE(fs::exists(dir / "a.csv"));
    CHECK_FALSE(fs::exists(dir / ".staging"));

    fs::remove_all(dir / "b.csv");
    commit_artifacts(dir, files);
    CHECK(io::read_file(dir / "a.csv") == "x\n1\n");
    CHECK(io::read_file(dir / "b.csv") == "y\n2\n");
    CHECK_FALSE(fs::exists(dir / ".staging"));
}

TEST_CASE("command-line exit codes and outputs") {
    const auto& f = fixture();
    const auto dir = scratch("cli");
    const auto log = dir / "log.txt";
    const std::string cfg = (f.dir / "run.json").string();

    CHECK(run_cli("ingest-check --config " + cfg, log) == 0);
    CHECK(io::read_file(log).find("observations") != std::string::npos);

    const auto out = dir / "all";
    CHECK(run_cli("all --config " + cfg + " --out " + out.string(), log) == 0);
    for (const char* name : {"decomposition.csv", "parameter_curves.csv", "zones.csv", "trend.csv",
                             "cone.csv", "contours.csv", "paths_summary.csv", "accuracy.csv",
                             "accuracy_flags.csv", "manifest.json"}) {
        CHECK(fs::exists(out / name));
    }
    const auto manifest = nlohmann::json::parse(io::read_file(out / "manifest.json"));
    CHECK(manifest.at("config").at("seed") == 3);
    CHECK(manifest.at("input_sha256").get<std::string>().size() == 64);
    CHECK(manifest.at("outputs").size() == 9);

    // Flags override the file.
    const auto seeded = dir / "seeded";
    CHECK(run_cli("forecast --config " + cfg + " --seed 11 --out " + seeded.string(), log) == 0);
    CHECK(io::read_file(seeded / "paths_summary.csv") != io::read_file(out / "paths_summary.csv"));
    CHECK(io::read_file(seeded / "cone.csv") == io::read_file(out / "cone.csv"));
    const auto moments = dir / "moments";
    CHECK(run_cli("fit --config " + cfg + " --method q-moments --out " + moments.string(), log) == 0);
    CHECK(io::read_file(moments / "parameter_curves.csv").find("q-moments") != std::string::npos);

    // Configuration problems exit 2, data problems 3.
    CHECK(run_cli("all --config " + (dir / "absent.json").string(), log) == 2);
    CHECK(run_cli("all", log) == 2);
    CHECK(run_cli("frobnicate", log) == 2);
    CHECK(run_cli("fit --config " + cfg + " --method mle", log) == 2);
    io::write_file(dir / "unknown.json", R"({"input": "x.csv", "colour": "red"})");
    CHECK(run_cli("ingest-check --config " + (dir / "unknown.json").string(), log) == 2);
    CHECK(io::read_file(log).find("colour") != std::string::npos);

    io::write_file(dir / "dup.csv", "date,close\n2020-01-02,1\n2020-01-02,2\n");
    CHECK(run_cli("ingest-check --config " + cfg + " --input " + (dir / "dup.csv").string(), log) == 3);
    CHECK(io::read_file(log).find("line 3") != std::string::npos);
    CHECK(run_cli("ingest-check --config " + cfg + " --input " + (dir / "none.csv").string(), log) == 3);

    // A failing run writes nothing.
    const auto failed = dir / "failed";
    io::write_file(dir / "nofit.json",
                   R"({"input": ")" + (f.dir / "index.csv").string() + R"(", "trend": {"t0": ")" +
                       io::format_timestamp(f.syn.t0) + R"("}, "forecast": {"paths": 10}})");
    CHECK(run_cli("all --config " + (dir / "nofit.json").string() + " --out " + failed.string(), log) == 2);
    CHECK(io::read_file(log).find("[trend]") != std::string::npos);
    CHECK((!fs::exists(failed) || fs::is_empty(failed)));
}
