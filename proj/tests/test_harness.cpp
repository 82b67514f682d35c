#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "speclab/harness.hpp"

using namespace speclab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("speclab_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_tool(const std::string& args) {
    const char* tool = std::getenv("SPECLAB_TOOL");
    REQUIRE(tool != nullptr);
    const int rc = std::system((std::string(tool) + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("seed is mandatory, threads validated", "[harness]") {
    REQUIRE_THROWS_AS(make_context("pnorm", json::object(), {}), ConfigError);
    json cfg{{"seed", 1}, {"threads", 0}};
    REQUIRE_THROWS_AS(make_context("pnorm", cfg, {}), ConfigError);
    RunOverrides o;
    o.seed = 5;
    const auto ctx = make_context("pnorm", json::object(), o);
    REQUIRE(ctx.seed == 5);
    REQUIRE(ctx.config_hash.size() == 40);
}

TEST_CASE("config hash ignores the parallelism knob", "[harness]") {
    json a{{"seed", 1}, {"threads", 1}, {"out_dir", "x"}};
    json b{{"seed", 1}, {"threads", 16}, {"out_dir", "x"}};
    REQUIRE(make_context("dos", a, {}).config_hash == make_context("dos", b, {}).config_hash);
    json c{{"seed", 2}, {"out_dir", "x"}};
    REQUIRE(make_context("dos", a, {}).config_hash != make_context("dos", c, {}).config_hash);
}

TEST_CASE("sample: identical configs give byte-identical instance files", "[harness]") {
    const auto dir1 = fresh_dir("sample1"), dir2 = fresh_dir("sample2");
    json cfg{{"seed", 7},
             {"count", 2},
             {"ensemble", {{"variant", "pauli_string_ensemble"}, {"n", 4}, {"m", 10}}}};
    cfg["out_dir"] = dir1.string();
    run_experiment("sample", cfg, {});
    cfg["out_dir"] = dir2.string();
    run_experiment("sample", cfg, {});
    for (const char* name : {"instance_000.json", "instance_001.json"})
        REQUIRE(read_text_file(dir1 / name) == read_text_file(dir2 / name));
}

TEST_CASE("sample: GUE file round-trips to a Hermitian matrix", "[harness]") {
    const auto dir = fresh_dir("gue");
    json cfg{{"seed", 1}, {"ensemble", {{"variant", "gue"}, {"N", 8}}}, {"out_dir", dir.string()}};
    run_experiment("sample", cfg, {});
    const auto inst = load_instance(dir / "instance_000.json");
    REQUIRE(inst.matrix.has_value());
    REQUIRE(inst.matrix->rows() == 8);
    REQUIRE((inst.matrix->adjoint() - *inst.matrix).cwiseAbs().maxCoeff() < 1e-15);
    // byte-exact payload round trip
    const auto direct = sample_instance(EnsembleSpec::from_json(cfg["ensemble"]), 1, 0);
    REQUIRE((*inst.matrix - *direct.matrix).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pnorm on the identity-only instance gives exactly 1", "[harness]") {
    const auto dir = fresh_dir("pnorm");
    const fs::path inst = dir / "identity.json";
    write_text_file(inst, nlohmann::json{{"variant", "pauli_string_ensemble"},
                                         {"n", 2},
                                         {"m", 1},
                                         {"seed", 0},
                                         {"terms", {{{"coeff", 1.0}, {"pauli", "+II"}}}}}
                              .dump());
    json cfg{{"seed", 1}, {"instance", inst.string()}, {"p", {4}}, {"out_dir", dir.string()}};
    run_experiment("pnorm", cfg, {});
    const std::string csv = read_text_file(dir / "pnorm.csv");
    REQUIRE(csv == "p,norm\n4,1\n");
}

TEST_CASE("spectrum emits one eigenvalue per row plus a summary", "[harness]") {
    const auto dir = fresh_dir("spectrum");
    json cfg{{"seed", 3},
             {"ensemble", {{"variant", "gue"}, {"N", 16}}},
             {"out_dir", dir.string()}};
    const Manifest m = run_experiment("spectrum", cfg, {});
    REQUIRE(m.outputs.size() == 2);
    const std::string csv = read_text_file(dir / "spectrum_eigenvalues.csv");
    REQUIRE(csv.rfind("eigenvalue\n", 0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 17);  // header + 16 rows
    const json summary = json::parse(read_text_file(dir / "spectrum_summary.json"));
    REQUIRE(summary.at("N") == 16);
    REQUIRE(summary.at("lambda_min").get<double>() < summary.at("lambda_max").get<double>());
    REQUIRE(summary.at("p_norms").contains("inf"));
}

TEST_CASE("experiment payloads are identical across thread counts", "[harness]") {
    auto run_with = [&](int threads, const std::string& tag) {
        const auto dir = fresh_dir("threads_" + tag);
        json cfg{{"seed", 11},
                 {"threads", threads},
                 {"out_dir", dir.string()},
                 {"n", 4},
                 {"p", 4},
                 {"eta", 0.5},
                 {"omega_grid", {0.0, 0.5}},
                 {"m_grid", {8, 16}},
                 {"trials", 12}};
        run_experiment("resolvent", cfg, {});
        return read_text_file(dir / "resolvent_comparison.csv");
    };
    const std::string t1 = run_with(1, "1"), t4 = run_with(4, "4"), t16 = run_with(16, "16");
    REQUIRE(t1 == t4);
    REQUIRE(t1 == t16);
    REQUIRE(t1.rfind("m,p,eta,omega", 0) == 0);  // header row present
}

TEST_CASE("dos over pooled GUE spectra keeps mass inside [-2,2]", "[harness]") {
    const auto dir = fresh_dir("dos");
    json cfg{{"seed", 5},
             {"ensemble", {{"variant", "gue"}, {"N", 128}}},
             {"instances", 4},
             {"eps", 0.2},
             {"out_dir", dir.string()},
             {"threads", 2}};
    run_experiment("dos", cfg, {});
    const json summary = json::parse(read_text_file(dir / "dos_summary.json"));
    REQUIRE(summary.at("histogram_mass_in_support").get<double>() >= 0.99);
    REQUIRE(fs::exists(dir / "dos_histogram.csv"));
    REQUIRE(fs::exists(dir / "dos_proxy.csv"));
    REQUIRE(fs::exists(dir / "dos_filter.csv"));
}

TEST_CASE("universality dispatch and unknown kinds", "[harness]") {
    const auto dir = fresh_dir("uni");
    json cfg{{"seed", 2}, {"kind", "moment_matching"}, {"N", 3}, {"out_dir", dir.string()}};
    run_experiment("universality", cfg, {});
    const std::string csv = read_text_file(dir / "moment_matching.csv");
    REQUIRE(csv.rfind("k,max_deviation\n", 0) == 0);
    json bad = cfg;
    bad["kind"] = "nope";
    REQUIRE_THROWS_AS(run_experiment("universality", bad, {}), ConfigError);
}

TEST_CASE("qpe emits the contracted JSON fields", "[harness]") {
    const auto dir = fresh_dir("qpe");
    json cfg{{"seed", 8},
             {"ensemble", {{"variant", "pauli_string_ensemble"}, {"n", 5}, {"m", 60}}},
             {"eps", 0.3},
             {"shots", 2000},
             {"out_dir", dir.string()},
             {"threads", 2}};
    run_experiment("qpe", cfg, {});
    const json out = json::parse(read_text_file(dir / "qpe.json"));
    for (const char* key : {"instance_hash", "epsilon", "shots", "successes", "success_rate", "ci95"})
        REQUIRE(out.contains(key));
    const double rate = out.at("success_rate").get<double>();
    const auto ci = out.at("ci95");
    REQUIRE(ci[0].get<double>() <= rate);
    REQUIRE(rate <= ci[1].get<double>());
}

TEST_CASE("witness and bound emit their JSON contracts", "[harness]") {
    const auto dir = fresh_dir("witness");
    json cfg{{"seed", 9},
             {"ensemble", {{"variant", "pauli_string_ensemble"}, {"n", 6}, {"m", 300}}},
             {"eps", 0.3},
             {"out_dir", dir.string()}};
    run_experiment("witness", cfg, {});
    const json out = json::parse(read_text_file(dir / "witness.json"));
    for (const char* key : {"epsilon", "d", "beta", "energy", "lambda_min", "ratio"})
        REQUIRE(out.contains(key));
    REQUIRE(out.at("ratio").get<double>() >= 0.7);

    const auto dir2 = fresh_dir("bound");
    json bcfg{{"seed", 1}, {"which", "circuit"}, {"eps1", 0.25}, {"m", 10000}, {"n", 20},
              {"out_dir", dir2.string()}};
    run_experiment("bound", bcfg, {});
    const json b = json::parse(read_text_file(dir2 / "bound.json"));
    REQUIRE(std::abs(b.at("g_threshold").get<double>() - 2.7143) < 1e-3);
    REQUIRE(b.at("units").get<std::string>().find("normalized") != std::string::npos);
}

TEST_CASE("CLI: exit codes for config errors and success", "[harness][cli]") {
    const auto dir = fresh_dir("cli");
    // missing seed -> usage/config error, exit 2
    const fs::path no_seed = dir / "no_seed.json";
    write_text_file(no_seed, R"({"which":"circuit","eps1":0.25,"m":10000,"n":20})");
    REQUIRE(run_tool("bound --config " + no_seed.string() + " --out " + (dir / "o1").string()) == 2);

    const fs::path ok = dir / "ok.json";
    write_text_file(ok, R"({"seed":1,"which":"circuit","eps1":0.25,"m":10000,"n":20})");
    REQUIRE(run_tool("bound --config " + ok.string() + " --out " + (dir / "o2").string()) == 0);
    REQUIRE(fs::exists(dir / "o2" / "bound.json"));
    REQUIRE(fs::exists(dir / "o2" / "bound_manifest.json"));

    // seed supplied on the command line instead of the config
    REQUIRE(run_tool("bound --config " + no_seed.string() + " --seed 4 --out " +
                     (dir / "o3").string()) == 0);

    // unknown subcommand -> parse error, exit 2
    REQUIRE(run_tool("frobnicate") == 2);
}

TEST_CASE("CLI: sampling twice is byte-identical", "[harness][cli]") {
    const auto dir = fresh_dir("cli_sample");
    const fs::path cfg = dir / "cfg.json";
    write_text_file(cfg,
                    R"({"seed":7,"count":1,"ensemble":{"variant":"pauli_string_ensemble","n":4,"m":10}})");
    REQUIRE(run_tool("sample --config " + cfg.string() + " --out " + (dir / "a").string()) == 0);
    REQUIRE(run_tool("sample --config " + cfg.string() + " --out " + (dir / "b").string()) == 0);
    REQUIRE(read_text_file(dir / "a" / "instance_000.json") ==
            read_text_file(dir / "b" / "instance_000.json"));
}

TEST_CASE("SPECLAB_OUT_ROOT supplies the default output root", "[harness]") {
    const auto root = fresh_dir("out_root");
    setenv("SPECLAB_OUT_ROOT", root.string().c_str(), 1);
    json cfg{{"seed", 1}, {"which", "circuit"}, {"eps1", 0.1}, {"m", 100}, {"n", 8}};
    run_experiment("bound", cfg, {});
    unsetenv("SPECLAB_OUT_ROOT");
    REQUIRE(fs::exists(root / "bound" / "bound.json"));
}

TEST_CASE("manifest lists every output exactly once", "[harness]") {
    const auto dir = fresh_dir("manifest");
    json cfg{{"seed", 13},
             {"ensemble", {{"variant", "gue"}, {"N", 12}}},
             {"out_dir", dir.string()}};
    const Manifest m = run_experiment("spectrum", cfg, {});
    const json j = json::parse(read_text_file(dir / "spectrum_manifest.json"));
    REQUIRE(j.at("outputs").size() == m.outputs.size());
    std::set<std::string> seen;
    for (const auto& o : j.at("outputs")) {
        REQUIRE(seen.insert(o.get<std::string>()).second);
        REQUIRE(fs::exists(dir / o.get<std::string>()));
    }
    REQUIRE(j.at("tool_version") == kToolVersion);
    REQUIRE(j.at("config_hash").get<std::string>().size() == 40);
}
