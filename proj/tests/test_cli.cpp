#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "belllab/io.hpp"
#include "belllab/models.hpp"

using namespace belllab;
using nlohmann::json;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("belllab_cli_" + name);
}

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const char* cli = std::getenv("BELLLAB_CLI");
    REQUIRE(cli != nullptr);
    const auto out_path = temp_path("stdout.txt");
    const auto err_path = temp_path("stderr.txt");
    const std::string cmd = env_prefix + "\"" + std::string(cli) + "\" " + args + " > " +
                            out_path.string() + " 2> " + err_path.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out_path);
    r.err = read_text_file(err_path);
    return r;
}

std::string write_config(const std::string& name, const std::string& body) {
    const auto path = temp_path(name);
    write_text_file(path, body);
    return path.string();
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

json parsed_report(const std::filesystem::path& path) {
    return json::parse(read_text_file(path));
}

json without_timestamp(json j) {
    j["meta"].erase("generated_at");
    return j;
}

const char* kLhvModelBlock =
    "[model]\n"
    "kind = \"lhv_deterministic\"\n"
    "left_unprimed  = [1, 0, 1]\n"
    "left_primed    = [0, 0, 1]\n"
    "right_unprimed = [1, 1, 0]\n"
    "right_primed   = [0, 1, 1]\n";

} // namespace

TEST_CASE("simulate writes the requested number of rows") {
    const auto log = temp_path("sim4.csv");
    const auto cfg = write_config("sim4.toml", "[model]\nkind = \"quantum\"\n[run]\ntrials = 4\n"
                                               "seed = 1\n[output]\ntrial_log = \"" +
                                                   log.string() + "\"\n");
    const auto r = run_cli("simulate --config " + cfg);
    CHECK(r.code == 0);
    CHECK(r.err.empty());

    const auto text = read_text_file(log);
    CHECK(count_lines(text) == 5); // header + 4 data rows
    CHECK(text.rfind(io::kLogHeaderBase, 0) == 0);

    // --trials overrides the config.
    const auto r6 = run_cli("simulate --config " + cfg + " --trials 6");
    CHECK(r6.code == 0);
    CHECK(count_lines(read_text_file(log)) == 7);
}

TEST_CASE("simulate is byte-reproducible") {
    const auto cfg = write_config("rep.toml", "[model]\nkind = \"quantum\"\n[run]\ntrials = 200\n"
                                              "seed = 99\n");
    const auto a = temp_path("rep_a.csv");
    const auto b = temp_path("rep_b.csv");
    CHECK(run_cli("simulate --config " + cfg + " --out " + a.string()).code == 0);
    CHECK(run_cli("simulate --config " + cfg + " --out " + b.string()).code == 0);
    CHECK(read_text_file(a) == read_text_file(b));

    // A different seed changes the bytes.
    CHECK(run_cli("simulate --config " + cfg + " --seed 100 --out " + b.string()).code == 0);
    CHECK(read_text_file(a) != read_text_file(b));
}

TEST_CASE("space2 with a quantum model is refused at validation") {
    const auto cfg = write_config("s2q.toml",
                                  "[model]\nkind = \"quantum\"\n[run]\ntrials = 10\n"
                                  "[analysis]\nspace2 = true\n[output]\ntrial_log = \"" +
                                      temp_path("s2q.csv").string() + "\"\n");
    const auto r = run_cli("simulate --config " + cfg);
    CHECK(r.code == 2);
    CHECK(r.err.find("counterfactual") != std::string::npos);
}

TEST_CASE("analyze a local-variable log under von Mises rules") {
    const auto log = temp_path("lhv.csv");
    const auto cfg = write_config(
        "lhv.toml", std::string(kLhvModelBlock) + "[run]\ntrials = 4000\nseed = 3\n"
                                                  "[output]\ntrial_log = \"" +
                        log.string() + "\"\n");
    REQUIRE(run_cli("simulate --config " + cfg).code == 0);

    const auto report_path = temp_path("lhv_report.json");
    const auto r = run_cli("analyze " + log.string() + " --mode frequentist_von_mises --out " +
                           report_path.string());
    CHECK(r.code == 0);

    const json j = parsed_report(report_path);
    REQUIRE(j.contains("space1"));
    CHECK(j["space1"].contains("ch"));
    CHECK(j["space1"]["violated"].is_boolean());

    REQUIRE(j.contains("space2"));
    CHECK(j["space2"]["refused"] == true);
    CHECK(std::string(j["space2"]["reason"]).find("only allowed within a single collective") !=
          std::string::npos);

    // Refusals are load-bearing: no numbers ride along.
    CHECK_FALSE(j["space2"].contains("ch"));

    CHECK(j.contains("frequentism"));
    CHECK(j.contains("feasibility"));
    CHECK(j["meta"]["source"] == "log:" + log.filename().string());
    CHECK(j["interpretation"]["mode"] == "frequentist_von_mises");

    // The same refusal shows up on the console.
    CHECK(r.out.find("space2: refused") != std::string::npos);
}

TEST_CASE("analyze rejects empty and malformed logs") {
    const auto empty = temp_path("empty.csv");
    write_text_file(empty, "");
    CHECK(run_cli("analyze " + empty.string()).code == 2);

    write_text_file(empty, std::string(io::kLogHeaderBase) + "\n");
    CHECK(run_cli("analyze " + empty.string()).code == 2);

    write_text_file(empty, std::string(io::kLogHeaderBase) + "\n0,0,0,0,22.5,1,2\n");
    const auto r = run_cli("analyze " + empty.string());
    CHECK(r.code == 2);
    CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("analyze accepts a config instead of a log") {
    const auto report_path = temp_path("cfg_report.json");
    const auto cfg = write_config("ana.toml",
                                  "[model]\nkind = \"quantum\"\n[run]\ntrials = 4000\nseed = 11\n"
                                  "[analysis]\nfeasibility = true\n");
    const auto r = run_cli("analyze " + cfg + " --out " + report_path.string());
    CHECK(r.code == 0);
    const json j = parsed_report(report_path);
    CHECK(j["config"]["model"]["kind"] == "quantum");
    CHECK(j["feasibility"]["verdict"].is_string());
}

TEST_CASE("feasibility on exact quantum contexts is infeasible with a certificate") {
    const auto settings = canonical_settings();
    ContextDistributions d;
    for (int pair = 0; pair < 4; ++pair) {
        const Angle alpha = settings.label(Side::Left, PairIndex::left_slot(pair)).angle;
        const Angle beta = settings.label(Side::Right, PairIndex::right_slot(pair)).angle;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                d.p[std::size_t(pair)][std::size_t(2 * a + b)] =
                    quantum_joint_probability(a, b, alpha, beta, 1.0);
    }
    const auto ctx = temp_path("quantum_ctx.json");
    write_text_file(ctx, context_file_json(d).dump(2));

    const auto cert_path = temp_path("quantum_cert.json");
    const auto r = run_cli("feasibility " + ctx.string() + " --out " + cert_path.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("verdict: infeasible") != std::string::npos);

    const json j = json::parse(read_text_file(cert_path));
    CHECK(j["verdict"] == "infeasible");
    REQUIRE(j["farkas"].is_array());
    CHECK(j["farkas"].size() == 17);
    CHECK(j["witness"].is_null());
}

TEST_CASE("feasibility on uniform contexts is feasible, with relaxed mode on counts") {
    ContextDistributions d;
    for (auto& row : d.p) row = {0.25, 0.25, 0.25, 0.25};
    const std::array<std::uint64_t, 4> n{1000, 1000, 1000, 1000};
    const auto ctx = temp_path("uniform_ctx.json");
    write_text_file(ctx, context_file_json(d, n).dump(2));

    const auto cert_path = temp_path("uniform_cert.json");
    const auto r = run_cli("feasibility " + ctx.string() + " --out " + cert_path.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("verdict: feasible") != std::string::npos);

    const json j = json::parse(read_text_file(cert_path));
    CHECK(j["verdict"] == "feasible");
    REQUIRE(j["witness"].is_array());
    CHECK(j["witness"].size() == 16);
    CHECK(j.contains("relaxed")); // sample sizes switch the statistical solve on
}

TEST_CASE("feasibility rejects bad context files") {
    const auto bad = temp_path("bad_ctx.json");
    write_text_file(bad, "{\"contexts\": 5}");
    CHECK(run_cli("feasibility " + bad.string()).code == 2);

    write_text_file(bad, "[not, the, schema");
    CHECK(run_cli("feasibility " + bad.string()).code == 2);

    CHECK(run_cli("feasibility " + temp_path("nonexistent.json").string()).code == 3);
}

TEST_CASE("report runs the whole pipeline deterministically") {
    const auto log = temp_path("full.csv");
    const auto cfg = write_config(
        "full.toml",
        std::string(kLhvModelBlock) +
            "[run]\ntrials = 6000\nseed = 21\n"
            "[analysis]\nspace2 = true\nfrequentism = true\nfeasibility = true\n"
            "[interpretation]\nmode = \"long_run_propensity\"\n"
            "[output]\ntrial_log = \"" +
            log.string() + "\"\n");

    const auto rpt = temp_path("full_report.json");
    const auto a = run_cli("report --config " + cfg + " --out " + rpt.string());
    CHECK(a.code == 0);
    CHECK(a.out.find("space1: ch=") != std::string::npos);
    CHECK(a.out.find("space2: ch=") != std::string::npos);
    const std::string log_bytes = read_text_file(log);
    const json r1 = parsed_report(rpt);

    const auto b = run_cli("report --config " + cfg + " --out " + rpt.string());
    CHECK(b.code == 0);
    CHECK(read_text_file(log) == log_bytes);
    CHECK(without_timestamp(parsed_report(rpt)) == without_timestamp(r1));

    // Worker count must change nothing but the clock.
    const auto c = run_cli("report --config " + cfg + " --out " + rpt.string(),
                           "BELLLAB_THREADS=3 ");
    CHECK(c.code == 0);
    CHECK(read_text_file(log) == log_bytes);
    CHECK(without_timestamp(parsed_report(rpt)) == without_timestamp(r1));

    // All four admitted analyses made it in.
    CHECK(r1.contains("space1"));
    CHECK(r1["space2"].contains("ch"));
    CHECK(r1.contains("frequentism"));
    CHECK(r1.contains("feasibility"));
    CHECK(r1["interpretation"]["blame"].is_object());
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli("").code == 2);                   // a subcommand is required
    CHECK(run_cli("frobnicate").code == 2);         // unknown subcommand
    CHECK(run_cli("feasibility").code == 2);        // missing required input
    CHECK(run_cli("simulate").code == 2);           // no config
    CHECK(run_cli("simulate --config " + temp_path("void.toml").string()).code == 3);
    const auto cfg = write_config("usage.toml", "[run]\ntrials = 5\n");
    CHECK(run_cli("analyze --mode nonsense --config " + cfg).code == 2);
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("simulate --help").code == 0);
}
