#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "belllab/config.hpp"
#include "belllab/io.hpp"

using namespace belllab;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("belllab_test_" + name);
}

const char* kQuantumConfig = R"(
# photon pairs at the standard angles
[model]
kind = "quantum"
visibility = 1.0

[run]
trials = 2000
seed = 42

[analysis]
space1 = true
feasibility = true

[interpretation]
mode = "frequentist_von_mises"
)";

const char* kLhvConfig = R"(
[model]
kind = "lhv_deterministic"
left_unprimed  = [1, 0]
left_primed    = [0, 0]
right_unprimed = [1, 1]
right_primed   = [0, 1]
lambda_weights = [0.5, 0.5]

[run]
trials = 500
seed = 7

[analysis]
space2 = true
)";

} // namespace

TEST_CASE("toml subset: sections, comments, and typed values") {
    const auto doc = toml::parse(R"(
top = 1 # inline comment
[alpha]
flag = true
name = "with # inside"   # the hash in quotes stays
xs = [1, 2.5, -3]
[beta]
count = 12345678901234567890
)");
    CHECK(doc.get_number("top") == 1.0);
    CHECK(doc.get_bool("alpha.flag"));
    CHECK(doc.get_string("alpha.name") == "with # inside");
    CHECK(doc.get_array("alpha.xs") == std::vector<double>{1.0, 2.5, -3.0});
    // Integers survive at full precision through the raw token.
    CHECK(doc.get_u64("beta.count") == 12345678901234567890ull);

    CHECK(doc.get_number("absent", 9.0) == 9.0);
    CHECK(doc.get_string("absent", "d") == "d");
    CHECK_FALSE(doc.has("alpha.missing"));
    CHECK_THROWS_AS(doc.at("alpha.missing"), ConfigError);
}

TEST_CASE("toml errors carry line numbers") {
    CHECK_THROWS_WITH(toml::parse("a = 1\nb = oops\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
    CHECK_THROWS_WITH(toml::parse("\n\n[unclosed\n"),
                      Catch::Matchers::ContainsSubstring("line 3"));
    CHECK_THROWS_WITH(toml::parse("just words\n"),
                      Catch::Matchers::ContainsSubstring("key = value"));
    CHECK_THROWS_WITH(toml::parse("a = \"open\n"),
                      Catch::Matchers::ContainsSubstring("unterminated string"));
    CHECK_THROWS_WITH(toml::parse("a = [1, 2\n"),
                      Catch::Matchers::ContainsSubstring("unterminated array"));
    CHECK_THROWS_WITH(toml::parse("a = 1\na = 2\n"),
                      Catch::Matchers::ContainsSubstring("duplicate key"));
    CHECK_THROWS_WITH(toml::parse("a =\n"), Catch::Matchers::ContainsSubstring("empty value"));
    CHECK_THROWS_AS(toml::parse("[ ]\n"), ConfigError);
}

TEST_CASE("u64 lookups reject what from_chars cannot take whole") {
    const auto doc = toml::parse("a = 1.5\nb = -3\nc = 7\n");
    CHECK_THROWS_AS(doc.get_u64("a"), ConfigError);
    CHECK_THROWS_AS(doc.get_u64("b"), ConfigError);
    CHECK(doc.get_u64("c") == 7);
    CHECK_THROWS_AS(doc.get_bool("c"), ConfigError);
    CHECK_THROWS_AS(doc.get_array("c"), ConfigError);
    CHECK_THROWS_AS(doc.get_string("c"), ConfigError);
}

TEST_CASE("quantum run config with defaults filled in") {
    const auto cfg = parse_run_config(kQuantumConfig);
    CHECK(cfg.model.kind == ModelKind::Quantum);
    CHECK(cfg.model.visibility == 1.0);
    CHECK(cfg.n_trials == 2000);
    CHECK(cfg.seed == 42);
    CHECK(cfg.threads == 1);
    CHECK(cfg.analyses.space1);
    CHECK_FALSE(cfg.analyses.space2);
    CHECK(cfg.analyses.feasibility);
    CHECK(cfg.analyses.sigma_level == 3.0);
    CHECK(cfg.interpretation == InterpretationMode::FrequentistVonMises);
    CHECK_FALSE(cfg.flags.spacelike_separated);
    CHECK(cfg.outputs.trial_log.empty());

    // Canonical angles are the default; explicit ones are normalized.
    CHECK(cfg.model.angles.left_primed.degrees() == 45.0);
    const auto shifted = parse_run_config(
        "[model]\nkind = \"quantum\"\nbeta_primed_deg = -22.5\n[run]\ntrials = 10\n");
    CHECK(shifted.model.angles.right_primed.degrees() == 157.5);
}

TEST_CASE("lhv run config builds the response table") {
    const auto cfg = parse_run_config(kLhvConfig);
    CHECK(cfg.model.kind == ModelKind::LhvDeterministic);
    CHECK(cfg.model.response.lambda_cardinality() == 2);
    CHECK(cfg.model.response.left[0] == std::vector<double>{1.0, 0.0});
    CHECK(cfg.model.response.right[1] == std::vector<double>{0.0, 1.0});
    CHECK(cfg.model.lambda_weights == std::vector<double>{0.5, 0.5});
    CHECK(cfg.analyses.space2); // fine: the model produces quadruples

    // Missing rows and ragged rows are named.
    CHECK_THROWS_WITH(
        parse_run_config("[model]\nkind = \"lhv_stochastic\"\nleft_unprimed = [0.5]\n"),
        Catch::Matchers::ContainsSubstring("left_primed"));
    CHECK_THROWS_WITH(parse_run_config("[model]\nkind = \"lhv_stochastic\"\n"
                                       "left_unprimed = [0.5]\nleft_primed = [0.5]\n"
                                       "right_unprimed = [0.5]\nright_primed = [0.5, 0.5]\n"),
                      Catch::Matchers::ContainsSubstring("lambda cardinality"));
}

TEST_CASE("space2 with a quantum model needs the surrogate") {
    const std::string base = "[model]\nkind = \"quantum\"\n[run]\ntrials = 100\n"
                             "[analysis]\nspace2 = true\n";
    CHECK_THROWS_WITH(parse_run_config(base),
                      Catch::Matchers::ContainsSubstring("surrogate"));

    const auto cfg = parse_run_config(base + "feasibility = true\n");
    CHECK(cfg.space2_via_feasibility());

    // A counterfactual-capable model needs no surrogate.
    const auto lhv = parse_run_config(kLhvConfig);
    CHECK_FALSE(lhv.space2_via_feasibility());
}

TEST_CASE("config validation rejects out-of-range requests") {
    CHECK_THROWS_WITH(parse_run_config("[run]\ntrials = 0\n"),
                      Catch::Matchers::ContainsSubstring("trials"));
    CHECK_THROWS_WITH(parse_run_config("[run]\ntrials = 10\nthreads = 0\n"),
                      Catch::Matchers::ContainsSubstring("threads"));
    CHECK_THROWS_WITH(parse_run_config("[analysis]\nsigma_level = -1\n"),
                      Catch::Matchers::ContainsSubstring("sigma_level"));
    CHECK_THROWS_WITH(parse_run_config("[analysis]\ntail_fraction = 1.0\n"),
                      Catch::Matchers::ContainsSubstring("tail_fraction"));
    CHECK_THROWS_WITH(parse_run_config("[analysis]\nconvergence_eps = 0\n"),
                      Catch::Matchers::ContainsSubstring("convergence_eps"));
    CHECK_THROWS_WITH(parse_run_config("[model]\nkind = \"nonsense\"\n"),
                      Catch::Matchers::ContainsSubstring("unknown model kind"));
    CHECK_THROWS_WITH(parse_run_config("[interpretation]\nmode = \"bayes\"\n"),
                      Catch::Matchers::ContainsSubstring("unknown interpretation mode"));
    CHECK_THROWS_WITH(parse_run_config("[model]\nkind = \"quantum\"\nvisibility = 1.5\n"),
                      Catch::Matchers::ContainsSubstring("model"));
    CHECK_THROWS_AS(parse_run_config("[model]\nalpha_unprimed_deg = 1e400\n"), ConfigError);
}

TEST_CASE("conspiracy and signaling knobs parse") {
    const auto conspiracy = parse_run_config(
        "[model]\nkind = \"conspiracy\"\n"
        "left_unprimed = [1, 1, 0, 0]\nleft_primed = [0, 0, 1, 0]\n"
        "right_unprimed = [1, 0, 1, 0]\nright_primed = [0, 1, 0, 0]\n"
        "conspiracy_bias = 0.75\n[run]\ntrials = 10\n");
    CHECK(conspiracy.model.kind == ModelKind::Conspiracy);
    CHECK(conspiracy.model.conspiracy_bias == 0.75);

    const auto signaling = parse_run_config(
        "[model]\nkind = \"signaling\"\nsignaling_strength = 0.25\n[run]\ntrials = 10\n");
    CHECK(signaling.model.kind == ModelKind::Signaling);
    CHECK(signaling.model.signaling_strength == 0.25);
}

TEST_CASE("load_run_config reports I/O problems as such") {
    CHECK_THROWS_AS(load_run_config(temp_path("no_such_file.toml")), IoError);

    const auto path = temp_path("ok.toml");
    write_text_file(path, "[run]\ntrials = 3\n");
    CHECK(load_run_config(path).n_trials == 3);
    std::filesystem::remove(path);
}

TEST_CASE("trial log round trip without quadruples") {
    const auto batch = run_trials(ModelSpec::quantum(canonical_settings(), 0.9), 300, 5);
    const auto path = temp_path("quantum.csv");
    write_trial_log(path, batch);

    const auto loaded = read_trial_log(path);
    REQUIRE(loaded.records.size() == batch.records.size());
    CHECK(loaded.records == batch.records);
    CHECK_FALSE(loaded.quadruples.has_value());
    CHECK(loaded.source == "log:" + path.filename().string());
    CHECK(loaded.angles.right_primed.degrees() == 157.5);

    // First line is the exact documented header.
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == io::kLogHeaderBase);
    std::filesystem::remove(path);
}

TEST_CASE("trial log round trip with quadruples") {
    const auto spec = ModelSpec::lhv(ModelKind::LhvStochastic, ResponseTable::constant(0.3, 2),
                                     uniform_weights(2));
    const auto batch = run_trials(spec, 250, 6);
    REQUIRE(batch.quadruples.has_value());

    const auto path = temp_path("lhv.csv");
    write_trial_log(path, batch);
    const auto loaded = read_trial_log(path);
    CHECK(loaded.records == batch.records);
    REQUIRE(loaded.quadruples.has_value());
    CHECK(*loaded.quadruples == *batch.quadruples);
    std::filesystem::remove(path);
}

TEST_CASE("trial log rejects malformed rows by line number") {
    const auto path = temp_path("bad.csv");

    write_text_file(path, std::string(io::kLogHeaderBase) + "\n0,0,0,0,22.5,1,1\n1,0,0,0,22.5,1\n");
    CHECK_THROWS_WITH(read_trial_log(path), Catch::Matchers::ContainsSubstring("line 3"));

    write_text_file(path, std::string(io::kLogHeaderBase) + "\n0,0,2,0,22.5,1,1\n");
    CHECK_THROWS_WITH(read_trial_log(path), Catch::Matchers::ContainsSubstring("beta_slot"));

    write_text_file(path, std::string(io::kLogHeaderBase) + "\n0,0,0,zero,22.5,1,1\n");
    CHECK_THROWS_WITH(read_trial_log(path), Catch::Matchers::ContainsSubstring("alpha_deg"));

    // The same slot must keep one angle.
    write_text_file(path, std::string(io::kLogHeaderBase) +
                              "\n0,0,0,0,22.5,1,1\n1,0,0,10,22.5,1,1\n");
    CHECK_THROWS_WITH(read_trial_log(path),
                      Catch::Matchers::ContainsSubstring("alpha_deg changed"));

    // Quadruples must agree with what was recorded.
    write_text_file(path, std::string(io::kLogHeaderQuadruples) +
                              "\n0,0,0,0,22.5,1,1,0,0,1,0\n");
    CHECK_THROWS_WITH(read_trial_log(path),
                      Catch::Matchers::ContainsSubstring("disagrees"));

    write_text_file(path, "");
    CHECK_THROWS_WITH(read_trial_log(path), Catch::Matchers::ContainsSubstring("empty"));

    write_text_file(path, std::string(io::kLogHeaderBase) + "\n");
    CHECK_THROWS_WITH(read_trial_log(path), Catch::Matchers::ContainsSubstring("no data rows"));

    write_text_file(path, "index,a,b\n1,2,3\n");
    CHECK_THROWS_WITH(read_trial_log(path),
                      Catch::Matchers::ContainsSubstring("unrecognized header"));
    std::filesystem::remove(path);
}

TEST_CASE("trial log tolerates CRLF line endings") {
    const auto path = temp_path("crlf.csv");
    write_text_file(path, std::string(io::kLogHeaderBase) + "\r\n0,0,1,0,157.5,1,0\r\n");
    const auto batch = read_trial_log(path);
    REQUIRE(batch.records.size() == 1);
    CHECK(batch.records[0].beta.slot == Slot::Primed);
    CHECK(batch.records[0].beta.angle.degrees() == 157.5);
    CHECK(batch.records[0].b.bit == 0);
    std::filesystem::remove(path);
}

TEST_CASE("context file round trip") {
    ContextDistributions d;
    for (int pair = 0; pair < 4; ++pair)
        d.p[std::size_t(pair)] = {0.1, 0.2, 0.3, 0.4};
    const std::array<std::uint64_t, 4> n{100, 200, 300, 400};

    const auto path = temp_path("contexts.json");
    write_text_file(path, context_file_json(d, n).dump(2));

    const auto file = read_context_file(path);
    CHECK(file.dists.p == d.p);
    REQUIRE(file.n_per_pair.has_value());
    CHECK(*file.n_per_pair == n);

    // Without sample sizes the field stays absent.
    write_text_file(path, context_file_json(d).dump(2));
    CHECK_FALSE(read_context_file(path).n_per_pair.has_value());
    std::filesystem::remove(path);
}

TEST_CASE("context file schema violations are named") {
    const auto path = temp_path("bad_contexts.json");

    write_text_file(path, "{}");
    CHECK_THROWS_WITH(read_context_file(path),
                      Catch::Matchers::ContainsSubstring("contexts"));

    write_text_file(path, R"x({"contexts": {"(a,b)": [0.25, 0.25, 0.25, 0.25]}})x");
    CHECK_THROWS_WITH(read_context_file(path),
                      Catch::Matchers::ContainsSubstring("(a,b')"));

    write_text_file(path, R"x({"contexts": {
        "(a,b)": [0.25, 0.25, 0.25], "(a,b')": [0.25, 0.25, 0.25, 0.25],
        "(a',b)": [0.25, 0.25, 0.25, 0.25], "(a',b')": [0.25, 0.25, 0.25, 0.25]}})x");
    CHECK_THROWS_WITH(read_context_file(path), Catch::Matchers::ContainsSubstring("4"));

    write_text_file(path, "not json at all");
    CHECK_THROWS_AS(read_context_file(path), ConfigError);

    CHECK_THROWS_AS(read_context_file(temp_path("missing.json")), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("doubles serialize to their shortest round-trip form") {
    CHECK(io::format_double(0.25) == "0.25");
    CHECK(io::format_double(157.5) == "157.5");
    CHECK(io::format_double(0.0) == "0");
    CHECK(io::format_double(1.0 / 3.0) == "0.3333333333333333");
    const double v = 0.1 + 0.2;
    CHECK(io::parse_double_field(io::format_double(v), 1, "x") == v);
}

TEST_CASE("environment variable caps the worker count") {
    ::unsetenv("BELLLAB_THREADS");
    CHECK(resolve_threads(4) == 4);
    CHECK(resolve_threads(0) == 1);

    ::setenv("BELLLAB_THREADS", "2", 1);
    CHECK(resolve_threads(4) == 2);
    CHECK(resolve_threads(1) == 1); // a cap, not a floor

    ::setenv("BELLLAB_THREADS", "garbage", 1);
    CHECK(resolve_threads(4) == 4);
    ::setenv("BELLLAB_THREADS", "0", 1);
    CHECK(resolve_threads(4) == 4); // zero cap is ignored
    ::unsetenv("BELLLAB_THREADS");
}
