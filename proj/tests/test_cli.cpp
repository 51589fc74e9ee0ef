#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "json.hpp"

#include "support.hpp"

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string temp_path(const std::string& tag) {
    return "/tmp/dsteval_test_" + std::to_string(getpid()) + "_" + tag;
}

// Run the tool through the shell, capturing both streams separately.
RunResult run_cli(const std::string& args, const std::string& stdin_file = "") {
    const std::string err_path = temp_path("stderr");
    std::string cmd = std::string(DST_EVAL_BIN) + " " + args + " 2>" + err_path;
    if (!stdin_file.empty()) cmd += " <" + stdin_file;

    RunResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) result.out.append(buf, got);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.err = testsupport::slurp(err_path);
    std::remove(err_path.c_str());
    return result;
}

std::vector<std::string> split_csv_row(const std::string& text, std::size_t row) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto end = text.find('\n', start);
        lines.push_back(text.substr(start, end - start));
        if (end == std::string::npos) break;
        start = end + 1;
    }
    REQUIRE(row < lines.size());
    std::vector<std::string> fields;
    start = 0;
    const std::string& line = lines[row];
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

const std::string kF1 = testsupport::fixture_path("f1.json");
const std::string kA1 = testsupport::fixture_path("a1.json");
const std::string kOntology = testsupport::fixture_path("ontology_multiwoz.json");
const std::string kBad = testsupport::fixture_path("bad_turn_gap.json");

}  // namespace

TEST_CASE("evaluate renders the default table") {
    const RunResult r = run_cli("evaluate --predictions " + kF1 + " --ontology " + kOntology);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("33.33%") != std::string::npos);
    CHECK(r.out.find("fga_0.25") != std::string::npos);
    CHECK(r.out.find("fga_0.5") != std::string::npos);
    CHECK(r.out.find("fga_0.75") != std::string::npos);
    CHECK(r.out.find("fga_1") != std::string::npos);
    CHECK(r.out.find("warning") == std::string::npos);
}

TEST_CASE("evaluate at lambda zero reproduces strict scoring") {
    const RunResult r = run_cli("evaluate --predictions " + kF1 + " --lambdas 0 --format csv");
    REQUIRE(r.exit_code == 0);
    const auto header = split_csv_row(r.out, 0);
    const auto row = split_csv_row(r.out, 1);
    REQUIRE(header.size() == row.size());
    std::size_t jga_col = 0, fga_col = 0;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "jga") jga_col = i;
        if (header[i] == "fga_0") fga_col = i;
    }
    REQUIRE(jga_col != 0);
    REQUIRE(fga_col != 0);
    CHECK(row[jga_col] == row[fga_col]);
}

TEST_CASE("evaluate reads standard input") {
    const RunResult r = run_cli("evaluate --predictions - --format csv", kF1);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("0.3333333333333333") != std::string::npos);
}

TEST_CASE("evaluate exit codes") {
    CHECK(run_cli("evaluate --predictions /nonexistent.json").exit_code == 2);
    CHECK(run_cli("evaluate --predictions " + kBad).exit_code == 1);
    CHECK(run_cli("evaluate --predictions " + kF1 + " --lambdas=-1").exit_code == 2);
    CHECK(run_cli("evaluate --predictions " + kF1 + " --format yaml").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);

    const std::string bad = temp_path("bad.json");
    std::ofstream(bad) << "{broken";
    CHECK(run_cli("evaluate --predictions " + bad).exit_code == 1);
    std::remove(bad.c_str());
}

TEST_CASE("diagnostics go to the error stream only") {
    const RunResult r = run_cli("evaluate --predictions " + kF1 + " --lambdas 0.5,0.5 --format csv");
    CHECK(r.exit_code == 0);
    CHECK(r.err.find("duplicate lambda") != std::string::npos);
    CHECK(r.out.find("warning") == std::string::npos);
    // The duplicate collapses to a single credit column.
    CHECK(split_csv_row(r.out, 0).size() == 10);
}

TEST_CASE("compare renders one row per model") {
    const RunResult r = run_cli("compare --predictions a=" + kF1 + " --predictions b=" + kF1 +
                                " --format csv");
    REQUIRE(r.exit_code == 0);
    const auto row_a = split_csv_row(r.out, 1);
    const auto row_b = split_csv_row(r.out, 2);
    CHECK(row_a[0] == "a");
    CHECK(row_b[0] == "b");
    REQUIRE(row_a.size() == row_b.size());
    for (std::size_t i = 1; i < row_a.size(); ++i) {
        CHECK(row_a[i] == row_b[i]);
    }
}

TEST_CASE("compare warns when turn counts differ") {
    const RunResult r =
        run_cli("compare --predictions a=" + kF1 + " --predictions b=" + kA1 + " --format csv");
    CHECK(r.exit_code == 0);
    CHECK(r.err.find("n_turns") != std::string::npos);
}

TEST_CASE("compare usage errors") {
    CHECK(run_cli("compare --predictions a=" + kF1).exit_code == 2);
    CHECK(run_cli("compare --predictions " + kF1 + " --predictions b=" + kA1).exit_code == 2);
    CHECK(run_cli("compare --predictions a=" + kF1 + " --predictions b=/nonexistent.json").exit_code == 2);
}

TEST_CASE("compare suppresses output when a file fails") {
    const std::string bad = temp_path("compare_bad.json");
    std::ofstream(bad) << R"({"version":"1"})";
    const RunResult r = run_cli("compare --predictions a=" + kF1 + " --predictions b=" + bad);
    CHECK(r.exit_code == 1);
    CHECK(r.out.empty());
    std::remove(bad.c_str());
}

TEST_CASE("trace prints the per-turn credits") {
    const RunResult r = run_cli("trace --predictions " + kF1 + " --dialogue-id f1 --lambdas 0.5");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("0.3935") != std::string::npos);
    CHECK(r.out.find("# conversation f1") != std::string::npos);

    const RunResult rj =
        run_cli("trace --predictions " + kF1 + " --dialogue-id f1 --lambdas 0.5 --format jsonlines");
    REQUIRE(rj.exit_code == 0);
    const auto first = nlohmann::json::parse(rj.out.substr(0, rj.out.find('\n')));
    CHECK(first["class"] == "exact");

    CHECK(run_cli("trace --predictions " + kF1 + " --dialogue-id missing").exit_code == 1);
    CHECK(run_cli("trace --predictions " + kF1).exit_code == 2);
}

TEST_CASE("lambda calibration output") {
    const RunResult r = run_cli("lambda --tf 6 --p 0.95");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("0.499") != std::string::npos);

    const RunResult zero = run_cli("lambda --tf 4 --p 0");
    CHECK(zero.exit_code == 0);
    CHECK(zero.out.find("rounded 0.000") != std::string::npos);

    CHECK(run_cli("lambda --tf 6 --p 1").exit_code == 2);
    CHECK(run_cli("lambda --tf 0 --p 0.5").exit_code == 2);
}

TEST_CASE("synth is reproducible and feeds evaluate") {
    const std::string one = temp_path("synth1.json");
    const std::string two = temp_path("synth2.json");
    REQUIRE(run_cli("synth --seed 7 --conversations 20 --p-drop 0.2 --output " + one).exit_code == 0);
    REQUIRE(run_cli("synth --seed 7 --conversations 20 --p-drop 0.2 --output " + two).exit_code == 0);
    CHECK(testsupport::slurp(one) == testsupport::slurp(two));

    const RunResult eval = run_cli("evaluate --predictions " + one + " --format csv");
    CHECK(eval.exit_code == 0);

    const RunResult clean = run_cli("synth --seed 9 --conversations 5 | " + std::string(DST_EVAL_BIN) +
                                    " evaluate --predictions -");
    CHECK(clean.exit_code == 0);
    CHECK(clean.out.find("100.00%") != std::string::npos);

    CHECK(run_cli("synth --seed 1 --p-drop 1.5").exit_code == 2);
    CHECK(run_cli("synth --seed 1 --turns 9..4").exit_code == 2);
    CHECK(run_cli("synth --seed 1 --turns abc").exit_code == 2);
    CHECK(run_cli("synth --conversations 5").exit_code == 2);

    std::remove(one.c_str());
    std::remove(two.c_str());
}

TEST_CASE("stats reports corpus shape") {
    const RunResult r = run_cli("stats --predictions " + kF1);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("conversations 1") != std::string::npos);
    CHECK(r.out.find("turns 6") != std::string::npos);
    CHECK(r.out.find("avg_turns 6.00") != std::string::npos);

    const std::string corpus = temp_path("stats_corpus.json");
    REQUIRE(run_cli("synth --seed 5 --conversations 30 --turns 7..8 --output " + corpus).exit_code == 0);
    const RunResult shaped = run_cli("stats --predictions " + corpus);
    CHECK(shaped.exit_code == 0);
    CHECK(shaped.out.find("conversations 30") != std::string::npos);
    std::remove(corpus.c_str());

    CHECK(run_cli("stats --predictions " + kBad).exit_code == 1);
}

TEST_CASE("average turns are truncated to two decimals") {
    // 59 turns over 8 dialogues: 7.375 averages must print as 7.37, not 7.38.
    const std::string corpus = temp_path("avg.json");
    {
        std::ofstream out(corpus);
        out << R"({"version":"1","dialogues":[)";
        for (int d = 0; d < 8; ++d) {
            if (d) out << ",";
            out << R"({"dialogue_id":"d)" << d << R"(","turns":[)";
            const int turns = d == 0 ? 10 : 7;
            for (int t = 0; t < turns; ++t) {
                if (t) out << ",";
                out << R"({"turn_index":)" << t
                    << R"(,"ground_truth":[["h","a","c"]],"prediction":[["h","a","c"]]})";
            }
            out << "]}";
        }
        out << "]}";
    }
    const RunResult r = run_cli("stats --predictions " + corpus);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("turns 59") != std::string::npos);
    CHECK(r.out.find("avg_turns 7.37") != std::string::npos);
    std::remove(corpus.c_str());
}

TEST_CASE("version flag") {
    const RunResult r = run_cli("--version");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("0.1.0") != std::string::npos);
}
