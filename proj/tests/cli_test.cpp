#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

const std::string kBin = TIPPING_CLI_PATH;
const fs::path kData = TIPPING_DATA_DIR;
const fs::path kGolden = TIPPING_GOLDEN_DIR;

struct Run {
    int code = -1;
    std::string out;
};

// Runs the binary through the shell with TIPPING_BASINS cleared unless the
// command sets it. stderr is discarded unless merge is set.
Run run(const std::string& args, bool merge = false) {
    const std::string cmd = "env -u TIPPING_BASINS " + kBin + " " + args + (merge ? " 2>&1" : " 2>/dev/null");
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string basins(const char* file = "worked.json") { return "--basins " + (kData / file).string(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool has(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

} // namespace

TEST_CASE("cli predict on the worked prompts") {
    auto r = run("predict " + basins());
    CHECK(r.code == 0);
    CHECK(has(r.out, "n* = 1"));
    r = run("predict " + basins() + " --conv A,C-,C-,A");
    CHECK(has(r.out, "n* = 4"));
    r = run("predict " + basins() + " --conv A,C+,C+,A");
    CHECK(has(r.out, "timing_class = near_boundary"));
    r = run("predict " + basins() + " --conv [0.2,0.6]");
    CHECK(has(r.out, "n* = 0"));
    r = run("--json predict " + basins());
    CHECK(has(r.out, "\"n_star\":1"));
    r = run("steer " + basins());
    CHECK(r.code == 0);
    CHECK(has(r.out, "n* before = 1"));
    CHECK(has(r.out, "n* after = 4"));
    CHECK(has(r.out, "delta = 3"));
}

TEST_CASE("cli prints the resolved config to stderr") {
    const auto r = run("predict " + basins(), true);
    CHECK(has(r.out, "config: kernel="));
    CHECK(has(r.out, "config: command=predict"));
    CHECK(run("--kernel scalar predict " + basins(), true).out.find("kernel=scalar") != std::string::npos);
}

TEST_CASE("cli rollout and reproducible sampling") {
    auto r = run("rollout " + basins() + " --steps 10");
    CHECK(has(r.out, "trace = ABDDDDDDDDD"));
    CHECK(has(r.out, "first-hit = 1"));
    const auto a = run("--seed 3 rollout " + basins() + " --temperature 0.5 --steps 40");
    const auto b = run("--seed 3 rollout " + basins() + " --temperature 0.5 --steps 40");
    CHECK(a.out == b.out);
}

TEST_CASE("cli bifurcate and stats") {
    auto r = run("bifurcate --pattern-r 3.2");
    CHECK(r.code == 0);
    CHECK(has(r.out, "2.9995"));
    CHECK(has(r.out, "3.4495"));
    CHECK(has(r.out, "pattern = BDBD"));
    r = run("stats --k 16 --n 18");
    CHECK(has(r.out, "p = 0.000656128"));
    r = run("stats --k 6 --n 6 --two-sided");
    CHECK(has(r.out, "p = 0.03125"));
}

TEST_CASE("cli basins from the environment") {
    const auto r = run("predict");
    CHECK(r.code == 1);
    const std::string cmd = "env TIPPING_BASINS=" + (kData / "worked.json").string() + " " + kBin + " predict 2>/dev/null";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    CHECK(WEXITSTATUS(status) == 0);
    CHECK(has(out, "n* = 1"));
}

TEST_CASE("cli errors exit 1 with a location") {
    const auto dir = fs::temp_directory_path() / ("tipping_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    {
        std::ofstream(dir / "bad.json") << R"({"dimension": 2, "basins": {"B": {"centroid": [1, "x"]}}})";
    }
    auto r = run("predict --basins " + (dir / "bad.json").string(), true);
    CHECK(r.code == 1);
    CHECK(has(r.out, "bad.json"));
    CHECK(has(r.out, "/basins/B/centroid"));
    r = run("predict --basins " + (dir / "missing.json").string());
    CHECK(r.code == 1);
    CHECK(run("--bogus predict").code == 1);
    CHECK(run("predict --conv").code == 1);
    CHECK(run("").code == 1);
    fs::remove_all(dir);
}

TEST_CASE("cli monitor exit codes") {
    const auto dir = fs::temp_directory_path() / ("tipping_mon_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    {
        std::ofstream(dir / "calm.jsonl") << "{\"t\": 0, \"embedding\": [0.4, -0.3]}\n";
        std::ofstream(dir / "tip.jsonl") << "{\"t\": 0, \"embedding\": [0.4, -0.3]}\n{\"t\": 1, \"embedding\": [0.9, 0.5]}\n";
    }
    auto r = run("monitor " + basins() + " --input " + (dir / "calm.jsonl").string());
    CHECK(r.code == 0);
    CHECK(has(r.out, "\"level\":\"ok\""));
    r = run("monitor " + basins() + " --input " + (dir / "tip.jsonl").string());
    CHECK(r.code == 2);
    CHECK(has(r.out, "\"level\":\"tipped\""));
    fs::remove_all(dir);
}

TEST_CASE("cli experiment and report") {
    const auto dir = fs::temp_directory_path() / ("tipping_exp_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    auto r = run("experiment --spec " + (kData / "worked_experiment.json").string() + " --out-dir " + dir.string());
    CHECK(r.code == 0);
    REQUIRE(fs::exists(dir / "worked_results.csv"));
    CHECK(fs::exists(dir / "worked_trajectory.svg"));
    const auto csv = slurp(dir / "worked_results.csv");
    CHECK(csv.rfind("prompt,geometry,temperature,seed,control,n_star_pred,raw_value,n_star_obs_tok,n_star_obs_sent,"
                    "timing_class,delta_hat,agree_tok,agree_sent,error\n",
                    0) == 0);
    r = run("report --results " + (dir / "worked_results.csv").string() + " --summary-json " + (dir / "s.json").string());
    CHECK(r.code == 0);
    CHECK(has(slurp(dir / "s.json"), "\"agreements\": 4"));
    fs::remove_all(dir);
}

TEST_CASE("cli help matches the golden files") {
    CHECK(run("--help").out == slurp(kGolden / "help.txt"));
    CHECK(run("--help").code == 0);
    for (const char* sub : {"predict", "rollout", "steer", "multilayer", "bifurcate", "bootstrap", "stats", "monitor",
                            "experiment", "report"}) {
        CAPTURE(sub);
        CHECK(run(std::string(sub) + " --help").out == slurp(kGolden / ("help_" + std::string(sub) + ".txt")));
    }
}
