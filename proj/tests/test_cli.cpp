#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string("\"") + DAMCTL_CLI + "\" " + args + " 2>&1";
    Run r{-1, {}};
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path workdir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "damctl_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        std::ofstream(d / "small.config") << "[hawkes]\nc = 0.001\n[grid]\nnh = 15\nnl = 12\n";
        std::ofstream(d / "bad.config") << "[marks]\nprobs = 0.3, 0.4, 0.5\n";
        std::ofstream(d / "probes.csv") << "h,ell,regime\n60,1.5,1\n";
        return d;
    }();
    return dir;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

} // namespace

TEST_CASE("usage errors") {
    CHECK(run("--version").code == 0);
    CHECK(run("").code == 1);
    const Run r = run("solve --bogus");
    CHECK(r.code == 1);
    CHECK(r.out.find("Usage") != std::string::npos);
    CHECK(run("solve --config " + q(workdir() / "small.config") + " --out x --format xml").code == 1);
}

TEST_CASE("solve and report") {
    const fs::path out = workdir() / "bundle";
    const Run s = run("solve --config " + q(workdir() / "small.config") + " --out " + q(out) + " --tol 1e-10");
    REQUIRE(s.code == 0);
    CHECK(fs::exists(out / "v0.csv"));
    CHECK(fs::exists(out / "metadata.json"));
    const Run r = run("report --policy " + q(out));
    CHECK(r.code == 0);
    CHECK(r.out.find("\"residual_match\": true") != std::string::npos);

    const fs::path json = workdir() / "bundle_json";
    CHECK(run("solve --config " + q(workdir() / "small.config") + " --out " + q(json) + " --format json").code == 0);
    CHECK(fs::exists(json / "bundle.json"));
    CHECK(run("report --policy " + q(json)).code == 0);
}

TEST_CASE("error exit codes") {
    CHECK(run("solve --config " + q(workdir() / "bad.config") + " --out " + q(workdir() / "bad")).code == 1);
    CHECK(run("solve --config " + q(workdir() / "none.config") + " --out " + q(workdir() / "bad")).code == 3);
    CHECK(run("solve --config " + q(workdir() / "small.config") + " --out " + q(workdir() / "nc") +
              " --tol 1e-14 --max-iter 2")
              .code == 2);
    CHECK(run("report --policy " + q(workdir() / "missing")).code == 3);
}

TEST_CASE("simulate") {
    const fs::path bundle = workdir() / "sim_bundle";
    REQUIRE(run("solve --config " + q(workdir() / "small.config") + " --out " + q(bundle)).code == 0);
    const fs::path dump = workdir() / "paths.csv";
    const Run a = run("simulate --config " + q(workdir() / "small.config") + " --policy " + q(bundle) +
                      " --h0 60 --ell0 1.5 --regime 1 --paths 100 --seed 3 --dump-paths " + q(dump));
    CHECK(a.code == 0);
    CHECK(a.out.find("estimate") != std::string::npos);
    CHECK(fs::exists(dump));
    const Run b = run("simulate --config " + q(workdir() / "small.config") +
                      " --policy baseline --h0 60 --ell0 1.5 --paths 100 --seed 3");
    CHECK(b.code == 0);
    CHECK(run("simulate --config " + q(workdir() / "small.config") +
              " --policy baseline --h0 60 --ell0 1.5 --paths 50 --seed 3")
              .code == 1);
    CHECK(run("simulate --config " + q(workdir() / "small.config") +
              " --policy baseline --h0 500 --ell0 1.5 --paths 5 --seed 3")
              .code == 1);
}

TEST_CASE("sweep") {
    const fs::path out = workdir() / "sweep";
    const Run r = run("sweep --config " + q(workdir() / "small.config") + " --c-list 0.001,0.01 --out " + q(out));
    CHECK(r.code == 0);
    CHECK(r.out.find("nonincreasing in c") != std::string::npos);
    CHECK(fs::exists(out / "sweep.csv"));
    CHECK(fs::exists(out / "verdict.csv"));
    CHECK(run("sweep --config " + q(workdir() / "small.config") + " --c-list 0.001,abc --out " + q(out)).code == 1);
}

TEST_CASE("validate") {
    const fs::path bundle = workdir() / "val_bundle";
    REQUIRE(run("solve --config " + q(workdir() / "small.config") + " --out " + q(bundle)).code == 0);
    const Run r = run("validate --config " + q(workdir() / "small.config") + " --policy " + q(bundle) +
                      " --probes " + q(workdir() / "probes.csv") + " --paths 100 --seed 1");
    CHECK((r.code == 0 || r.code == 1));
    CHECK(r.out.find("c_disc") != std::string::npos);
}
