// End-to-end checks of the command-line binary: exit codes, error surface,
// artifact layout, config layering, resume, and reproducibility. Each case
// invokes the real executable in a scratch directory.

#include <doctest/doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "kcd/data.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("kcd_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f.good()) return "<missing file: " + p.string() + ">";
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

/// Runs the CLI with `args`, capturing exit code, stdout, and stderr.
/// `env` is prepended verbatim (e.g. "KCD_DATA_DIR=/x "); paths used in
/// these tests contain no shell metacharacters.
CliRun run_cli(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    const fs::path cap = fs::temp_directory_path() / ("kcd_cli_cap_" + std::to_string(counter++));
    fs::create_directories(cap);
    const std::string cmd = env + std::string(KCD_CLI_PATH) + " " + args + " > " +
                            (cap / "out").string() + " 2> " + (cap / "err").string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(cap / "out");
    r.err = slurp(cap / "err");
    fs::remove_all(cap);
    return r;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help exits 0 and lists the subcommands") {
    const CliRun r = run_cli("--help");
    CHECK(r.code == 0);
    for (const char* name : {"phantom", "make-mask", "degrade-strip", "train", "reconstruct",
                             "evaluate", "multi-sample", "zero-shot", "ablate-T"})
        CHECK(r.out.find(name) != std::string::npos);
}

TEST_CASE("usage errors exit 2 with a single-line error message") {
    SUBCASE("unknown subcommand") {
        const CliRun r = run_cli("frobnicate");
        CHECK(r.code == 2);
        CHECK(r.err.rfind("error:", 0) == 0);
        CHECK(count_lines(r.err) == 1);
    }
    SUBCASE("missing required option") {
        const CliRun r = run_cli("make-mask"); // --out is required
        CHECK(r.code == 2);
        CHECK(r.err.rfind("error:", 0) == 0);
    }
    SUBCASE("invalid option value") {
        const fs::path dir = fresh_dir("badfam");
        const CliRun r = run_cli("make-mask --mask mystery --out " + dir.string());
        CHECK(r.code == 2);
        CHECK(r.err.rfind("error:", 0) == 0);
        CHECK(r.err.find("mystery") != std::string::npos);
        fs::remove_all(dir);
    }
    SUBCASE("no data source anywhere") {
        const fs::path dir = fresh_dir("nodata");
        const CliRun r = run_cli("phantom --out " + dir.string() + " --n 1 --size 16");
        REQUIRE(r.code == 0);
        const CliRun e = run_cli("degrade-strip --T 2 --out " + dir.string() + "/s");
        CHECK(e.code == 2);
        CHECK(e.err.find("KCD_DATA_DIR") != std::string::npos);
        fs::remove_all(dir);
    }
}

TEST_CASE("runtime failures exit 1") {
    const fs::path dir = fresh_dir("io");
    const CliRun r = run_cli("evaluate --checkpoint " + (dir / "no.kcdm").string() +
                             " --data " + (dir / "no.kcds").string() + " --out " +
                             (dir / "o").string());
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error:", 0) == 0);
    fs::remove_all(dir);
}

TEST_CASE("phantom writes a loadable dataset with manifests") {
    const fs::path dir = fresh_dir("phantom");
    const CliRun r =
        run_cli("phantom --n 3 --size 24 --seed 5 --out " + dir.string());
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "phantoms.kcds"));
    CHECK(fs::exists(dir / "manifest.json"));
    const nlohmann::json m = nlohmann::json::parse(slurp(dir / "run_manifest.json"));
    CHECK(m.at("command").get<std::string>() == "phantom");
    CHECK(m.at("n").get<int>() == 3);
    CHECK(m.at("dtype").get<std::string>() == "complex128");

    const std::vector<kcd::SliceRecord> recs = kcd::load_dataset(dir.string());
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].kspace.height == 24);
    fs::remove_all(dir);
}

TEST_CASE("make-mask applies the default center fraction rule") {
    const fs::path dir = fresh_dir("mask");
    const CliRun r = run_cli("make-mask --mask cartesian-random --height 32 --width 32 "
                             "--accel 4 --seed 3 --out " + dir.string());
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "mask.png"));
    CHECK(fs::exists(dir / "mask.json"));
    const nlohmann::json m = nlohmann::json::parse(slurp(dir / "run_manifest.json"));
    CHECK(m.at("center_fraction").get<double>() == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(m.at("kept_columns").get<int>() == 8); // round(32 / 4)
    CHECK(m.at("kept_entries").get<int>() == 8 * 32);
    fs::remove_all(dir);
}

TEST_CASE("training pipeline: config layering, resume, reconstruction, transfer") {
    const fs::path dir = fresh_dir("pipeline");
    REQUIRE(run_cli("phantom --n 2 --size 16 --seed 9 --out " + (dir / "data").string()).code ==
            0);

    // Config file values apply unless a flag overrides them.
    {
        std::ofstream cfg(dir / "train.cfg");
        cfg << "{\"iterations\": 5, \"learning_rate\": 0.01, \"total_steps\": 3,\n"
               " \"network\": {\"depth\": 1, \"base_channels\": 4, \"time_dim\": 4}}\n";
    }
    const std::string train_common =
        " --data " + (dir / "data").string() + " --config " + (dir / "train.cfg").string() +
        " --batch 2 --seed 4 --checkpoint-every 100";
    const CliRun t1 =
        run_cli("train --iters 2 --out " + (dir / "run").string() + train_common);
    REQUIRE(t1.code == 0);
    CHECK(t1.out.find("trained 2 iterations") != std::string::npos);

    const nlohmann::json m = nlohmann::json::parse(slurp(dir / "run" / "run_manifest.json"));
    CHECK(m.at("iterations").get<int>() == 2);                   // flag beats config
    CHECK(m.at("learning_rate").get<double>() == 0.01);          // config beats default
    CHECK(m.at("total_steps").get<int>() == 3);                  // config beats default
    CHECK(m.at("batch_size").get<int>() == 2);                   // flag
    CHECK(m.at("network").at("depth").get<int>() == 1);          // config
    CHECK(m.at("mask").at("center_fraction").get<double>() ==
          doctest::Approx(0.08).epsilon(1e-12)); // default rule for R=4
    CHECK(fs::exists(dir / "run" / "model.kcdm"));
    CHECK(fs::exists(dir / "run" / "train_state.kcdt"));
    REQUIRE(fs::exists(dir / "run" / "loss.csv"));
    CHECK(count_lines(slurp(dir / "run" / "loss.csv")) == 3); // header + 2 rows

    // Resume continues in place and extends the loss log.
    const CliRun t2 = run_cli("train --resume " + (dir / "run" / "train_state.kcdt").string() +
                              " --iters 4 --out " + (dir / "run").string() + train_common);
    REQUIRE(t2.code == 0);
    CHECK(t2.out.find("resumed at iteration 2") != std::string::npos);
    CHECK(count_lines(slurp(dir / "run" / "loss.csv")) == 5);

    // Reconstruct with the trained checkpoint, default panel budget.
    const CliRun rc = run_cli("reconstruct --checkpoint " + (dir / "run" / "model.kcdm").string() +
                              " --data " + (dir / "data").string() + " --T 3 --seed 1 --out " +
                              (dir / "recon").string());
    REQUIRE(rc.code == 0);
    CHECK(count_lines(slurp(dir / "recon" / "eval.csv")) == 3);
    CHECK(fs::exists(dir / "recon" / "syn0_s0_recon.png"));
    CHECK(fs::exists(dir / "recon" / "syn1_s0_error.png"));
    CHECK(fs::exists(dir / "recon" / "eval.json"));

    // Zero-shot reuses the same checkpoint across mask specs.
    const CliRun zs = run_cli("zero-shot --checkpoint " + (dir / "run" / "model.kcdm").string() +
                              " --data " + (dir / "data").string() +
                              " --families cartesian-random,gaussian-1d --accels 2 --T 2" +
                              " --seed 1 --out " + (dir / "zs").string());
    REQUIRE(zs.code == 0);
    CHECK(fs::exists(dir / "zs" / "zero_shot.csv"));
    CHECK(fs::exists(dir / "zs" / "cartesian-random_R2" / "eval.csv"));
    CHECK(fs::exists(dir / "zs" / "gaussian-1d_R2" / "eval.csv"));

    // multi-sample insists on more than one trajectory.
    const CliRun ms = run_cli("multi-sample --checkpoint " +
                              (dir / "run" / "model.kcdm").string() + " --data " +
                              (dir / "data").string() + " --n-samples 1 --out " +
                              (dir / "ms").string());
    CHECK(ms.code == 2);
    fs::remove_all(dir);
}

TEST_CASE("evaluate is byte-reproducible and honors KCD_DATA_DIR") {
    const fs::path dir = fresh_dir("repro");
    REQUIRE(run_cli("phantom --n 2 --size 16 --seed 2 --out " + (dir / "data").string()).code ==
            0);
    REQUIRE(run_cli("train --data " + (dir / "data").string() + " --out " +
                    (dir / "run").string() +
                    " --iters 2 --batch 2 --T 2 --depth 1 --base-channels 4 --time-dim 4")
                .code == 0);

    const std::string eval_args = "evaluate --checkpoint " +
                                  (dir / "run" / "model.kcdm").string() +
                                  " --T 2 --sampler cold --seed 7 --out ";
    const CliRun e1 = run_cli(eval_args + (dir / "e1").string() + " --data " +
                              (dir / "data").string());
    REQUIRE(e1.code == 0);
    const CliRun e2 = run_cli(eval_args + (dir / "e2").string() + " --data " +
                              (dir / "data").string());
    REQUIRE(e2.code == 0);
    CHECK(slurp(dir / "e1" / "eval.csv") == slurp(dir / "e2" / "eval.csv"));
    CHECK(slurp(dir / "e1" / "eval.json") == slurp(dir / "e2" / "eval.json"));

    // Same run with the dataset coming from the environment.
    const CliRun e3 = run_cli(eval_args + (dir / "e3").string(),
                              "KCD_DATA_DIR=" + (dir / "data").string() + " ");
    REQUIRE(e3.code == 0);
    CHECK(slurp(dir / "e3" / "eval.csv") == slurp(dir / "e1" / "eval.csv"));
    fs::remove_all(dir);
}

} // TEST_SUITE("cli")
