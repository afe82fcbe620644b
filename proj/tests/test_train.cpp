#include <doctest/doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "kcd/fourier.hpp"
#include "kcd/train.hpp"
#include "oracles.hpp"

using namespace kcd;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.total_steps = 4;
    cfg.batch_size = 2;
    cfg.learning_rate = 1e-3;
    cfg.iterations = 10;
    cfg.seed = 5;
    cfg.checkpoint_interval = 4;
    return cfg;
}

UNetConfig tiny_arch() {
    UNetConfig arch;
    arch.depth = 1;
    arch.base_channels = 4;
    arch.time_dim = 4;
    return arch;
}

std::vector<BatchItem> make_batch(const std::vector<SliceRecord>& recs,
                                  std::vector<ComplexImage>& cleans,
                                  std::vector<std::string>& ids) {
    cleans.clear();
    ids.clear();
    for (const SliceRecord& r : recs) {
        cleans.push_back(inverse_transform(r.kspace));
        ids.push_back(r.volume_id);
    }
    std::vector<BatchItem> batch;
    for (std::size_t i = 0; i < cleans.size(); ++i)
        batch.push_back(BatchItem{&cleans[i], &ids[i]});
    return batch;
}

} // namespace

TEST_SUITE("train") {

TEST_CASE("l1 loss: hand-computed values and symmetry") {
    ComplexImage a(1, 2), b(1, 2);
    a.data = {Complex(1.0, 0.0), Complex(0.0, -2.0)};
    b.data = {Complex(0.0, 0.0), Complex(0.0, 0.0)};
    // |dr| + |di| summed over pixels = (1 + 0) + (0 + 2) = 3; mean over 2*HW = 4 values.
    CHECK(l1_loss(a, b) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(l1_loss(b, a) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(l1_loss(a, a) == 0.0);
}

TEST_CASE("draw_step covers {1..T} uniformly-ish and is deterministic") {
    Rng rng(3);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 4000; ++i) {
        const int t = draw_step(rng, 4);
        REQUIRE(t >= 1);
        REQUIRE(t <= 4);
        ++counts[std::size_t(t)];
    }
    for (int t = 1; t <= 4; ++t) CHECK(counts[std::size_t(t)] > 800);
    Rng r1(9), r2(9);
    for (int i = 0; i < 50; ++i) CHECK(draw_step(r1, 16) == draw_step(r2, 16));
}

TEST_CASE("Adam step matches the closed-form update") {
    AdamParams p; // defaults 0.9 / 0.999 / 1e-8
    AdamOptimizer<double> opt(2, p);
    std::vector<double> theta = {1.0, -2.0};
    const std::vector<double> g = {0.5, -0.25};
    opt.step(theta, g, 0.01);
    // After one step: m = 0.1*g, v = 0.001*g^2, mhat = g, vhat = g^2
    // theta -= lr * g / (|g| + eps) => theta -= lr * sign(g) (approximately)
    const double d0 = 0.01 * 0.5 / (std::sqrt(0.25) + 1e-8);
    const double d1 = 0.01 * (-0.25) / (std::sqrt(0.0625) + 1e-8);
    CHECK(theta[0] == doctest::Approx(1.0 - d0).epsilon(1e-12));
    CHECK(theta[1] == doctest::Approx(-2.0 - d1).epsilon(1e-12));
    CHECK(opt.steps_taken() == 1);

    // Second step with a different gradient, tracked in full.
    const std::vector<double> g2 = {-0.1, 0.3};
    std::vector<double> m = {0.1 * 0.5, 0.1 * -0.25};
    std::vector<double> v = {0.001 * 0.25, 0.001 * 0.0625};
    std::vector<double> want = theta;
    for (int i = 0; i < 2; ++i) {
        m[std::size_t(i)] = 0.9 * m[std::size_t(i)] + 0.1 * g2[std::size_t(i)];
        v[std::size_t(i)] = 0.999 * v[std::size_t(i)] + 0.001 * g2[std::size_t(i)] * g2[std::size_t(i)];
        const double mh = m[std::size_t(i)] / (1.0 - std::pow(0.9, 2));
        const double vh = v[std::size_t(i)] / (1.0 - std::pow(0.999, 2));
        want[std::size_t(i)] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
    opt.step(theta, g2, 0.01);
    CHECK(theta[0] == doctest::Approx(want[0]).epsilon(1e-12));
    CHECK(theta[1] == doctest::Approx(want[1]).epsilon(1e-12));
}

TEST_CASE("train_step is deterministic and independent of the job count") {
    const std::vector<SliceRecord> recs = generate_phantoms(4, 16, 2);
    std::vector<ComplexImage> cleans;
    std::vector<std::string> ids;
    const std::vector<BatchItem> batch = make_batch(recs, cleans, ids);

    TrainState<float> a(tiny_config(), MaskSpec{}, tiny_arch());
    TrainState<float> b(tiny_config(), MaskSpec{}, tiny_arch());
    CHECK(a.net.params() == b.net.params()); // same seed, same init

    for (int it = 0; it < 3; ++it) {
        const double la = train_step(a, batch, 1);
        const double lb = train_step(b, batch, 3);
        CHECK(la == lb);
    }
    CHECK(a.net.params() == b.net.params());
    CHECK(a.opt.m() == b.opt.m());
    CHECK(a.opt.v() == b.opt.v());
}

TEST_CASE("different training seeds produce different trajectories") {
    const std::vector<SliceRecord> recs = generate_phantoms(2, 16, 2);
    std::vector<ComplexImage> cleans;
    std::vector<std::string> ids;
    const std::vector<BatchItem> batch = make_batch(recs, cleans, ids);
    TrainConfig c1 = tiny_config(), c2 = tiny_config();
    c2.seed = 6;
    TrainState<float> a(c1, MaskSpec{}, tiny_arch());
    TrainState<float> b(c2, MaskSpec{}, tiny_arch());
    train_step(a, batch);
    train_step(b, batch);
    CHECK(a.net.params() != b.net.params());
}

TEST_CASE("loss decreases over a short run on a small dataset") {
    const std::vector<SliceRecord> recs = generate_phantoms(2, 32, 8);
    TrainConfig cfg = tiny_config();
    cfg.total_steps = 4;
    cfg.batch_size = 2;
    cfg.learning_rate = 2e-3;
    cfg.iterations = 150;
    cfg.checkpoint_interval = 1000;
    UNetConfig arch;
    arch.depth = 2;
    arch.base_channels = 6;
    arch.time_dim = 8;
    TrainState<float> st(cfg, MaskSpec{}, arch);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "kcd_train_decrease";
    fs::remove_all(dir);
    const TrainLoopResult res = train_loop(st, recs, dir.string(), 1);
    CHECK(res.iterations_run == 150);
    CHECK(res.final_loss_mean < 0.6 * res.initial_loss_mean);
    CHECK(fs::exists(dir / "model.kcdm"));
    CHECK(fs::exists(dir / "train_state.kcdt"));
    CHECK(fs::exists(dir / "loss.csv"));
    fs::remove_all(dir);
}

TEST_CASE("saving and loading the train state resumes bitwise") {
    const std::vector<SliceRecord> recs = generate_phantoms(3, 16, 4);
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "kcd_train_resume";
    fs::remove_all(dir);

    TrainConfig cfg = tiny_config();
    cfg.iterations = 6;
    TrainState<float> st(cfg, MaskSpec{}, tiny_arch());
    train_loop(st, recs, dir.string(), 1);

    // Continue the original in memory for 4 more iterations.
    TrainState<float> mem = load_train_state<float>((dir / "train_state.kcdt").string());
    CHECK(mem.iteration == 6);
    CHECK(mem.net.params() == st.net.params());
    CHECK(mem.opt.m() == st.opt.m());
    CHECK(mem.opt.steps_taken() == st.opt.steps_taken());
    CHECK(mem.config.seed == cfg.seed);

    st.config.iterations = 10;
    mem.config.iterations = 10;
    const fs::path d1 = dir / "cont1", d2 = dir / "cont2";
    train_loop(st, recs, d1.string(), 1);
    train_loop(mem, recs, d2.string(), 1);
    CHECK(st.net.params() == mem.net.params());
    CHECK(st.opt.v() == mem.opt.v());

    fs::remove_all(dir);
}

TEST_CASE("train state round trip rejects precision mismatch and corruption") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "kcd_state_guard";
    fs::create_directories(dir);
    TrainConfig cfg = tiny_config();
    TrainState<float> st(cfg, MaskSpec{}, tiny_arch());
    const std::string path = (dir / "s.kcdt").string();
    save_train_state(st, path);
    CHECK_THROWS_AS(load_train_state<double>(path), IoError);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        char c;
        f.seekg(40);
        f.get(c);
        f.seekp(40);
        f.put(char(c ^ 0x11));
    }
    CHECK_THROWS_AS(load_train_state<float>(path), IoError);
    fs::remove_all(dir);
}

TEST_CASE("loss.csv rows accumulate across resumed runs") {
    const std::vector<SliceRecord> recs = generate_phantoms(2, 16, 4);
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "kcd_losscsv";
    fs::remove_all(dir);
    TrainConfig cfg = tiny_config();
    cfg.iterations = 3;
    TrainState<float> st(cfg, MaskSpec{}, tiny_arch());
    train_loop(st, recs, dir.string(), 1);
    st.config.iterations = 5;
    train_loop(st, recs, dir.string(), 1);
    std::ifstream f(dir / "loss.csv");
    std::string line;
    int lines = 0;
    std::getline(f, line);
    CHECK(line == "iteration,loss,wall_time_s");
    while (std::getline(f, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 5);
    fs::remove_all(dir);
}

TEST_CASE("non-finite inputs raise NumericError with the iteration in the message") {
    const std::vector<SliceRecord> recs = generate_phantoms(1, 16, 4);
    std::vector<ComplexImage> cleans;
    std::vector<std::string> ids;
    std::vector<BatchItem> batch = make_batch(recs, cleans, ids);
    cleans[0].at(3, 3) = Complex(std::numeric_limits<double>::quiet_NaN(), 0.0);
    TrainState<float> st(tiny_config(), MaskSpec{}, tiny_arch());
    CHECK_THROWS_WITH_AS(train_step(st, batch), doctest::Contains("iteration 1"), NumericError);
    // The same failure must propagate (not terminate) out of the threaded path.
    TrainState<float> st2(tiny_config(), MaskSpec{}, tiny_arch());
    CHECK_THROWS_AS(train_step(st2, batch, 3), NumericError);
}

TEST_CASE("config validation") {
    TrainConfig cfg = tiny_config();
    cfg.batch_size = 0;
    CHECK_THROWS_AS(validate(cfg), ValidationError);
    cfg = tiny_config();
    cfg.learning_rate = -1.0;
    CHECK_THROWS_AS(validate(cfg), ValidationError);
    cfg = tiny_config();
    cfg.loss = "l2";
    CHECK_THROWS_AS(validate(cfg), ValidationError);
    cfg = tiny_config();
    cfg.precision = "bfloat16";
    CHECK_THROWS_AS(validate(cfg), ValidationError);
    cfg = tiny_config();
    cfg.total_steps = 0;
    CHECK_THROWS_AS(validate(cfg), ValidationError);
}

TEST_CASE("float64 training path runs and stays finite") {
    const std::vector<SliceRecord> recs = generate_phantoms(2, 16, 5);
    std::vector<ComplexImage> cleans;
    std::vector<std::string> ids;
    const std::vector<BatchItem> batch = make_batch(recs, cleans, ids);
    TrainConfig cfg = tiny_config();
    cfg.precision = "float64";
    TrainState<double> st(cfg, MaskSpec{}, tiny_arch());
    const double l1 = train_step(st, batch, 2);
    CHECK(std::isfinite(l1));
    for (double v : st.net.params()) REQUIRE(std::isfinite(v));
}

} // TEST_SUITE
