// Experiment harness: per-volume masking, canonical ordering, volume-first
// aggregation, report serialization, zero-shot sweeps, and the step-count
// ablation driver.

#include <doctest/doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcd/fourier.hpp"
#include "kcd/harness.hpp"
#include "kcd/model.hpp"
#include "kcd/unet.hpp"

namespace fs = std::filesystem;
using namespace kcd;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("kcd_harness_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

/// Record whose target is exactly the magnitude of the image the stored
/// k-space inverts to, so an oracle model can reach zero error bitwise.
SliceRecord make_record(int size, std::uint64_t seed, const std::string& vol, int slice,
                        ComplexImage* clean_out = nullptr) {
    const std::vector<SliceRecord> base = generate_phantoms(1, size, seed);
    SliceRecord rec;
    rec.kspace = base[0].kspace;
    const ComplexImage clean = inverse_transform(rec.kspace);
    rec.target = magnitude(clean);
    rec.volume_id = vol;
    rec.slice_index = slice;
    rec.contrast = Contrast::Synthetic;
    if (clean_out) *clean_out = clean;
    return rec;
}

class HarnessShrink : public RestorationModel {
public:
    ComplexImage apply(const ComplexImage& x_t, int t, int total_steps) const override {
        check_apply_args(x_t, t, total_steps);
        ComplexImage y = x_t;
        for (auto& v : y.data) v *= 0.9;
        return y;
    }
    std::string kind() const override { return "shrink"; }
};

ExperimentConfig quick_config() {
    ExperimentConfig cfg;
    cfg.mask = MaskSpec{MaskFamily::CartesianRandom, 4.0, 0.12};
    cfg.sampler = SamplerKind::OneShot;
    cfg.total_steps = 4;
    cfg.seed = 11;
    cfg.panel_limit = 0;
    return cfg;
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("seed derivation is deterministic and separates volumes and slices") {
    CHECK(volume_mask_seed(5, "a") == volume_mask_seed(5, "a"));
    CHECK(volume_mask_seed(5, "a") != volume_mask_seed(5, "b"));
    CHECK(volume_mask_seed(5, "a") != volume_mask_seed(6, "a"));
    const std::uint64_t v = volume_mask_seed(5, "a");
    CHECK(slice_seed(v, 0) != slice_seed(v, 1));
    CHECK(slice_seed(v, 1) != slice_seed(v, 2));
    CHECK(slice_seed(v, 0) == slice_seed(v, 0));
}

TEST_CASE("an exact model scores infinite PSNR, serialized as 'inf'") {
    const fs::path dir = fresh_dir("oracle");
    ComplexImage clean;
    const std::vector<SliceRecord> data = {make_record(32, 3, "v0", 0, &clean)};
    const OracleRestorer model(clean);
    ExperimentConfig cfg = quick_config();

    const MetricReport rep = run_experiment(data, model, cfg, dir.string());
    CHECK(std::isinf(rep.psnr_db_mean));
    CHECK(rep.psnr_db_mean > 0);
    CHECK(rep.ssim_mean == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(rep.slices.size() == 1);
    CHECK(std::isinf(rep.slices[0].psnr_db));

    const std::string csv = slurp(dir / "eval.csv");
    CHECK(csv.find(",inf,") != std::string::npos);
    const nlohmann::json j = nlohmann::json::parse(slurp(dir / "eval.json"));
    CHECK(j.at("psnr_db_mean").get<std::string>() == "inf");
    CHECK(j.at("slices").at(0).at("psnr_db").get<std::string>() == "inf");
    fs::remove_all(dir);
}

TEST_CASE("slices of a volume share one mask; volumes get their own") {
    // Same k-space content everywhere; only volume identity differs.
    ComplexImage clean;
    const SliceRecord proto = make_record(32, 9, "a", 0, &clean);
    SliceRecord a0 = proto, a1 = proto, b0 = proto;
    a1.slice_index = 1;
    b0.volume_id = "b";

    const HarnessShrink model;
    const MetricReport rep =
        run_experiment({a0, a1, b0}, model, quick_config());
    REQUIRE(rep.slices.size() == 3);
    // One-shot ignores trajectory seeds, so identical content + identical
    // mask must give bit-identical scores within the volume...
    CHECK(rep.slices[0].psnr_db == rep.slices[1].psnr_db);
    CHECK(rep.slices[0].ssim == rep.slices[1].ssim);
    // ...while the other volume's independently drawn mask changes them.
    CHECK(rep.slices[2].psnr_db != rep.slices[0].psnr_db);
}

TEST_CASE("records are reported in canonical volume/slice order") {
    SliceRecord a0 = make_record(24, 1, "a", 0);
    SliceRecord a1 = make_record(24, 2, "a", 1);
    SliceRecord b0 = make_record(24, 3, "b", 0);
    const HarnessShrink model;
    const MetricReport rep = run_experiment({b0, a1, a0}, model, quick_config());
    REQUIRE(rep.slices.size() == 3);
    CHECK(rep.slices[0].volume_id == "a");
    CHECK(rep.slices[0].slice_index == 0);
    CHECK(rep.slices[1].volume_id == "a");
    CHECK(rep.slices[1].slice_index == 1);
    CHECK(rep.slices[2].volume_id == "b");
    REQUIRE(rep.volumes.size() == 2);
    CHECK(rep.volumes[0].volume_id == "a");
    CHECK(rep.volumes[0].slices == 2);
    CHECK(rep.volumes[1].slices == 1);
}

TEST_CASE("summary means weight volumes, not slices") {
    // Volume a holds two slices, volume b one; contents all differ.
    std::vector<SliceRecord> data = {make_record(24, 10, "a", 0), make_record(24, 11, "a", 1),
                                     make_record(24, 12, "b", 0)};
    const HarnessShrink model;
    const MetricReport rep = run_experiment(data, model, quick_config());
    REQUIRE(rep.slices.size() == 3);
    const double pa = (rep.slices[0].psnr_db + rep.slices[1].psnr_db) / 2.0;
    const double pb = rep.slices[2].psnr_db;
    CHECK(rep.psnr_db_mean == doctest::Approx((pa + pb) / 2.0).epsilon(1e-12));
    const double slice_mean =
        (rep.slices[0].psnr_db + rep.slices[1].psnr_db + rep.slices[2].psnr_db) / 3.0;
    CHECK(std::abs(rep.psnr_db_mean - slice_mean) > 1e-9); // generically distinct
    REQUIRE(rep.volumes.size() == 2);
    CHECK(rep.volumes[0].psnr_db == doctest::Approx(pa).epsilon(1e-12));
    CHECK(rep.volumes[1].psnr_db == doctest::Approx(pb).epsilon(1e-12));
}

TEST_CASE("evaluation outputs are byte-identical across worker counts") {
    const fs::path d1 = fresh_dir("jobs1");
    const fs::path d3 = fresh_dir("jobs3");
    std::vector<SliceRecord> data = {make_record(24, 20, "a", 0), make_record(24, 21, "a", 1),
                                     make_record(24, 22, "b", 0), make_record(24, 23, "b", 1)};
    const HarnessShrink model;
    ExperimentConfig cfg = quick_config();
    cfg.sampler = SamplerKind::Cold;
    cfg.total_steps = 3;
    cfg.panel_limit = 1;

    cfg.jobs = 1;
    run_experiment(data, model, cfg, d1.string());
    cfg.jobs = 3;
    run_experiment(data, model, cfg, d3.string());

    CHECK(slurp(d1 / "eval.csv") == slurp(d3 / "eval.csv"));
    CHECK(slurp(d1 / "eval.json") == slurp(d3 / "eval.json"));
    CHECK(slurp(d1 / "a_s0_recon.png") == slurp(d3 / "a_s0_recon.png"));
    fs::remove_all(d1);
    fs::remove_all(d3);
}

TEST_CASE("csv layout: exact header, one row per slice, one-shot reports T=1") {
    const fs::path dir = fresh_dir("csv");
    std::vector<SliceRecord> data = {make_record(24, 30, "a", 0), make_record(24, 31, "b", 0)};
    const HarnessShrink model;
    ExperimentConfig cfg = quick_config();
    cfg.total_steps = 16; // ignored by one-shot in the T column
    run_experiment(data, model, cfg, dir.string());

    const std::string csv = slurp(dir / "eval.csv");
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const std::size_t nl = csv.find('\n', pos);
        lines.push_back(csv.substr(pos, nl - pos));
        pos = nl + 1;
    }
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "volume_id,slice,mask_family,R,T,sampler,n_samples,psnr_db,ssim");

    std::vector<std::string> fields;
    pos = 0;
    std::string row = lines[1] + ',';
    while ((pos = row.find(',')) != std::string::npos) {
        fields.push_back(row.substr(0, pos));
        row.erase(0, pos + 1);
    }
    REQUIRE(fields.size() == 9);
    CHECK(fields[0] == "a");
    CHECK(fields[1] == "0");
    CHECK(fields[2] == "cartesian-random");
    CHECK(fields[3] == "4");
    CHECK(fields[4] == "1");
    CHECK(fields[5] == "one-shot");
    CHECK(fields[6] == "1");
    CHECK(std::stod(fields[7]) > 0.0);
    fs::remove_all(dir);
}

TEST_CASE("json report mirrors the configuration and per-volume data ranges") {
    const fs::path dir = fresh_dir("json");
    std::vector<SliceRecord> data = {make_record(24, 40, "a", 0), make_record(24, 41, "b", 0)};
    const HarnessShrink model;
    ExperimentConfig cfg = quick_config();
    cfg.sampler = SamplerKind::Cold;
    cfg.total_steps = 2;
    cfg.n_samples = 2;
    const MetricReport rep = run_experiment(data, model, cfg, dir.string());

    const nlohmann::json j = nlohmann::json::parse(slurp(dir / "eval.json"));
    CHECK(j.at("mask").at("family").get<std::string>() == "cartesian-random");
    CHECK(j.at("mask").at("acceleration").get<double>() == 4.0);
    CHECK(j.at("sampler").get<std::string>() == "cold");
    CHECK(j.at("total_steps").get<int>() == 2);
    CHECK(j.at("n_samples").get<int>() == 2);
    CHECK(j.at("seed").get<std::uint64_t>() == 11);
    REQUIRE(j.at("volumes").size() == 2);
    REQUIRE(j.at("slices").size() == 2);
    const double dr = j.at("volumes").at(0).at("data_range").get<double>();
    CHECK(dr == doctest::Approx(max_abs(data[0].target)).epsilon(1e-12));
    CHECK(j.at("psnr_db_mean").get<double>() ==
          doctest::Approx(rep.psnr_db_mean).epsilon(1e-12));
    fs::remove_all(dir);
}

TEST_CASE("panels are written for the first panel_limit slices only") {
    const fs::path dir = fresh_dir("panels");
    std::vector<SliceRecord> data = {make_record(24, 50, "v", 0), make_record(24, 51, "v", 1),
                                     make_record(24, 52, "v", 2)};
    const HarnessShrink model;
    ExperimentConfig cfg = quick_config();
    cfg.sampler = SamplerKind::Cold;
    cfg.total_steps = 2;
    cfg.n_samples = 2;
    cfg.panel_limit = 2;
    run_experiment(data, model, cfg, dir.string());

    for (const char* piece : {"target", "zero_filled", "recon", "error", "uncertainty"}) {
        CHECK(fs::exists(dir / ("v_s0_" + std::string(piece) + ".png")));
        CHECK(fs::exists(dir / ("v_s1_" + std::string(piece) + ".png")));
        CHECK_FALSE(fs::exists(dir / ("v_s2_" + std::string(piece) + ".png")));
    }

    // Single-sample runs produce no uncertainty panel.
    const fs::path dir1 = fresh_dir("panels1");
    cfg.n_samples = 1;
    cfg.panel_limit = 1;
    run_experiment(data, model, cfg, dir1.string());
    CHECK(fs::exists(dir1 / "v_s0_recon.png"));
    CHECK_FALSE(fs::exists(dir1 / "v_s0_uncertainty.png"));
    fs::remove_all(dir);
    fs::remove_all(dir1);
}

TEST_CASE("run_experiment validation") {
    const HarnessShrink model;
    const ExperimentConfig cfg = quick_config();
    CHECK_THROWS_AS(run_experiment({}, model, cfg), ValidationError);

    std::vector<SliceRecord> data = {make_record(24, 60, "a", 0)};
    ExperimentConfig bad = cfg;
    bad.n_samples = 0;
    CHECK_THROWS_AS(run_experiment(data, model, bad), ValidationError);
    bad = cfg;
    bad.total_steps = 0;
    CHECK_THROWS_AS(run_experiment(data, model, bad), ValidationError);

    // Mixed shapes within one volume are rejected.
    std::vector<SliceRecord> mixed = {make_record(24, 61, "a", 0), make_record(32, 62, "a", 1)};
    CHECK_THROWS_AS(run_experiment(mixed, model, cfg), ValidationError);

    // All-zero targets leave no usable data range.
    std::vector<SliceRecord> zero = {make_record(24, 63, "a", 0)};
    for (double& v : zero[0].target.data) v = 0.0;
    CHECK_THROWS_AS(run_experiment(zero, model, cfg), ValidationError);
}

TEST_CASE("zero-shot sweep evaluates each mask spec into its own directory") {
    const fs::path dir = fresh_dir("zeroshot");
    ComplexImage clean;
    const std::vector<SliceRecord> data = {make_record(32, 70, "v", 0, &clean)};
    const OracleRestorer model(clean);
    const std::vector<MaskSpec> masks = {
        MaskSpec{MaskFamily::CartesianRandom, 4.0, 0.12},
        MaskSpec{MaskFamily::Gaussian1D, 4.0, 0.12},
    };
    const std::vector<ZeroShotEntry> entries =
        zero_shot(data, model, masks, quick_config(), dir.string());
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].mask.family == MaskFamily::CartesianRandom);
    CHECK(entries[1].mask.family == MaskFamily::Gaussian1D);
    CHECK(std::isinf(entries[0].report.psnr_db_mean));
    CHECK(fs::exists(dir / "cartesian-random_R4" / "eval.csv"));
    CHECK(fs::exists(dir / "gaussian-1d_R4" / "eval.csv"));

    const std::string csv = slurp(dir / "zero_shot.csv");
    CHECK(csv.rfind("mask_family,R,center_fraction,psnr_db_mean,ssim_mean\n", 0) == 0);
    CHECK(csv.find("cartesian-random,4,0.12,inf,") != std::string::npos);
    CHECK(csv.find("gaussian-1d,4,") != std::string::npos);

    CHECK_THROWS_AS(zero_shot(data, model, {}, quick_config(), ""), ValidationError);
    fs::remove_all(dir);
}

TEST_CASE("timestep ablation trains per entry and writes the summary table") {
    const fs::path dir = fresh_dir("ablate");
    const std::vector<SliceRecord> train_data = generate_phantoms(2, 16, 80);
    std::vector<SliceRecord> eval_data = {make_record(16, 81, "ev", 0)};

    TrainConfig base;
    base.total_steps = 8; // overridden per entry
    base.batch_size = 2;
    base.learning_rate = 1e-3;
    base.iterations = 4;
    base.seed = 2;
    base.checkpoint_interval = 100;
    const MaskSpec mask{MaskFamily::CartesianRandom, 2.0, 0.2};
    UNetConfig arch;
    arch.depth = 1;
    arch.base_channels = 4;
    arch.time_dim = 4;
    ExperimentConfig ecfg = quick_config();
    ecfg.sampler = SamplerKind::Cold;

    const std::vector<AblationEntry> entries = ablate_timesteps(
        train_data, eval_data, {2, 4}, base, mask, arch, ecfg, dir.string());
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].total_steps == 2);
    CHECK(entries[1].total_steps == 4);
    for (const AblationEntry& e : entries) {
        CHECK(e.train.iterations_run == 4);
        CHECK(std::isfinite(e.train.final_loss_mean));
        CHECK(std::isfinite(e.report.psnr_db_mean));
        CHECK(e.report.config.total_steps == e.total_steps);
    }
    CHECK(fs::exists(dir / "T2" / "model.kcdm"));
    CHECK(fs::exists(dir / "T2" / "loss.csv"));
    CHECK(fs::exists(dir / "T2" / "eval" / "eval.csv"));
    CHECK(fs::exists(dir / "T4" / "eval" / "eval.json"));

    const std::string csv = slurp(dir / "ablation.csv");
    CHECK(csv.rfind("T,train_initial_loss,train_final_loss,psnr_db_mean,ssim_mean\n", 0) == 0);
    CHECK(csv.find("\n2,") != std::string::npos);
    CHECK(csv.find("\n4,") != std::string::npos);

    CHECK_THROWS_AS(
        ablate_timesteps(train_data, eval_data, {}, base, mask, arch, ecfg, dir.string()),
        ValidationError);
    CHECK_THROWS_AS(
        ablate_timesteps(train_data, eval_data, {0}, base, mask, arch, ecfg, dir.string()),
        ValidationError);
    fs::remove_all(dir);
}

} // TEST_SUITE("harness")
