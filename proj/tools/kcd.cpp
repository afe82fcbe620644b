// Command-line frontend for the k-space cold diffusion library.
//
// Subcommands: phantom, make-mask, degrade-strip, train, reconstruct,
// evaluate, zero-shot, ablate-T, multi-sample. Every run that produces
// files also writes run_manifest.json with the effective configuration.
// Exit codes: 0 success, 2 usage/validation errors, 1 runtime failures.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI/CLI.hpp>
#include <nlohmann/json.hpp>

#include "kcd/binio.hpp"
#include "kcd/checkpoint.hpp"
#include "kcd/data.hpp"
#include "kcd/degrade.hpp"
#include "kcd/error.hpp"
#include "kcd/fourier.hpp"
#include "kcd/harness.hpp"
#include "kcd/mask.hpp"
#include "kcd/metrics.hpp"
#include "kcd/nn.hpp"
#include "kcd/sampler.hpp"
#include "kcd/train.hpp"
#include "kcd/unet.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string resolve_data_path(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("KCD_DATA_DIR"); env && *env) return env;
    throw kcd::ValidationError("no input data: pass --data or set KCD_DATA_DIR");
}

void write_run_manifest(const std::string& out_dir, const ordered_json& j) {
    fs::create_directories(out_dir);
    const std::string text = j.dump(2) + "\n";
    kcd::write_file_bytes(out_dir + "/run_manifest.json", text.data(), text.size());
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t next = text.find(',', pos);
        if (next == std::string::npos) next = text.size();
        const std::string tok = text.substr(pos, next - pos);
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw kcd::ValidationError(std::string(what) + ": bad integer '" + tok + "'");
        }
        pos = next + 1;
    }
    if (out.empty()) throw kcd::ValidationError(std::string(what) + ": empty list");
    return out;
}

std::vector<std::string> parse_str_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t next = text.find(',', pos);
        if (next == std::string::npos) next = text.size();
        if (next > pos) out.push_back(text.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

// The fully sampled center shrinks proportionally with acceleration:
// 0.08 at 4x, 0.04 at 8x.
double default_center_fraction(double accel) { return 0.32 / accel; }

// ---------------------------------------------------------------------------
// Shared evaluation plumbing (reconstruct / evaluate / multi-sample).

struct EvalArgs {
    std::string data, checkpoint, out, volumes;
    std::string mask = "cartesian-random";
    double accel = 4.0;
    double center_frac = -1.0; // <0 => default_center_fraction(accel)
    int total_steps = 125;
    std::string sampler = "cold";
    int n_samples = 1;
    std::uint64_t seed = 0;
    int jobs = 1;
    int panels = 4;
    bool independent_subsets = false;
    bool data_consistency = false;
};

void add_eval_flags(CLI::App* cmd, EvalArgs& a, int default_panels) {
    a.panels = default_panels;
    cmd->add_option("--data", a.data, "dataset (.kcds, manifest .json, or HDF5 directory); "
                                      "falls back to $KCD_DATA_DIR");
    cmd->add_option("--checkpoint", a.checkpoint, "trained model checkpoint")->required();
    cmd->add_option("--out", a.out, "output directory")->required();
    cmd->add_option("--volumes", a.volumes, "comma-separated volume ids to keep");
    cmd->add_option("--mask", a.mask,
                    "mask family: cartesian-random, cartesian-equispaced, gaussian-1d, "
                    "gaussian-2d");
    cmd->add_option("--accel", a.accel, "acceleration factor R");
    cmd->add_option("--center-frac", a.center_frac,
                    "fully sampled center fraction (default 0.32/R)");
    cmd->add_option("--T", a.total_steps, "number of diffusion steps");
    cmd->add_option("--sampler", a.sampler, "one-shot, naive, or cold");
    cmd->add_option("--n-samples", a.n_samples, "trajectories to average");
    cmd->add_option("--seed", a.seed, "master seed");
    cmd->add_option("--jobs", a.jobs, "worker threads over slices");
    cmd->add_option("--panels", a.panels, "slices that get PNG panels");
    cmd->add_flag("--independent-subsets", a.independent_subsets,
                  "re-draw schedule subsets per step instead of nesting them");
    cmd->add_flag("--data-consistency", a.data_consistency,
                  "re-impose measured frequencies on the final estimate");
}

kcd::ExperimentConfig eval_config(const EvalArgs& a) {
    kcd::ExperimentConfig cfg;
    cfg.mask.family = kcd::parse_family(a.mask);
    cfg.mask.acceleration = a.accel;
    cfg.mask.center_fraction =
        a.center_frac < 0 ? default_center_fraction(a.accel) : a.center_frac;
    cfg.sampler = kcd::parse_sampler(a.sampler);
    cfg.total_steps = a.total_steps;
    cfg.n_samples = a.n_samples;
    cfg.seed = a.seed;
    cfg.jobs = a.jobs;
    cfg.independent_subsets = a.independent_subsets;
    cfg.data_consistency = a.data_consistency;
    cfg.panel_limit = a.panels;
    return cfg;
}

ordered_json eval_manifest(const char* command, const EvalArgs& a,
                           const kcd::ExperimentConfig& cfg, const std::string& data_path) {
    ordered_json j;
    j["command"] = command;
    j["data"] = data_path;
    j["checkpoint"] = a.checkpoint;
    j["mask"] = {{"family", kcd::family_name(cfg.mask.family)},
                 {"acceleration", cfg.mask.acceleration},
                 {"center_fraction", cfg.mask.center_fraction}};
    j["sampler"] = kcd::sampler_name(cfg.sampler);
    j["total_steps"] = cfg.total_steps;
    j["n_samples"] = cfg.n_samples;
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    j["panels"] = cfg.panel_limit;
    j["independent_subsets"] = cfg.independent_subsets;
    j["data_consistency"] = cfg.data_consistency;
    if (!a.volumes.empty()) j["volumes"] = a.volumes;
    return j;
}

void run_eval_command(const char* command, const EvalArgs& a) {
    const std::string data_path = resolve_data_path(a.data);
    const std::vector<kcd::SliceRecord> records =
        kcd::load_dataset(data_path, parse_str_list(a.volumes));
    const std::unique_ptr<kcd::RestorationModel> model =
        kcd::load_restoration_model(a.checkpoint);
    const kcd::ExperimentConfig cfg = eval_config(a);
    write_run_manifest(a.out, eval_manifest(command, a, cfg, data_path));
    const kcd::MetricReport report = kcd::run_experiment(records, *model, cfg, a.out);
    std::printf("%s: volumes=%zu slices=%zu psnr_db_mean=%.4f ssim_mean=%.4f\n", command,
                report.volumes.size(), report.slices.size(), report.psnr_db_mean,
                report.ssim_mean);
    std::printf("wrote %s/eval.csv and eval.json\n", a.out.c_str());
}

// ---------------------------------------------------------------------------
// train / ablate-T configuration layering: defaults < --config JSON < flags.

struct TrainArgs {
    std::string data, out, config_path, resume;
    kcd::TrainConfig cfg;       // desk-scale defaults
    kcd::UNetConfig arch;       // depth 3, base 16, time 32
    std::string mask = "cartesian-random";
    double accel = 4.0;
    double center_frac = -1.0;
    int jobs = 1;
};

void add_train_flags(CLI::App* cmd, TrainArgs& a, bool with_resume) {
    cmd->add_option("--data", a.data, "training dataset; falls back to $KCD_DATA_DIR");
    cmd->add_option("--out", a.out, "output directory")->required();
    cmd->add_option("--config", a.config_path, "JSON config file (flags override it)");
    cmd->add_option("--T", a.cfg.total_steps, "diffusion steps");
    cmd->add_option("--batch", a.cfg.batch_size, "batch size");
    cmd->add_option("--lr", a.cfg.learning_rate, "Adam learning rate");
    cmd->add_option("--iters", a.cfg.iterations, "total optimization iterations");
    cmd->add_option("--seed", a.cfg.seed, "training seed");
    cmd->add_option("--checkpoint-every", a.cfg.checkpoint_interval, "checkpoint interval");
    cmd->add_option("--precision", a.cfg.precision, "float32 or float64");
    cmd->add_option("--mask", a.mask, "training mask family");
    cmd->add_option("--accel", a.accel, "acceleration factor R");
    cmd->add_option("--center-frac", a.center_frac, "center fraction (default 0.32/R)");
    cmd->add_option("--depth", a.arch.depth, "U-Net depth");
    cmd->add_option("--base-channels", a.arch.base_channels, "channels at the top level");
    cmd->add_option("--time-dim", a.arch.time_dim, "step embedding size");
    cmd->add_option("--jobs", a.jobs, "worker threads within a batch");
    if (with_resume)
        cmd->add_option("--resume", a.resume, "train_state.kcdt to continue from");
}

// Applies the JSON config for any key the user did not set via a flag.
void layer_config_file(const CLI::App* cmd, TrainArgs& a) {
    if (a.config_path.empty()) return;
    const std::vector<std::uint8_t> raw = kcd::read_file_bytes(a.config_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::exception& e) {
        throw kcd::ValidationError("config: invalid JSON in " + a.config_path + ": " + e.what());
    }
    const auto flag_given = [&](const char* name) { return cmd->count(name) > 0; };
    const auto set_if = [&](const char* flag, auto& target, const nlohmann::json& src,
                            const char* key) {
        if (!flag_given(flag) && src.contains(key))
            target = src.at(key).get<std::decay_t<decltype(target)>>();
    };
    set_if("--T", a.cfg.total_steps, j, "total_steps");
    set_if("--batch", a.cfg.batch_size, j, "batch_size");
    set_if("--lr", a.cfg.learning_rate, j, "learning_rate");
    set_if("--iters", a.cfg.iterations, j, "iterations");
    set_if("--seed", a.cfg.seed, j, "seed");
    set_if("--checkpoint-every", a.cfg.checkpoint_interval, j, "checkpoint_interval");
    set_if("--precision", a.cfg.precision, j, "precision");
    if (j.contains("loss")) a.cfg.loss = j.at("loss").get<std::string>();
    if (j.contains("adam")) {
        const auto& ad = j.at("adam");
        if (ad.contains("beta1")) a.cfg.adam.beta1 = ad.at("beta1").get<double>();
        if (ad.contains("beta2")) a.cfg.adam.beta2 = ad.at("beta2").get<double>();
        if (ad.contains("eps")) a.cfg.adam.eps = ad.at("eps").get<double>();
    }
    if (j.contains("network")) {
        const auto& net = j.at("network");
        set_if("--depth", a.arch.depth, net, "depth");
        set_if("--base-channels", a.arch.base_channels, net, "base_channels");
        set_if("--time-dim", a.arch.time_dim, net, "time_dim");
    }
    if (j.contains("mask")) {
        const auto& m = j.at("mask");
        set_if("--mask", a.mask, m, "family");
        set_if("--accel", a.accel, m, "acceleration");
        set_if("--center-frac", a.center_frac, m, "center_fraction");
    }
}

kcd::MaskSpec train_mask_spec(const TrainArgs& a) {
    kcd::MaskSpec spec;
    spec.family = kcd::parse_family(a.mask);
    spec.acceleration = a.accel;
    spec.center_fraction =
        a.center_frac < 0 ? default_center_fraction(a.accel) : a.center_frac;
    return spec;
}

ordered_json train_manifest(const char* command, const TrainArgs& a, const kcd::MaskSpec& mask,
                            const std::string& data_path) {
    ordered_json j;
    j["command"] = command;
    j["data"] = data_path;
    if (!a.config_path.empty()) j["config_file"] = a.config_path;
    if (!a.resume.empty()) j["resume"] = a.resume;
    j["total_steps"] = a.cfg.total_steps;
    j["batch_size"] = a.cfg.batch_size;
    j["learning_rate"] = a.cfg.learning_rate;
    j["iterations"] = a.cfg.iterations;
    j["adam"] = {{"beta1", a.cfg.adam.beta1},
                 {"beta2", a.cfg.adam.beta2},
                 {"eps", a.cfg.adam.eps}};
    j["loss"] = a.cfg.loss;
    j["seed"] = a.cfg.seed;
    j["checkpoint_interval"] = a.cfg.checkpoint_interval;
    j["precision"] = a.cfg.precision;
    j["mask"] = {{"family", kcd::family_name(mask.family)},
                 {"acceleration", mask.acceleration},
                 {"center_fraction", mask.center_fraction}};
    j["network"] = {{"depth", a.arch.depth},
                    {"base_channels", a.arch.base_channels},
                    {"time_dim", a.arch.time_dim}};
    j["jobs"] = a.jobs;
    return j;
}

template <typename S>
void run_training(const TrainArgs& a, const kcd::MaskSpec& mask,
                  const std::vector<kcd::SliceRecord>& records, const CLI::App* cmd) {
    std::optional<kcd::TrainState<S>> state;
    if (!a.resume.empty()) {
        state.emplace(kcd::load_train_state<S>(a.resume));
        if (cmd->count("--iters") > 0) state->config.iterations = a.cfg.iterations;
        std::printf("resumed at iteration %lld\n", state->iteration);
    } else {
        state.emplace(a.cfg, mask, a.arch);
    }
    const long long report_every =
        std::max(1LL, (state->config.iterations - state->iteration) / 20);
    kcd::TrainLoopResult res = kcd::train_loop(
        *state, records, a.out, a.jobs, [&](long long iter, double loss) {
            if (iter % report_every == 0 || iter == state->config.iterations)
                std::printf("iter %lld loss %.6f\n", iter, loss);
        });
    std::printf("trained %lld iterations; loss first100=%.6f last100=%.6f\n",
                res.iterations_run, res.initial_loss_mean, res.final_loss_mean);
    std::printf("wrote %s/model.kcdm\n", a.out.c_str());
}

// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
    CLI::App app{"k-space cold diffusion reconstruction toolkit"};
    app.require_subcommand(1);

    // --- phantom ---------------------------------------------------------
    struct {
        int n = 64, size = 64;
        std::uint64_t seed = 0;
        bool complex64 = false;
        std::string out;
    } ph;
    CLI::App* phantom = app.add_subcommand("phantom", "generate a synthetic slice dataset");
    phantom->add_option("--n", ph.n, "number of slices");
    phantom->add_option("--size", ph.size, "square image extent");
    phantom->add_option("--seed", ph.seed, "generator seed");
    phantom->add_flag("--complex64", ph.complex64, "store complex64 instead of complex128");
    phantom->add_option("--out", ph.out, "output directory")->required();
    phantom->callback([&] {
        const std::vector<kcd::SliceRecord> records =
            kcd::generate_phantoms(ph.n, ph.size, ph.seed);
        fs::create_directories(ph.out);
        kcd::export_dataset(records, ph.out + "/phantoms.kcds", ph.complex64);
        kcd::write_manifest(records, "phantoms.kcds", ph.out + "/manifest.json");
        ordered_json j;
        j["command"] = "phantom";
        j["n"] = ph.n;
        j["size"] = ph.size;
        j["seed"] = ph.seed;
        j["dtype"] = ph.complex64 ? "complex64" : "complex128";
        write_run_manifest(ph.out, j);
        std::printf("wrote %d slices to %s/phantoms.kcds\n", ph.n, ph.out.c_str());
    });

    // --- make-mask -------------------------------------------------------
    struct {
        std::string family = "cartesian-random";
        int height = 320, width = 320;
        double accel = 4.0, center_frac = -1.0;
        std::uint64_t seed = 0;
        std::string out;
    } mk;
    CLI::App* makemask = app.add_subcommand("make-mask", "build an under-sampling mask");
    makemask->add_option("--mask", mk.family, "mask family");
    makemask->add_option("--height", mk.height, "rows");
    makemask->add_option("--width", mk.width, "columns");
    makemask->add_option("--accel", mk.accel, "acceleration factor R");
    makemask->add_option("--center-frac", mk.center_frac, "center fraction (default 0.32/R)");
    makemask->add_option("--seed", mk.seed, "mask seed");
    makemask->add_option("--out", mk.out, "output directory")->required();
    makemask->callback([&] {
        const double cf =
            mk.center_frac < 0 ? default_center_fraction(mk.accel) : mk.center_frac;
        const kcd::SamplingMask m = kcd::make_mask(kcd::parse_family(mk.family), mk.height,
                                                   mk.width, mk.accel, cf, mk.seed);
        fs::create_directories(mk.out);
        kcd::save_mask_png(m, mk.out + "/mask.png");
        kcd::save_mask_json(m, mk.out + "/mask.json");
        ordered_json j;
        j["command"] = "make-mask";
        j["family"] = mk.family;
        j["height"] = mk.height;
        j["width"] = mk.width;
        j["acceleration"] = mk.accel;
        j["center_fraction"] = cf;
        j["seed"] = mk.seed;
        j["kept_entries"] = kcd::count_ones(m);
        j["kept_columns"] = kcd::count_sampled_columns(m);
        write_run_manifest(mk.out, j);
        std::printf("mask %s R=%g cf=%g: %zu of %zu entries kept (%zu columns)\n",
                    mk.family.c_str(), mk.accel, cf, kcd::count_ones(m),
                    std::size_t(mk.height) * std::size_t(mk.width),
                    kcd::count_sampled_columns(m));
    });

    // --- degrade-strip ---------------------------------------------------
    struct {
        std::string data, volume, mask_file, out;
        int slice = 0;
        std::string family = "cartesian-random";
        double accel = 4.0, center_frac = -1.0;
        int total_steps = 16;
        std::string steps;
        std::uint64_t seed = 0;
    } dg;
    CLI::App* strip = app.add_subcommand("degrade-strip",
                                         "export the degradation sequence of one slice");
    strip->add_option("--data", dg.data, "dataset; falls back to $KCD_DATA_DIR");
    strip->add_option("--volume", dg.volume, "volume id (default: first)");
    strip->add_option("--slice", dg.slice, "slice index");
    strip->add_option("--mask", dg.family, "mask family");
    strip->add_option("--mask-file", dg.mask_file, "mask descriptor JSON (overrides --mask)");
    strip->add_option("--accel", dg.accel, "acceleration factor R");
    strip->add_option("--center-frac", dg.center_frac, "center fraction (default 0.32/R)");
    strip->add_option("--T", dg.total_steps, "diffusion steps");
    strip->add_option("--steps", dg.steps, "comma-separated steps (default 5 evenly spaced)");
    strip->add_option("--seed", dg.seed, "mask + schedule seed");
    strip->add_option("--out", dg.out, "output directory")->required();
    strip->callback([&] {
        const std::string data_path = resolve_data_path(dg.data);
        std::vector<std::string> vols;
        if (!dg.volume.empty()) vols.push_back(dg.volume);
        const std::vector<kcd::SliceRecord> records = kcd::load_dataset(data_path, vols);
        const kcd::SliceRecord* rec = nullptr;
        for (const kcd::SliceRecord& r : records)
            if (r.slice_index == dg.slice && (dg.volume.empty() || r.volume_id == dg.volume)) {
                rec = &r;
                break;
            }
        if (!rec) throw kcd::ValidationError("slice not found in dataset");

        kcd::SamplingMask mask;
        if (!dg.mask_file.empty()) {
            mask = kcd::load_mask_json(dg.mask_file);
            if (mask.height != rec->kspace.height || mask.width != rec->kspace.width)
                throw kcd::ValidationError("mask file shape does not match the slice");
        } else {
            const double cf =
                dg.center_frac < 0 ? default_center_fraction(dg.accel) : dg.center_frac;
            mask = kcd::make_mask(kcd::parse_family(dg.family), rec->kspace.height,
                                  rec->kspace.width, dg.accel, cf, dg.seed);
        }
        const kcd::MaskSchedule schedule =
            kcd::make_schedule(mask, dg.total_steps, kcd::splitmix64(dg.seed));

        std::vector<int> steps;
        if (dg.steps.empty()) {
            for (int i = 0; i <= 4; ++i) steps.push_back(dg.total_steps * i / 4);
        } else {
            steps = parse_int_list(dg.steps, "--steps");
        }
        const kcd::ComplexImage x0 = kcd::inverse_transform(rec->kspace);
        const std::vector<kcd::ComplexImage> strip_imgs =
            kcd::degradation_strip(x0, schedule, steps);
        fs::create_directories(dg.out);
        kcd::export_strip_png(strip_imgs, steps, dg.out + "/step_");
        ordered_json j;
        j["command"] = "degrade-strip";
        j["data"] = data_path;
        j["volume"] = rec->volume_id;
        j["slice"] = rec->slice_index;
        j["mask"] = {{"family", kcd::family_name(mask.family)},
                     {"acceleration", mask.acceleration},
                     {"center_fraction", mask.center_fraction},
                     {"seed", mask.seed}};
        j["total_steps"] = dg.total_steps;
        j["steps"] = steps;
        j["seed"] = dg.seed;
        write_run_manifest(dg.out, j);
        std::printf("wrote %zu degradation frames to %s\n", steps.size(), dg.out.c_str());
    });

    // --- train -----------------------------------------------------------
    TrainArgs tr;
    CLI::App* train = app.add_subcommand("train", "train a restoration network");
    add_train_flags(train, tr, true);
    train->callback([&] {
        layer_config_file(train, tr);
        const kcd::MaskSpec mask = train_mask_spec(tr);
        const std::string data_path = resolve_data_path(tr.data);
        const std::vector<kcd::SliceRecord> records = kcd::load_dataset(data_path);
        write_run_manifest(tr.out, train_manifest("train", tr, mask, data_path));
        kcd::validate(tr.cfg);
        if (tr.cfg.precision == "float64")
            run_training<double>(tr, mask, records, train);
        else
            run_training<float>(tr, mask, records, train);
    });

    // --- reconstruct / evaluate / multi-sample ----------------------------
    EvalArgs rc;
    CLI::App* recon = app.add_subcommand("reconstruct", "reconstruct slices and write panels");
    add_eval_flags(recon, rc, 8);
    recon->callback([&] { run_eval_command("reconstruct", rc); });

    EvalArgs ev;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score reconstructions (CSV + JSON)");
    add_eval_flags(evaluate, ev, 0);
    evaluate->callback([&] { run_eval_command("evaluate", ev); });

    EvalArgs ms;
    CLI::App* multi = app.add_subcommand("multi-sample",
                                         "average several trajectories and map uncertainty");
    add_eval_flags(multi, ms, 4);
    multi->callback([&] {
        if (ms.n_samples < 2)
            throw kcd::ValidationError("multi-sample: need --n-samples >= 2");
        run_eval_command("multi-sample", ms);
    });

    // --- zero-shot ---------------------------------------------------------
    struct {
        std::string data, checkpoint, out;
        std::string families = "cartesian-random,cartesian-equispaced,gaussian-1d,gaussian-2d";
        std::string accels = "4,8";
        double center_frac = -1.0;
        int total_steps = 125;
        std::string sampler = "cold";
        std::uint64_t seed = 0;
        int jobs = 1;
    } zs;
    CLI::App* zshot =
        app.add_subcommand("zero-shot", "evaluate one model across mask families");
    zshot->add_option("--data", zs.data, "dataset; falls back to $KCD_DATA_DIR");
    zshot->add_option("--checkpoint", zs.checkpoint, "trained model checkpoint")->required();
    zshot->add_option("--families", zs.families, "comma-separated mask families");
    zshot->add_option("--accels", zs.accels, "comma-separated accelerations");
    zshot->add_option("--center-frac", zs.center_frac,
                      "center fraction (default 0.32/R per acceleration)");
    zshot->add_option("--T", zs.total_steps, "diffusion steps");
    zshot->add_option("--sampler", zs.sampler, "one-shot, naive, or cold");
    zshot->add_option("--seed", zs.seed, "master seed");
    zshot->add_option("--jobs", zs.jobs, "worker threads over slices");
    zshot->add_option("--out", zs.out, "output directory")->required();
    zshot->callback([&] {
        const std::string data_path = resolve_data_path(zs.data);
        const std::vector<kcd::SliceRecord> records = kcd::load_dataset(data_path);
        const std::unique_ptr<kcd::RestorationModel> model =
            kcd::load_restoration_model(zs.checkpoint);
        std::vector<kcd::MaskSpec> specs;
        for (const std::string& fam : parse_str_list(zs.families))
            for (int r : parse_int_list(zs.accels, "--accels")) {
                kcd::MaskSpec s;
                s.family = kcd::parse_family(fam);
                s.acceleration = r;
                s.center_fraction =
                    zs.center_frac < 0 ? default_center_fraction(r) : zs.center_frac;
                specs.push_back(s);
            }
        kcd::ExperimentConfig base;
        base.sampler = kcd::parse_sampler(zs.sampler);
        base.total_steps = zs.total_steps;
        base.seed = zs.seed;
        base.jobs = zs.jobs;
        base.panel_limit = 0;
        ordered_json j;
        j["command"] = "zero-shot";
        j["data"] = data_path;
        j["checkpoint"] = zs.checkpoint;
        j["families"] = zs.families;
        j["accels"] = zs.accels;
        j["total_steps"] = zs.total_steps;
        j["sampler"] = zs.sampler;
        j["seed"] = zs.seed;
        write_run_manifest(zs.out, j);
        const auto entries = kcd::zero_shot(records, *model, specs, base, zs.out);
        for (const kcd::ZeroShotEntry& e : entries)
            std::printf("%-22s R=%-3g psnr_db=%.4f ssim=%.4f\n",
                        kcd::family_name(e.mask.family), e.mask.acceleration,
                        e.report.psnr_db_mean, e.report.ssim_mean);
        std::printf("wrote %s/zero_shot.csv\n", zs.out.c_str());
    });

    // --- ablate-T ----------------------------------------------------------
    struct {
        TrainArgs train;
        std::string eval_data, t_list = "4,16";
        std::string sampler = "cold";
        std::uint64_t eval_seed = 0;
    } ab;
    CLI::App* ablate = app.add_subcommand("ablate-T",
                                          "train and evaluate across diffusion step counts");
    add_train_flags(ablate, ab.train, false);
    ablate->add_option("--T-list", ab.t_list, "comma-separated step counts");
    ablate->add_option("--eval-data", ab.eval_data, "evaluation dataset (default: --data)");
    ablate->add_option("--eval-sampler", ab.sampler, "sampler for evaluation");
    ablate->add_option("--eval-seed", ab.eval_seed, "evaluation master seed");
    ablate->callback([&] {
        layer_config_file(ablate, ab.train);
        const kcd::MaskSpec mask = train_mask_spec(ab.train);
        const std::string data_path = resolve_data_path(ab.train.data);
        const std::vector<kcd::SliceRecord> train_records = kcd::load_dataset(data_path);
        const std::vector<kcd::SliceRecord> eval_records =
            ab.eval_data.empty() ? train_records : kcd::load_dataset(ab.eval_data);
        const std::vector<int> steps = parse_int_list(ab.t_list, "--T-list");
        kcd::validate(ab.train.cfg);
        kcd::ExperimentConfig ecfg;
        ecfg.sampler = kcd::parse_sampler(ab.sampler);
        ecfg.seed = ab.eval_seed;
        ecfg.jobs = ab.train.jobs;
        ecfg.panel_limit = 0;
        ordered_json j = train_manifest("ablate-T", ab.train, mask, data_path);
        j["T_list"] = steps;
        j["eval_sampler"] = ab.sampler;
        j["eval_seed"] = ab.eval_seed;
        write_run_manifest(ab.train.out, j);
        const auto entries =
            kcd::ablate_timesteps(train_records, eval_records, steps, ab.train.cfg, mask,
                                  ab.train.arch, ecfg, ab.train.out);
        for (const kcd::AblationEntry& e : entries)
            std::printf("T=%-4d loss(last100)=%.6f psnr_db=%.4f ssim=%.4f\n", e.total_steps,
                        e.train.final_loss_mean, e.report.psnr_db_mean, e.report.ssim_mean);
        std::printf("wrote %s/ablation.csv\n", ab.train.out.c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    kcd::nn::pin_blas_single_thread();
    try {
        return run_cli(argc, argv);
    } catch (const kcd::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
