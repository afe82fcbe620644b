#include "kcd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "kcd/binio.hpp"
#include "kcd/degrade.hpp"
#include "kcd/error.hpp"
#include "kcd/metrics.hpp"

namespace fs = std::filesystem;

namespace kcd {

std::uint64_t volume_mask_seed(std::uint64_t master, const std::string& volume_id) {
    return splitmix64(master ^ fnv1a(volume_id));
}

std::uint64_t slice_seed(std::uint64_t volume_seed, int slice_index) {
    return splitmix64(volume_seed + 0x9e3779b97f4a7c15ULL * std::uint64_t(slice_index + 1));
}

namespace {

std::string fmt_double(double v, const char* spec = "%.6f") {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

nlohmann::ordered_json metric_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

struct SliceJob {
    const SliceRecord* rec = nullptr;
    const SamplingMask* mask = nullptr;
    double data_range = 0.0;
    std::uint64_t seed = 0;
    bool panel = false;
    ReconResult result; // filled by workers
};

void write_panels(const SliceJob& job, const ExperimentConfig& cfg, const std::string& out_dir) {
    const std::string stem =
        out_dir + "/" + job.rec->volume_id + "_s" + std::to_string(job.rec->slice_index);
    const double dr = job.data_range;
    write_png(stem + "_target.png", render_real(job.rec->target, 0.0, dr));
    const ComplexImage zf = zero_filled(job.rec->kspace, *job.mask);
    write_png(stem + "_zero_filled.png", render_real(magnitude(zf), 0.0, dr));
    write_png(stem + "_recon.png", render_real(magnitude(job.result.estimate), 0.0, dr));
    const RealImage err = error_map(magnitude(job.result.estimate), job.rec->target, dr);
    write_png(stem + "_error.png", render_real(err, 0.0, dr));
    if (cfg.n_samples > 1) {
        const double umax = max_abs(job.result.uncertainty);
        write_png(stem + "_uncertainty.png",
                  render_real(job.result.uncertainty, 0.0, umax > 0 ? umax : 1.0));
    }
}

} // namespace

MetricReport run_experiment(const std::vector<SliceRecord>& data, const RestorationModel& model,
                            const ExperimentConfig& cfg, const std::string& out_dir) {
    if (data.empty()) throw ValidationError("run_experiment: no slices");
    if (cfg.n_samples < 1) throw ValidationError("run_experiment: n_samples must be >= 1");
    if (cfg.total_steps < 1) throw ValidationError("run_experiment: total_steps must be >= 1");

    // Canonical order: volumes sorted by id, slices by index.
    std::map<std::string, std::vector<const SliceRecord*>> by_volume;
    for (const SliceRecord& r : data) by_volume[r.volume_id].push_back(&r);
    for (auto& [id, slices] : by_volume)
        std::sort(slices.begin(), slices.end(),
                  [](const SliceRecord* a, const SliceRecord* b) {
                      return a->slice_index < b->slice_index;
                  });

    std::vector<SamplingMask> masks;
    masks.reserve(by_volume.size());
    std::vector<SliceJob> jobs;
    std::map<std::string, double> ranges;
    for (const auto& [id, slices] : by_volume) {
        double dr = 0.0;
        for (const SliceRecord* r : slices) dr = std::max(dr, max_abs(r->target));
        if (dr <= 0.0) throw ValidationError("run_experiment: all-zero targets in volume " + id);
        ranges[id] = dr;
        const SliceRecord* head = slices.front();
        masks.push_back(make_mask(cfg.mask, head->kspace.height, head->kspace.width,
                                  volume_mask_seed(cfg.seed, id)));
        const SamplingMask* mask = &masks.back();
        const std::uint64_t vseed = volume_mask_seed(cfg.seed, id);
        for (const SliceRecord* r : slices) {
            if (r->kspace.height != head->kspace.height || r->kspace.width != head->kspace.width)
                throw ValidationError("run_experiment: mixed slice shapes in volume " + id);
            SliceJob job;
            job.rec = r;
            job.mask = mask;
            job.data_range = dr;
            job.seed = slice_seed(vseed, r->slice_index);
            jobs.push_back(std::move(job));
        }
    }
    for (std::size_t i = 0; i < jobs.size() && int(i) < cfg.panel_limit; ++i)
        jobs[i].panel = true;

    SamplerOptions base_opts;
    base_opts.independent_subsets = cfg.independent_subsets;
    base_opts.data_consistency = cfg.data_consistency;

    auto run_one = [&](SliceJob& job) {
        SamplerOptions opts = base_opts;
        opts.target = &job.rec->target;
        opts.data_range = job.data_range;
        job.result = multi_sample(model, job.rec->kspace, *job.mask, cfg.sampler,
                                  cfg.total_steps, cfg.n_samples, job.seed, opts);
    };
    const int workers = std::max(1, std::min(cfg.jobs, int(jobs.size())));
    if (workers == 1) {
        for (SliceJob& job : jobs) run_one(job);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int k = 0; k < workers; ++k)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
                    run_one(jobs[i]);
            });
        for (std::thread& th : pool) th.join();
    }

    MetricReport report;
    report.config = cfg;
    for (const SliceJob& job : jobs)
        report.slices.push_back({job.rec->volume_id, job.rec->slice_index, *job.result.psnr_db,
                                 *job.result.ssim});
    for (const auto& [id, slices] : by_volume) {
        VolumeSummary v;
        v.volume_id = id;
        v.data_range = ranges[id];
        for (const SliceResult& s : report.slices)
            if (s.volume_id == id) {
                ++v.slices;
                v.psnr_db += s.psnr_db;
                v.ssim += s.ssim;
            }
        v.psnr_db /= v.slices;
        v.ssim /= v.slices;
        report.volumes.push_back(std::move(v));
    }
    for (const VolumeSummary& v : report.volumes) {
        report.psnr_db_mean += v.psnr_db;
        report.ssim_mean += v.ssim;
    }
    report.psnr_db_mean /= double(report.volumes.size());
    report.ssim_mean /= double(report.volumes.size());

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_report_csv(report, out_dir + "/eval.csv");
        write_report_json(report, out_dir + "/eval.json");
        for (const SliceJob& job : jobs)
            if (job.panel) write_panels(job, cfg, out_dir);
    }
    return report;
}

void write_report_csv(const MetricReport& report, const std::string& path) {
    std::string out = "volume_id,slice,mask_family,R,T,sampler,n_samples,psnr_db,ssim\n";
    const ExperimentConfig& c = report.config;
    for (const SliceResult& s : report.slices) {
        out += s.volume_id + ',' + std::to_string(s.slice_index) + ',' +
               family_name(c.mask.family) + ',' + fmt_double(c.mask.acceleration, "%g") + ',' +
               std::to_string(c.sampler == SamplerKind::OneShot ? 1 : c.total_steps) + ',' +
               sampler_name(c.sampler) + ',' + std::to_string(c.n_samples) + ',' +
               fmt_double(s.psnr_db) + ',' + fmt_double(s.ssim) + '\n';
    }
    write_file_bytes(path, out.data(), out.size());
}

void write_report_json(const MetricReport& report, const std::string& path) {
    const ExperimentConfig& c = report.config;
    nlohmann::ordered_json j;
    j["mask"] = {{"family", family_name(c.mask.family)},
                 {"acceleration", c.mask.acceleration},
                 {"center_fraction", c.mask.center_fraction}};
    j["sampler"] = sampler_name(c.sampler);
    j["total_steps"] = c.sampler == SamplerKind::OneShot ? 1 : c.total_steps;
    j["n_samples"] = c.n_samples;
    j["seed"] = c.seed;
    j["independent_subsets"] = c.independent_subsets;
    j["data_consistency"] = c.data_consistency;
    j["psnr_db_mean"] = metric_json(report.psnr_db_mean);
    j["ssim_mean"] = metric_json(report.ssim_mean);
    nlohmann::ordered_json vols = nlohmann::ordered_json::array();
    for (const VolumeSummary& v : report.volumes)
        vols.push_back({{"volume_id", v.volume_id},
                        {"slices", v.slices},
                        {"psnr_db", metric_json(v.psnr_db)},
                        {"ssim", metric_json(v.ssim)},
                        {"data_range", v.data_range}});
    j["volumes"] = std::move(vols);
    nlohmann::ordered_json slices = nlohmann::ordered_json::array();
    for (const SliceResult& s : report.slices)
        slices.push_back({{"volume_id", s.volume_id},
                          {"slice", s.slice_index},
                          {"psnr_db", metric_json(s.psnr_db)},
                          {"ssim", metric_json(s.ssim)}});
    j["slices"] = std::move(slices);
    const std::string text = j.dump(2) + "\n";
    write_file_bytes(path, text.data(), text.size());
}

std::vector<ZeroShotEntry> zero_shot(const std::vector<SliceRecord>& data,
                                     const RestorationModel& model,
                                     const std::vector<MaskSpec>& masks,
                                     const ExperimentConfig& base, const std::string& out_dir) {
    if (masks.empty()) throw ValidationError("zero_shot: no mask specs");
    std::vector<ZeroShotEntry> entries;
    std::string csv = "mask_family,R,center_fraction,psnr_db_mean,ssim_mean\n";
    for (const MaskSpec& spec : masks) {
        ExperimentConfig cfg = base;
        cfg.mask = spec;
        std::string sub;
        if (!out_dir.empty()) {
            char rbuf[32];
            std::snprintf(rbuf, sizeof rbuf, "%g", spec.acceleration);
            sub = out_dir + "/" + family_name(spec.family) + "_R" + rbuf;
        }
        ZeroShotEntry e{spec, run_experiment(data, model, cfg, sub)};
        csv += std::string(family_name(spec.family)) + ',' +
               fmt_double(spec.acceleration, "%g") + ',' +
               fmt_double(spec.center_fraction, "%g") + ',' +
               fmt_double(e.report.psnr_db_mean) + ',' + fmt_double(e.report.ssim_mean) + '\n';
        entries.push_back(std::move(e));
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file_bytes(out_dir + "/zero_shot.csv", csv.data(), csv.size());
    }
    return entries;
}

namespace {

template <typename S>
std::vector<AblationEntry> ablate_impl(const std::vector<SliceRecord>& train_data,
                                       const std::vector<SliceRecord>& eval_data,
                                       const std::vector<int>& step_counts,
                                       const TrainConfig& base, const MaskSpec& mask,
                                       const UNetConfig& arch, const ExperimentConfig& eval_cfg,
                                       const std::string& out_dir) {
    std::vector<AblationEntry> entries;
    for (int t : step_counts) {
        if (t < 1) throw ValidationError("ablate: step counts must be >= 1");
        TrainConfig cfg = base;
        cfg.total_steps = t;
        TrainState<S> st(cfg, mask, arch);
        const std::string sub = out_dir + "/T" + std::to_string(t);
        AblationEntry e;
        e.total_steps = t;
        e.train = train_loop(st, train_data, sub, eval_cfg.jobs);
        ReferenceUNet<S> model(std::move(st.net));
        ExperimentConfig ecfg = eval_cfg;
        ecfg.mask = mask;
        ecfg.total_steps = t;
        e.report = run_experiment(eval_data, model, ecfg, sub + "/eval");
        entries.push_back(std::move(e));
    }
    return entries;
}

} // namespace

std::vector<AblationEntry> ablate_timesteps(const std::vector<SliceRecord>& train_data,
                                            const std::vector<SliceRecord>& eval_data,
                                            const std::vector<int>& step_counts,
                                            const TrainConfig& base, const MaskSpec& mask,
                                            const UNetConfig& arch,
                                            const ExperimentConfig& eval_cfg,
                                            const std::string& out_dir) {
    if (step_counts.empty()) throw ValidationError("ablate: no step counts");
    fs::create_directories(out_dir);
    std::vector<AblationEntry> entries =
        base.precision == "float64"
            ? ablate_impl<double>(train_data, eval_data, step_counts, base, mask, arch, eval_cfg,
                                  out_dir)
            : ablate_impl<float>(train_data, eval_data, step_counts, base, mask, arch, eval_cfg,
                                 out_dir);
    std::string csv = "T,train_initial_loss,train_final_loss,psnr_db_mean,ssim_mean\n";
    for (const AblationEntry& e : entries)
        csv += std::to_string(e.total_steps) + ',' + fmt_double(e.train.initial_loss_mean) + ',' +
               fmt_double(e.train.final_loss_mean) + ',' + fmt_double(e.report.psnr_db_mean) +
               ',' + fmt_double(e.report.ssim_mean) + '\n';
    write_file_bytes(out_dir + "/ablation.csv", csv.data(), csv.size());
    return entries;
}

} // namespace kcd
