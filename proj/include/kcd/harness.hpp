#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kcd/data.hpp"
#include "kcd/mask.hpp"
#include "kcd/sampler.hpp"
#include "kcd/train.hpp"

namespace kcd {

struct ExperimentConfig {
    MaskSpec mask;
    SamplerKind sampler = SamplerKind::Cold;
    int total_steps = 125;
    int n_samples = 1;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool independent_subsets = false;
    bool data_consistency = false;
    int panel_limit = 4; // slices that get PNG panels when out_dir is set
};

struct SliceResult {
    std::string volume_id;
    int slice_index = 0;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct VolumeSummary {
    std::string volume_id;
    int slices = 0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double data_range = 0.0;
};

struct MetricReport {
    std::vector<SliceResult> slices;   // canonical (volume_id, slice) order
    std::vector<VolumeSummary> volumes;
    double psnr_db_mean = 0.0; // mean of volume means
    double ssim_mean = 0.0;
    ExperimentConfig config;
};

/// Mask seed for a volume: all slices of a volume share one mask, different
/// volumes get independent ones, and reruns with the same master seed
/// reproduce them.
std::uint64_t volume_mask_seed(std::uint64_t master, const std::string& volume_id);

/// Reconstruction seed for a slice within its volume.
std::uint64_t slice_seed(std::uint64_t volume_seed, int slice_index);

/// Reconstructs every slice and scores PSNR/SSIM on magnitudes against the
/// stored targets, with data_range fixed per volume as the maximum of that
/// volume's targets. When out_dir is non-empty, writes eval.csv, eval.json
/// and PNG panels (target / zero-filled / reconstruction / error map, plus
/// uncertainty when n_samples > 1) for the first panel_limit slices.
MetricReport run_experiment(const std::vector<SliceRecord>& data, const RestorationModel& model,
                            const ExperimentConfig& cfg, const std::string& out_dir = "");

void write_report_csv(const MetricReport& report, const std::string& path);
void write_report_json(const MetricReport& report, const std::string& path);

/// One trained model evaluated under each mask spec (training-free transfer).
struct ZeroShotEntry {
    MaskSpec mask;
    MetricReport report;
};
std::vector<ZeroShotEntry> zero_shot(const std::vector<SliceRecord>& data,
                                     const RestorationModel& model,
                                     const std::vector<MaskSpec>& masks,
                                     const ExperimentConfig& base, const std::string& out_dir);

/// Step-count ablation: trains one model per entry of step_counts (same
/// config otherwise) and evaluates it with the matching sampler step count.
struct AblationEntry {
    int total_steps = 0;
    TrainLoopResult train;
    MetricReport report;
};
std::vector<AblationEntry> ablate_timesteps(const std::vector<SliceRecord>& train_data,
                                            const std::vector<SliceRecord>& eval_data,
                                            const std::vector<int>& step_counts,
                                            const TrainConfig& base, const MaskSpec& mask,
                                            const UNetConfig& arch,
                                            const ExperimentConfig& eval_cfg,
                                            const std::string& out_dir);

} // namespace kcd
