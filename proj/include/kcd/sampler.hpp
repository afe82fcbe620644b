#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kcd/degrade.hpp"
#include "kcd/model.hpp"

namespace kcd {

enum class SamplerKind { OneShot, Naive, Cold };

const char* sampler_name(SamplerKind k);
SamplerKind parse_sampler(const std::string& name);

struct SamplerOptions {
    bool independent_subsets = false; // re-draw schedule subsets per step (no nesting)
    bool data_consistency = false;    // re-impose measured frequencies on the final estimate
    const RealImage* target = nullptr; // when set, score the estimate against this magnitude
    double data_range = 0.0;           // 0 => max of target
};

struct ReconResult {
    ComplexImage estimate;
    std::vector<ComplexImage> samples; // per-trajectory estimates (multi-sample runs)
    RealImage uncertainty;             // pixelwise std of sample magnitudes
    bool has_uncertainty = false;      // true iff more than one sample was drawn
    std::optional<double> psnr_db;
    std::optional<double> ssim;
    std::string sampler_kind;
    int steps_used = 0;
    int model_calls = 0;
    int n_samples = 1;
};

/// Reverse process starting from the zero-filled reconstruction
/// x_T = F^-1(M o k). Each step estimates x0_hat = model(x_t, t) and forms
///   naive: x_{t-1} = D(x0_hat, t-1)
///   cold:  x_{t-1} = x_t - D(x0_hat, t) + D(x0_hat, t-1)
/// under a schedule derived from (mask, total_steps, seed). The t = 0
/// degradation is the identity and is applied directly. Entries of
/// `measured` outside the mask are ignored.
ReconResult sample_naive(const RestorationModel& model, const KSpaceGrid& measured,
                         const SamplingMask& mask, int total_steps, std::uint64_t seed,
                         const SamplerOptions& opts = {});
ReconResult sample_cold(const RestorationModel& model, const KSpaceGrid& measured,
                        const SamplingMask& mask, int total_steps, std::uint64_t seed,
                        const SamplerOptions& opts = {});

/// Single application of the model to the zero-filled reconstruction
/// (equivalent to sample_naive with total_steps = 1).
ReconResult sample_one_shot(const RestorationModel& model, const KSpaceGrid& measured,
                            const SamplingMask& mask, const SamplerOptions& opts = {});

/// Dispatch on kind; OneShot ignores total_steps and seed.
ReconResult reconstruct(const RestorationModel& model, const KSpaceGrid& measured,
                        const SamplingMask& mask, SamplerKind kind, int total_steps,
                        std::uint64_t seed, const SamplerOptions& opts = {});

/// Runs the sampler n_samples times with per-trajectory schedule seeds
/// derived from master_seed, averages the estimates, and reports the
/// pixelwise population standard deviation of the sample magnitudes as an
/// uncertainty map (all zeros for n_samples = 1).
ReconResult multi_sample(const RestorationModel& model, const KSpaceGrid& measured,
                         const SamplingMask& mask, SamplerKind kind, int total_steps,
                         int n_samples, std::uint64_t master_seed,
                         const SamplerOptions& opts = {});

/// Replace the estimate's k-space values on the mask by the measured ones.
ComplexImage impose_measured(const ComplexImage& estimate, const KSpaceGrid& measured,
                             const SamplingMask& mask);

/// Seed of trajectory i under a master seed (splitmix64 of master + i*phi).
std::uint64_t trajectory_seed(std::uint64_t master_seed, int index);

} // namespace kcd
