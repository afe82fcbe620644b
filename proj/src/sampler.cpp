#include "kcd/sampler.hpp"

#include <cmath>

#include "kcd/error.hpp"
#include "kcd/fourier.hpp"
#include "kcd/metrics.hpp"
#include "kcd/rng.hpp"

namespace kcd {

const char* sampler_name(SamplerKind k) {
    switch (k) {
    case SamplerKind::OneShot: return "one-shot";
    case SamplerKind::Naive: return "naive";
    case SamplerKind::Cold: return "cold";
    }
    return "?";
}

SamplerKind parse_sampler(const std::string& name) {
    if (name == "one-shot") return SamplerKind::OneShot;
    if (name == "naive") return SamplerKind::Naive;
    if (name == "cold") return SamplerKind::Cold;
    throw ValidationError("unknown sampler '" + name + "' (one-shot, naive, cold)");
}

namespace {

void check_inputs(const KSpaceGrid& measured, const SamplingMask& mask, int total_steps) {
    require_same_shape(measured, mask, "sampler");
    require_finite(measured, "sampler measured k-space");
    if (total_steps < 1) throw ValidationError("sampler: total_steps must be >= 1");
}

void score(ReconResult& r, const SamplerOptions& opts) {
    if (!opts.target) return;
    const RealImage mag = magnitude(r.estimate);
    double dr = opts.data_range;
    if (dr <= 0.0) dr = max_abs(*opts.target);
    r.psnr_db = psnr(*opts.target, mag, dr);
    r.ssim = ssim(*opts.target, mag, dr);
}

ReconResult run_chain(const RestorationModel& model, const KSpaceGrid& measured,
                      const SamplingMask& mask, int total_steps, std::uint64_t seed,
                      const SamplerOptions& opts, bool cold, const char* kind_label) {
    check_inputs(measured, mask, total_steps);
    const MaskSchedule schedule =
        make_schedule(mask, total_steps, seed, opts.independent_subsets);

    ReconResult r;
    r.sampler_kind = kind_label;
    r.steps_used = total_steps;

    ComplexImage x = zero_filled(measured, mask);
    for (int t = total_steps; t >= 1; --t) {
        ComplexImage x0_hat = model.apply(x, t, total_steps);
        ++r.model_calls;
        if (cold) {
            // Share one forward transform between D(x0_hat, t) and
            // D(x0_hat, t-1).
            const KSpaceGrid k0 = forward_transform(x0_hat);
            const ComplexImage d_t = inverse_transform(apply_mask(k0, mask_at(schedule, t)));
            ComplexImage d_prev = t > 1
                                      ? inverse_transform(apply_mask(k0, mask_at(schedule, t - 1)))
                                      : std::move(x0_hat);
            for (std::size_t i = 0; i < x.size(); ++i)
                x.data[i] += d_prev.data[i] - d_t.data[i];
        } else {
            x = t > 1 ? degrade(x0_hat, t - 1, schedule) : std::move(x0_hat);
        }
    }
    if (opts.data_consistency) x = impose_measured(x, measured, mask);
    r.estimate = std::move(x);
    score(r, opts);
    return r;
}

} // namespace

ReconResult sample_naive(const RestorationModel& model, const KSpaceGrid& measured,
                         const SamplingMask& mask, int total_steps, std::uint64_t seed,
                         const SamplerOptions& opts) {
    return run_chain(model, measured, mask, total_steps, seed, opts, false, "naive");
}

ReconResult sample_cold(const RestorationModel& model, const KSpaceGrid& measured,
                        const SamplingMask& mask, int total_steps, std::uint64_t seed,
                        const SamplerOptions& opts) {
    return run_chain(model, measured, mask, total_steps, seed, opts, true, "cold");
}

ReconResult sample_one_shot(const RestorationModel& model, const KSpaceGrid& measured,
                            const SamplingMask& mask, const SamplerOptions& opts) {
    ReconResult r = run_chain(model, measured, mask, 1, 0, opts, false, "one-shot");
    return r;
}

ReconResult reconstruct(const RestorationModel& model, const KSpaceGrid& measured,
                        const SamplingMask& mask, SamplerKind kind, int total_steps,
                        std::uint64_t seed, const SamplerOptions& opts) {
    switch (kind) {
    case SamplerKind::OneShot: return sample_one_shot(model, measured, mask, opts);
    case SamplerKind::Naive: return sample_naive(model, measured, mask, total_steps, seed, opts);
    case SamplerKind::Cold: return sample_cold(model, measured, mask, total_steps, seed, opts);
    }
    throw ValidationError("reconstruct: bad sampler kind");
}

std::uint64_t trajectory_seed(std::uint64_t master_seed, int index) {
    return splitmix64(master_seed + 0x9e3779b97f4a7c15ULL * std::uint64_t(index));
}

ReconResult multi_sample(const RestorationModel& model, const KSpaceGrid& measured,
                         const SamplingMask& mask, SamplerKind kind, int total_steps,
                         int n_samples, std::uint64_t master_seed, const SamplerOptions& opts) {
    if (n_samples < 1) throw ValidationError("multi_sample: n_samples must be >= 1");
    check_inputs(measured, mask, total_steps);

    ReconResult out;
    out.sampler_kind = sampler_name(kind);
    out.steps_used = kind == SamplerKind::OneShot ? 1 : total_steps;
    out.n_samples = n_samples;

    // Score only once, on the averaged estimate.
    SamplerOptions inner = opts;
    inner.target = nullptr;

    ComplexImage mean(measured.height, measured.width);
    for (int i = 0; i < n_samples; ++i) {
        ReconResult r = reconstruct(model, measured, mask, kind, total_steps,
                                    trajectory_seed(master_seed, i), inner);
        out.model_calls += r.model_calls;
        for (std::size_t p = 0; p < mean.size(); ++p) mean.data[p] += r.estimate.data[p];
        out.samples.push_back(std::move(r.estimate));
    }
    for (std::size_t p = 0; p < mean.size(); ++p) mean.data[p] /= double(n_samples);
    out.estimate = std::move(mean);

    // Pixelwise population std of the sample magnitudes.
    std::vector<RealImage> mags;
    mags.reserve(out.samples.size());
    for (const ComplexImage& s : out.samples) mags.push_back(magnitude(s));
    RealImage unc(measured.height, measured.width);
    for (std::size_t p = 0; p < unc.size(); ++p) {
        double m = 0.0;
        for (const RealImage& g : mags) m += g.data[p];
        m /= double(n_samples);
        double var = 0.0;
        for (const RealImage& g : mags) {
            const double d = g.data[p] - m;
            var += d * d;
        }
        unc.data[p] = std::sqrt(var / double(n_samples));
    }
    out.uncertainty = std::move(unc);
    out.has_uncertainty = n_samples > 1;
    score(out, opts);
    return out;
}

ComplexImage impose_measured(const ComplexImage& estimate, const KSpaceGrid& measured,
                             const SamplingMask& mask) {
    require_same_shape(estimate, measured, "impose_measured");
    require_same_shape(measured, mask, "impose_measured");
    KSpaceGrid k = forward_transform(estimate);
    for (std::size_t i = 0; i < k.size(); ++i)
        if (mask.bits[i]) k.data[i] = measured.data[i];
    return inverse_transform(k);
}

} // namespace kcd
