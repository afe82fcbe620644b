#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kcd/image.hpp"

namespace kcd {

/// A restoration operator: given a degraded image x_t and its step index t
/// (with total step count T), produce an estimate of the clean image x_0.
/// Implementations must be usable concurrently from multiple threads.
class RestorationModel {
public:
    virtual ~RestorationModel() = default;

    /// Requires 0 <= t <= total_steps, total_steps >= 1, finite input.
    /// Output has the same shape as the input.
    virtual ComplexImage apply(const ComplexImage& x_t, int t, int total_steps) const = 0;

    virtual std::string kind() const = 0;
};

/// Common argument validation shared by all models.
void check_apply_args(const ComplexImage& x_t, int t, int total_steps);

/// Returns the stored clean image regardless of input; used to isolate
/// sampler behavior from model quality in tests.
class OracleRestorer : public RestorationModel {
public:
    explicit OracleRestorer(ComplexImage clean);
    ComplexImage apply(const ComplexImage& x_t, int t, int total_steps) const override;
    std::string kind() const override { return "oracle"; }

private:
    ComplexImage clean_;
};

/// Returns a fixed image regardless of input.
class ConstantRestorer : public RestorationModel {
public:
    explicit ConstantRestorer(ComplexImage value);
    ComplexImage apply(const ComplexImage& x_t, int t, int total_steps) const override;
    std::string kind() const override { return "constant"; }

private:
    ComplexImage value_;
};

/// Sinusoidal embedding of the normalized step u = t/total_steps.
/// dim must be even and >= 2; frequencies are geometrically spaced in
/// [1, 1000] so the first component sin(u) is monotone on [0, 1], which makes
/// the embedding injective over any step grid.
std::vector<double> time_embed(int t, int total_steps, int dim);

/// Loads a trained restoration network checkpoint, dispatching on the scalar
/// precision recorded in the file.
std::unique_ptr<RestorationModel> load_restoration_model(const std::string& path);

} // namespace kcd
