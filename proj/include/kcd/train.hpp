#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kcd/data.hpp"
#include "kcd/mask.hpp"
#include "kcd/rng.hpp"
#include "kcd/unet.hpp"

namespace kcd {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    int total_steps = 16;
    int batch_size = 8;
    double learning_rate = 1e-4;
    long long iterations = 3000;
    AdamParams adam;
    std::string loss = "l1"; // only objective implemented
    std::uint64_t seed = 0;
    long long checkpoint_interval = 500;
    std::string precision = "float32"; // or "float64"
};

void validate(const TrainConfig& cfg);

/// Mean absolute difference over both (real, imaginary) channels.
double l1_loss(const ComplexImage& prediction, const ComplexImage& target);

/// Uniform draw from {1, ..., total_steps}; the single source of step
/// indices during training.
int draw_step(Rng& rng, int total_steps);

/// Bias-corrected Adam over a flat parameter vector. Moments are kept in the
/// training precision.
template <typename S>
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t n, AdamParams p) : p_(p), m_(n, S(0)), v_(n, S(0)) {}

    void step(std::vector<S>& theta, const std::vector<S>& grad, double lr);

    long long steps_taken() const { return t_; }
    std::vector<S>& m() { return m_; }
    std::vector<S>& v() { return v_; }
    const std::vector<S>& m() const { return m_; }
    const std::vector<S>& v() const { return v_; }
    void set_steps_taken(long long t) { t_ = t; }

private:
    AdamParams p_;
    std::vector<S> m_, v_;
    long long t_ = 0;
};

/// Everything needed to continue a run exactly: model, moments, iteration
/// counter, RNG state, and running loss bookkeeping.
template <typename S>
struct TrainState {
    TrainConfig config;
    MaskSpec mask;
    UNet<S> net;
    AdamOptimizer<S> opt;
    long long iteration = 0;
    Rng rng;
    std::vector<double> first_losses; // first 100 iterations
    std::vector<double> last_losses;  // ring buffer of the trailing 100
    std::size_t last_pos = 0;
    long long recorded = 0;

    TrainState(TrainConfig cfg, MaskSpec m, UNetConfig arch);

    void record_loss(double loss);
    double initial_loss_mean() const;
    double trailing_loss_mean() const;
};

template <typename S>
void save_train_state(const TrainState<S>& st, const std::string& path);
template <typename S>
TrainState<S> load_train_state(const std::string& path);

/// One example in a training batch.
struct BatchItem {
    const ComplexImage* clean = nullptr;
    const std::string* id = nullptr;
};

/// One optimization step: for each example draw a step index t, a fresh mask
/// seed and a schedule seed, degrade the clean image to x_t, run the network
/// on the normalized input, and take an L1-gradient Adam step. Per-example
/// gradients are accumulated into separate buffers and reduced in batch
/// order, so results do not depend on `jobs`. Throws NumericError when the
/// loss leaves the finite domain.
template <typename S>
double train_step(TrainState<S>& st, const std::vector<BatchItem>& batch, int jobs = 1);

struct TrainLoopResult {
    long long iterations_run = 0;
    double initial_loss_mean = 0.0;
    double final_loss_mean = 0.0;
};

/// Runs train_step until config.iterations, appending
/// "iteration,loss,wall_time_s" rows to <out_dir>/loss.csv, checkpointing
/// every checkpoint_interval iterations and at the end (model.kcdm,
/// train_state.kcdt). Batch examples are drawn uniformly from `data`.
template <typename S>
TrainLoopResult train_loop(TrainState<S>& st, const std::vector<SliceRecord>& data,
                           const std::string& out_dir, int jobs = 1,
                           const std::function<void(long long, double)>& on_iteration = {});

} // namespace kcd
