#include "kcd/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include "kcd/binio.hpp"
#include "kcd/checkpoint.hpp"
#include "kcd/degrade.hpp"
#include "kcd/error.hpp"
#include "kcd/fourier.hpp"

namespace fs = std::filesystem;

namespace kcd {

void validate(const TrainConfig& cfg) {
    if (cfg.total_steps < 1) throw ValidationError("train: total_steps must be >= 1");
    if (cfg.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw ValidationError("train: learning_rate must be > 0");
    if (cfg.iterations < 0) throw ValidationError("train: iterations must be >= 0");
    if (cfg.loss != "l1") throw ValidationError("train: unsupported loss '" + cfg.loss + "'");
    if (cfg.checkpoint_interval < 1) throw ValidationError("train: checkpoint_interval must be >= 1");
    if (cfg.precision != "float32" && cfg.precision != "float64")
        throw ValidationError("train: precision must be float32 or float64");
    if (!(cfg.adam.beta1 > 0.0 && cfg.adam.beta1 < 1.0) ||
        !(cfg.adam.beta2 > 0.0 && cfg.adam.beta2 < 1.0) || !(cfg.adam.eps > 0.0))
        throw ValidationError("train: bad optimizer constants");
}

double l1_loss(const ComplexImage& prediction, const ComplexImage& target) {
    require_same_shape(prediction, target, "l1_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        acc += std::abs(prediction.data[i].real() - target.data[i].real());
        acc += std::abs(prediction.data[i].imag() - target.data[i].imag());
    }
    return acc / double(2 * prediction.size());
}

int draw_step(Rng& rng, int total_steps) {
    if (total_steps < 1) throw ValidationError("draw_step: total_steps must be >= 1");
    return 1 + int(rng.uniform_int(std::uint64_t(total_steps)));
}

template <typename S>
void AdamOptimizer<S>::step(std::vector<S>& theta, const std::vector<S>& grad, double lr) {
    if (theta.size() != m_.size() || grad.size() != m_.size())
        throw ValidationError("adam: size mismatch");
    ++t_;
    const S b1 = S(p_.beta1), b2 = S(p_.beta2);
    const S bc1 = S(1.0 - std::pow(p_.beta1, double(t_)));
    const S bc2 = S(1.0 - std::pow(p_.beta2, double(t_)));
    const S eps = S(p_.eps), rate = S(lr);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const S g = grad[i];
        m_[i] = b1 * m_[i] + (S(1) - b1) * g;
        v_[i] = b2 * v_[i] + (S(1) - b2) * g * g;
        const S mhat = m_[i] / bc1;
        const S vhat = v_[i] / bc2;
        theta[i] -= rate * mhat / (std::sqrt(vhat) + eps);
    }
}

template <typename S>
TrainState<S>::TrainState(TrainConfig cfg, MaskSpec m, UNetConfig arch)
    : config(std::move(cfg)), mask(m), net(arch), opt(net.param_count(), config.adam),
      rng(splitmix64(config.seed)) {
    validate(config);
    net.init_params(splitmix64(config.seed ^ 0x5eedba5eULL));
}

template <typename S>
void TrainState<S>::record_loss(double loss) {
    if (first_losses.size() < 100) first_losses.push_back(loss);
    if (last_losses.size() < 100) {
        last_losses.push_back(loss);
    } else {
        last_losses[last_pos] = loss;
        last_pos = (last_pos + 1) % last_losses.size();
    }
    ++recorded;
}

template <typename S>
double TrainState<S>::initial_loss_mean() const {
    if (first_losses.empty()) return 0.0;
    double acc = 0.0;
    for (double v : first_losses) acc += v;
    return acc / double(first_losses.size());
}

template <typename S>
double TrainState<S>::trailing_loss_mean() const {
    if (last_losses.empty()) return 0.0;
    double acc = 0.0;
    for (double v : last_losses) acc += v;
    return acc / double(last_losses.size());
}

namespace {

struct ExampleDraw {
    int t = 0;
    std::uint64_t mask_seed = 0, sched_seed = 0;
};

template <typename S>
struct ExampleEval {
    std::vector<S> grad;
    Workspace<S> ws;
    nn::Tensor<S> gy;
    double loss = 0.0;
};

/// Loss and gradient for one example. The degraded input is normalized by
/// its own max magnitude; the L1 objective compares the rescaled output
/// against the clean image in original units.
template <typename S>
void eval_example(const UNet<S>& net, const MaskSpec& spec, int total_steps,
                  const ComplexImage& clean, const ExampleDraw& d, ExampleEval<S>& ev) {
    const SamplingMask mask =
        make_mask(spec, clean.height, clean.width, d.mask_seed);
    const MaskSchedule schedule = make_schedule(mask, total_steps, d.sched_seed);
    const ComplexImage x_t = degrade(clean, d.t, schedule);

    const double s = input_scale(x_t);
    const nn::Tensor<S> xin = complex_to_tensor<S>(x_t, s);
    const std::vector<double> emb = time_embed(d.t, total_steps, net.config().time_dim);
    const nn::Tensor<S>& y = net.forward(xin, emb, ev.ws);

    const std::size_t npix = clean.size();
    const double inv_n = 1.0 / double(2 * npix);
    ev.gy.resize(2, y.h, y.w);
    S* gre = ev.gy.plane(0);
    S* gim = ev.gy.plane(1);
    const S* yre = y.plane(0);
    const S* yim = y.plane(1);
    double acc = 0.0;
    for (std::size_t i = 0; i < npix; ++i) {
        const double dre = double(yre[i]) * s - clean.data[i].real();
        const double dim = double(yim[i]) * s - clean.data[i].imag();
        acc += std::abs(dre) + std::abs(dim);
        gre[i] = S((dre > 0.0 ? 1.0 : dre < 0.0 ? -1.0 : 0.0) * s * inv_n);
        gim[i] = S((dim > 0.0 ? 1.0 : dim < 0.0 ? -1.0 : 0.0) * s * inv_n);
    }
    ev.loss = acc * inv_n;

    std::fill(ev.grad.begin(), ev.grad.end(), S(0));
    net.backward(ev.gy, ev.ws, ev.grad.data());
}

} // namespace

template <typename S>
double train_step(TrainState<S>& st, const std::vector<BatchItem>& batch, int jobs) {
    if (batch.empty()) throw ValidationError("train_step: empty batch");
    if (jobs < 1) jobs = 1;
    const int n = int(batch.size());

    // All randomness is drawn up front on the coordinating thread, in batch
    // order, so the parameter trajectory is independent of jobs.
    std::vector<ExampleDraw> draws(static_cast<std::size_t>(n));
    for (ExampleDraw& d : draws) {
        d.t = draw_step(st.rng, st.config.total_steps);
        d.mask_seed = st.rng.next_u64();
        d.sched_seed = st.rng.next_u64();
    }

    // Scratch reused across iterations. The local reference matters: lambdas
    // do not capture thread_local storage, so workers must reach the
    // coordinator's instance through it rather than their own empty one.
    static thread_local std::vector<ExampleEval<S>> evals_tls;
    std::vector<ExampleEval<S>>& evals = evals_tls;
    if (int(evals.size()) < n) evals.resize(std::size_t(n));
    for (int j = 0; j < n; ++j) evals[std::size_t(j)].grad.resize(st.net.param_count());

    auto run = [&](int j) {
        try {
            eval_example(st.net, st.mask, st.config.total_steps, *batch[std::size_t(j)].clean,
                         draws[std::size_t(j)], evals[std::size_t(j)]);
        } catch (const std::exception& e) {
            throw NumericError("example evaluation failed at iteration " +
                               std::to_string(st.iteration + 1) + " (t=" +
                               std::to_string(draws[std::size_t(j)].t) + ", example=" +
                               *batch[std::size_t(j)].id + "): " + e.what());
        }
    };
    if (jobs == 1 || n == 1) {
        for (int j = 0; j < n; ++j) run(j);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr eptr;
        std::mutex emu;
        for (int k = 0; k < std::min(jobs, n); ++k)
            pool.emplace_back([&] {
                for (int j = next.fetch_add(1); j < n && !failed.load(); j = next.fetch_add(1)) {
                    try {
                        run(j);
                    } catch (...) {
                        std::lock_guard<std::mutex> lk(emu);
                        if (!eptr) eptr = std::current_exception();
                        failed.store(true);
                    }
                }
            });
        for (std::thread& th : pool) th.join();
        if (eptr) std::rethrow_exception(eptr);
    }

    // Fixed-order reduction.
    std::vector<S> grad(st.net.param_count(), S(0));
    double loss = 0.0;
    const S inv_b = S(1.0 / double(n));
    for (int j = 0; j < n; ++j) {
        const ExampleEval<S>& ev = evals[std::size_t(j)];
        if (!std::isfinite(ev.loss))
            throw NumericError("training loss is not finite at iteration " +
                               std::to_string(st.iteration + 1) + " (t=" +
                               std::to_string(draws[std::size_t(j)].t) + ", example=" +
                               *batch[std::size_t(j)].id + ")");
        loss += ev.loss;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += ev.grad[i] * inv_b;
    }
    loss /= double(n);

    st.opt.step(st.net.params(), grad, st.config.learning_rate);
    ++st.iteration;
    st.record_loss(loss);
    return loss;
}

namespace {

constexpr char kTrainMagic[9] = "KCDTRAIN";
constexpr std::uint32_t kTrainVersion = 1;

} // namespace

template <typename S>
void save_train_state(const TrainState<S>& st, const std::string& path) {
    ByteWriter w;
    w.magic(kTrainMagic);
    w.u32(kTrainVersion);
    w.u8(std::uint8_t(sizeof(S)));
    // config
    w.i32(st.config.total_steps);
    w.i32(st.config.batch_size);
    w.f64(st.config.learning_rate);
    w.i64(st.config.iterations);
    w.f64(st.config.adam.beta1);
    w.f64(st.config.adam.beta2);
    w.f64(st.config.adam.eps);
    w.str(st.config.loss);
    w.u64(st.config.seed);
    w.i64(st.config.checkpoint_interval);
    w.str(st.config.precision);
    // mask spec
    w.str(family_name(st.mask.family));
    w.f64(st.mask.acceleration);
    w.f64(st.mask.center_fraction);
    // architecture
    w.i32(st.net.config().depth);
    w.i32(st.net.config().base_channels);
    w.i32(st.net.config().time_dim);
    w.i32(st.net.config().in_channels);
    w.i32(st.net.config().out_channels);
    // parameters and moments
    const auto put = [&w](const std::vector<S>& a) {
        w.u64(a.size());
        if constexpr (sizeof(S) == 4)
            w.f32_array(a.data(), a.size());
        else
            w.f64_array(a.data(), a.size());
    };
    put(st.net.params());
    put(st.opt.m());
    put(st.opt.v());
    w.i64(st.opt.steps_taken());
    w.i64(st.iteration);
    w.str(st.rng.serialize());
    w.u32(std::uint32_t(st.first_losses.size()));
    for (double v : st.first_losses) w.f64(v);
    w.u32(std::uint32_t(st.last_losses.size()));
    for (double v : st.last_losses) w.f64(v);
    w.u64(st.last_pos);
    w.i64(st.recorded);
    w.write_file_with_crc(path);
}

template <typename S>
TrainState<S> load_train_state(const std::string& path) {
    ByteReader r = ByteReader::from_file_with_crc(path, "train state");
    r.expect_magic(kTrainMagic, "train state");
    if (r.u32() != kTrainVersion) throw IoError("train state: unsupported version");
    const int scalar = r.u8();
    if (scalar != int(sizeof(S)))
        throw IoError("train state: precision mismatch (stored scalar width " +
                      std::to_string(scalar) + ", requested " + std::to_string(sizeof(S)) + ")");
    TrainConfig cfg;
    cfg.total_steps = r.i32();
    cfg.batch_size = r.i32();
    cfg.learning_rate = r.f64();
    cfg.iterations = r.i64();
    cfg.adam.beta1 = r.f64();
    cfg.adam.beta2 = r.f64();
    cfg.adam.eps = r.f64();
    cfg.loss = r.str();
    cfg.seed = r.u64();
    cfg.checkpoint_interval = r.i64();
    cfg.precision = r.str();
    MaskSpec mask;
    mask.family = parse_family(r.str());
    mask.acceleration = r.f64();
    mask.center_fraction = r.f64();
    UNetConfig arch;
    arch.depth = r.i32();
    arch.base_channels = r.i32();
    arch.time_dim = r.i32();
    arch.in_channels = r.i32();
    arch.out_channels = r.i32();

    TrainState<S> st(cfg, mask, arch);
    const auto get = [&r](std::vector<S>& a) {
        const std::uint64_t n = r.u64();
        if (n != a.size()) throw IoError("train state: array size mismatch");
        for (std::uint64_t i = 0; i < n; ++i) a[i] = sizeof(S) == 4 ? S(r.f32()) : S(r.f64());
    };
    get(st.net.params());
    get(st.opt.m());
    get(st.opt.v());
    st.opt.set_steps_taken(r.i64());
    st.iteration = r.i64();
    st.rng.deserialize(r.str());
    st.first_losses.resize(r.u32());
    for (double& v : st.first_losses) v = r.f64();
    st.last_losses.resize(r.u32());
    for (double& v : st.last_losses) v = r.f64();
    st.last_pos = r.u64();
    st.recorded = r.i64();
    if (r.remaining() != 0) throw IoError("train state: trailing bytes");
    return st;
}

template <typename S>
TrainLoopResult train_loop(TrainState<S>& st, const std::vector<SliceRecord>& data,
                           const std::string& out_dir, int jobs,
                           const std::function<void(long long, double)>& on_iteration) {
    if (data.empty()) throw ValidationError("train_loop: empty dataset");
    fs::create_directories(out_dir);

    // Clean complex images are the inverse transforms of the stored k-space.
    std::vector<ComplexImage> cleans;
    std::vector<std::string> ids;
    cleans.reserve(data.size());
    for (const SliceRecord& rec : data) {
        if (rec.kspace.height % (1 << st.net.config().depth) ||
            rec.kspace.width % (1 << st.net.config().depth))
            throw ValidationError("train_loop: slice extent of " + rec.volume_id +
                                  " not divisible by 2^depth");
        cleans.push_back(inverse_transform(rec.kspace));
        ids.push_back(rec.volume_id + "/" + std::to_string(rec.slice_index));
    }

    const std::string csv_path = out_dir + "/loss.csv";
    const bool fresh = st.iteration == 0 || !fs::exists(csv_path);
    std::FILE* csv = std::fopen(csv_path.c_str(), fresh ? "w" : "a");
    if (!csv) throw IoError("cannot open " + csv_path);
    if (fresh) std::fprintf(csv, "iteration,loss,wall_time_s\n");

    const auto t0 = std::chrono::steady_clock::now();
    TrainLoopResult result;
    try {
        while (st.iteration < st.config.iterations) {
            std::vector<BatchItem> batch(std::size_t(st.config.batch_size));
            for (BatchItem& item : batch) {
                const std::size_t idx = std::size_t(st.rng.uniform_int(cleans.size()));
                item.clean = &cleans[idx];
                item.id = &ids[idx];
            }
            const double loss = train_step(st, batch, jobs);
            ++result.iterations_run;
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::fprintf(csv, "%lld,%.10g,%.3f\n", st.iteration, loss, wall);
            if (on_iteration) on_iteration(st.iteration, loss);
            if (st.iteration % st.config.checkpoint_interval == 0 &&
                st.iteration < st.config.iterations) {
                std::fflush(csv);
                save_checkpoint(st.net, out_dir + "/ckpt_" + std::to_string(st.iteration) +
                                            ".kcdm");
                save_train_state(st, out_dir + "/train_state.kcdt");
            }
        }
    } catch (...) {
        std::fclose(csv);
        throw;
    }
    std::fclose(csv);
    save_checkpoint(st.net, out_dir + "/model.kcdm");
    save_train_state(st, out_dir + "/train_state.kcdt");
    result.initial_loss_mean = st.initial_loss_mean();
    result.final_loss_mean = st.trailing_loss_mean();
    return result;
}

#define KCD_TRAIN_INSTANTIATE(S)                                                                   \
    template class AdamOptimizer<S>;                                                               \
    template struct TrainState<S>;                                                                 \
    template void save_train_state<S>(const TrainState<S>&, const std::string&);                   \
    template TrainState<S> load_train_state<S>(const std::string&);                                \
    template double train_step<S>(TrainState<S>&, const std::vector<BatchItem>&, int);             \
    template TrainLoopResult train_loop<S>(TrainState<S>&, const std::vector<SliceRecord>&,        \
                                           const std::string&, int,                                \
                                           const std::function<void(long long, double)>&);

KCD_TRAIN_INSTANTIATE(float)
KCD_TRAIN_INSTANTIATE(double)

#undef KCD_TRAIN_INSTANTIATE

} // namespace kcd
