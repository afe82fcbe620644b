#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kcd/image.hpp"
#include "kcd/model.hpp"
#include "kcd/nn.hpp"

namespace kcd {

/// Architecture of the restoration network: a U-Net over 2-channel
/// (real/imaginary) images. Level i uses base_channels * 2^i channels;
/// downsampling is 2x2 average pooling, upsampling is nearest-neighbor
/// followed by a 1x1 channel-reduction convolution, and skip connections
/// concatenate encoder output onto the upsampled path. Each block is
/// conv3x3 -> (+ time shift) -> silu -> conv3x3 -> silu, where the time
/// shift is a learned linear projection of the sinusoidal step embedding.
/// The output head is a zero-initialized 1x1 convolution, so a freshly
/// initialized network is the zero map.
struct UNetConfig {
    int depth = 3;
    int base_channels = 16;
    int time_dim = 32;
    int in_channels = 2;
    int out_channels = 2;

    bool operator==(const UNetConfig&) const = default;
};

void validate(const UNetConfig& cfg);

/// Named slice of the flat parameter vector.
struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t count = 0;
    std::vector<int> shape;
    double init_std = 0.0; // 0 => zero-initialized
};

namespace detail {
struct BlockDesc {
    nn::ConvDesc conv1, conv2;
    nn::LinearDesc time;
};
} // namespace detail

/// Saved activations from one forward pass, consumed by backward().
template <typename S>
struct BlockTape {
    nn::Tensor<S> x, pre1, act1, pre2, act2;
    std::vector<S> shift;
};

template <typename S>
struct Workspace {
    std::vector<S> emb;
    std::vector<BlockTape<S>> enc;
    std::vector<nn::Tensor<S>> upsampled;
    std::vector<BlockTape<S>> dec;
    nn::Tensor<S> reduced, head_out;
    nn::Tensor<S> t1, t2, gcat, gskip_sum;
    std::vector<nn::Tensor<S>> gskip;
    std::vector<S> gshift;
    nn::ColBuffer<S> colbuf;
};

template <typename S>
class UNet {
public:
    explicit UNet(const UNetConfig& cfg);

    const UNetConfig& config() const { return cfg_; }
    std::size_t param_count() const { return theta_.size(); }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }
    std::vector<S>& params() { return theta_; }
    const std::vector<S>& params() const { return theta_; }

    /// Deterministic He-style initialization; the output head stays zero.
    void init_params(std::uint64_t seed);

    /// x must be [in_channels, H, W] with H and W divisible by 2^depth.
    /// emb must have time_dim entries. Returns a reference into ws.
    const nn::Tensor<S>& forward(const nn::Tensor<S>& x, const std::vector<double>& emb,
                                 Workspace<S>& ws) const;

    /// Accumulates parameter gradients into grad (layout of params()) and
    /// returns the gradient with respect to the forward input.
    nn::Tensor<S> backward(const nn::Tensor<S>& g_out, Workspace<S>& ws, S* grad) const;

    int extent_divisor() const { return 1 << cfg_.depth; }

private:
    void block_forward(const detail::BlockDesc& bd, BlockTape<S>& tape, Workspace<S>& ws) const;
    void block_backward(const detail::BlockDesc& bd, const BlockTape<S>& tape,
                        const nn::Tensor<S>& g_out, nn::Tensor<S>& g_in, S* grad,
                        Workspace<S>& ws) const;

    UNetConfig cfg_;
    std::vector<S> theta_;
    std::vector<ParamBlock> blocks_;
    std::vector<detail::BlockDesc> enc_, dec_;
    std::vector<nn::ConvDesc> up_;
    nn::ConvDesc head_;
};

/// Converts a complex image to a [2, H, W] tensor, dividing by scale.
template <typename S>
nn::Tensor<S> complex_to_tensor(const ComplexImage& x, double scale);

/// Inverse of complex_to_tensor: multiplies by scale.
template <typename S>
ComplexImage tensor_to_complex(const nn::Tensor<S>& t, double scale);

/// RestorationModel backed by a UNet. apply() normalizes its input by the
/// input's own max magnitude (so the network always sees values in [-1, 1]),
/// mirror-pads to a divisible extent when needed, and rescales the output
/// back. The same normalization is used by the trainer, which keeps
/// single-step sampling and direct application interchangeable.
template <typename S>
class ReferenceUNet : public RestorationModel {
public:
    ReferenceUNet(const UNetConfig& cfg, std::uint64_t init_seed);
    explicit ReferenceUNet(UNet<S> net);

    ComplexImage apply(const ComplexImage& x_t, int t, int total_steps) const override;
    std::string kind() const override;

    UNet<S>& net() { return net_; }
    const UNet<S>& net() const { return net_; }

private:
    UNet<S> net_;
};

/// Scale factor used to normalize network inputs: max |x|, or 1 for an
/// all-zero image.
double input_scale(const ComplexImage& x);

} // namespace kcd
