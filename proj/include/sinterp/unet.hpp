#pragma once

#include "sinterp/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace sinterp {

/// Hyperparameters of the angle-quadrupling U-Net.
///
/// Contracting path: four blocks of two 3x3 conv+ReLU followed by 2x2 average
/// pooling, at base x {1, 2, 4, 8} channels. Bottleneck: two 3x3 conv+ReLU.
/// Expanding path: seven blocks. Blocks 1-4 upsample both axes with a stride
/// (2,2) transposed conv, concatenate the contracting-path feature map of the
/// same resolution and apply two 3x3 conv+ReLU at base x {8, 4, 2, 1}
/// channels. Blocks 5-6 upsample the angle axis only, stride (2,1), with no
/// skip connection. Block 7 is a linear 1x1 conv to one channel.
///
/// The bottleneck width, the transposed-conv kernel (2x2) and the stride
/// assignment of blocks 5-6 are reconstructions: they are the choices that
/// make a 32 x D input come out as 128 x D with 2x2 pooling.
struct UNetConfig
{
    std::int64_t base_channels = 32;
    std::int64_t depth = 4;
    std::int64_t up_blocks = 7;
    std::int64_t in_angles = 32;
    std::int64_t out_angles = 128;
    std::int64_t detector_bins = 128;
    std::int64_t bottleneck_channels = 512;

    /// Reduced-width model: base channels `base` with the bottleneck kept at
    /// 16 x base.
    static UNetConfig reduced(std::int64_t base);

    /// Throws ValidationError when an invariant fails.
    void validate() const;

    bool operator==(const UNetConfig&) const = default;
};

/// How inputs were scaled for training; stored alongside the weights.
enum class NormalizationMode : std::uint32_t
{
    PerSinogramMax = 0,
};

class UNet
{
public:
    /// He-uniform kernels and zero biases, drawn from `seed`.
    explicit UNet(const UNetConfig& config, std::uint64_t seed = 0);

    const UNetConfig& config() const noexcept { return config_; }

    /// [B,1,A,D] -> [B,1,4A,D]; A and D must be multiples of 16. Records a
    /// graph when grad mode is on. Linear head, no clamping.
    /// `on_concat`, when set, sees the shape of every skip-concatenated tensor.
    Tensor forward(const Tensor& input, const std::function<void(const Shape&)>& on_concat = {}) const;

    /// Inference: no graph, negatives clamped to zero.
    Tensor infer(const Tensor& input) const;

    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }
    std::int64_t parameter_count() const noexcept;

    NormalizationMode normalization() const noexcept { return normalization_; }
    double normalization_constant() const noexcept { return normalization_constant_; }
    void set_normalization(NormalizationMode mode, double constant);

private:
    struct ConvLayer
    {
        std::size_t weight;
        std::size_t bias;
    };

    ConvLayer add_conv(const std::string& name, std::int64_t in, std::int64_t out, std::int64_t k);
    ConvLayer add_upconv(const std::string& name, std::int64_t in, std::int64_t out);
    Tensor apply(const ConvLayer& layer, const Tensor& x) const;

    UNetConfig config_;
    std::uint64_t seed_;
    std::vector<Parameter> params_;
    std::vector<ConvLayer> down_;       // 2 per block
    std::vector<ConvLayer> bottleneck_; // 2
    std::vector<ConvLayer> up_;         // 1 upconv + 2 conv per block, blocks 1-6
    ConvLayer head_{};
    NormalizationMode normalization_ = NormalizationMode::PerSinogramMax;
    double normalization_constant_ = 1.0;
};

/// Binary checkpoint, little-endian:
///
///   "SPCK"  magic, 4 bytes
///   u8      format version (1)
///   3 x u8  zero
///   7 x u32 base, depth, up_blocks, in_angles, out_angles, detector_bins, bottleneck
///   u32     normalization mode
///   f64     normalization constant
///   u32     parameter count
///   per parameter, in model order:
///     u32 name length, name bytes, u32 ndim, ndim x u32 dims, f32 values
void save_checkpoint(const UNet& model, const std::filesystem::path& path);
UNet load_checkpoint(const std::filesystem::path& path);

/// Checkpoint bytes without touching the filesystem.
std::vector<std::uint8_t> encode_checkpoint(const UNet& model);
UNet decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& context = "checkpoint");

} // namespace sinterp
