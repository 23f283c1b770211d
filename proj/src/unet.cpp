#include "sinterp/unet.hpp"

#include "byte_io.hpp"
#include "sinterp/error.hpp"
#include "sinterp/ops.hpp"
#include "sinterp/rng.hpp"

#include <cmath>

namespace sinterp {

namespace {

constexpr Stride2d kBothAxes{2, 2};
constexpr Stride2d kAngleAxis{2, 1};
constexpr std::int64_t kSkipBlocks = 4;
constexpr std::int64_t kAngleOnlyBlocks = 2;

Tensor he_uniform(Shape shape, double fan_in, std::uint64_t seed)
{
    Rng rng(seed);
    const double bound = std::sqrt(6.0 / fan_in);
    std::vector<float> data(static_cast<std::size_t>(numel(shape)));
    for (auto& v : data)
        v = static_cast<float>(rng.uniform(-bound, bound));
    return Tensor(std::move(shape), std::move(data));
}

Stride2d up_stride(std::size_t block) { return block < kSkipBlocks ? kBothAxes : kAngleAxis; }

} // namespace

UNetConfig UNetConfig::reduced(std::int64_t base)
{
    UNetConfig c;
    c.base_channels = base;
    c.bottleneck_channels = 16 * base;
    return c;
}

void UNetConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ValidationError("UNetConfig: " + msg); };
    if (base_channels < 1 || bottleneck_channels < 1)
        fail("channel counts must be positive");
    if (depth != 4)
        fail("contracting path has exactly 4 blocks, got depth=" + std::to_string(depth));
    if (up_blocks != 7)
        fail("expanding path has exactly 7 blocks, got up_blocks=" + std::to_string(up_blocks));
    if (out_angles != 4 * in_angles)
        fail("out_angles must be 4 x in_angles, got " + std::to_string(out_angles) + " vs "
             + std::to_string(in_angles));
    if (in_angles < 16 || in_angles % 16)
        fail("in_angles must be a positive multiple of 16 (four 2x2 poolings), got " + std::to_string(in_angles));
    if (detector_bins < 16 || detector_bins % 16)
        fail("detector_bins must be a positive multiple of 16 (four 2x2 poolings), got "
             + std::to_string(detector_bins));
}

UNet::UNet(const UNetConfig& config, std::uint64_t seed) : config_(config), seed_(seed)
{
    config_.validate();
    const auto base = config_.base_channels;
    std::int64_t in = 1;
    for (std::int64_t block = 0; block < config_.depth; ++block) {
        const auto out = base << block;
        const auto prefix = "down" + std::to_string(block);
        down_.push_back(add_conv(prefix + ".conv0", in, out, 3));
        down_.push_back(add_conv(prefix + ".conv1", out, out, 3));
        in = out;
    }
    bottleneck_.push_back(add_conv("bottleneck.conv0", in, config_.bottleneck_channels, 3));
    bottleneck_.push_back(add_conv("bottleneck.conv1", config_.bottleneck_channels, config_.bottleneck_channels, 3));
    in = config_.bottleneck_channels;
    for (std::int64_t block = 0; block < kSkipBlocks + kAngleOnlyBlocks; ++block) {
        const auto out = block < kSkipBlocks ? base << (kSkipBlocks - 1 - block) : base;
        const auto prefix = "up" + std::to_string(block);
        up_.push_back(add_upconv(prefix + ".upconv", in, out));
        const auto conv_in = block < kSkipBlocks ? 2 * out : out;
        up_.push_back(add_conv(prefix + ".conv0", conv_in, out, 3));
        up_.push_back(add_conv(prefix + ".conv1", out, out, 3));
        in = out;
    }
    head_ = add_conv("head", in, 1, 1);
}

UNet::ConvLayer UNet::add_conv(const std::string& name, std::int64_t in, std::int64_t out, std::int64_t k)
{
    const auto index = params_.size();
    params_.emplace_back(name + ".weight",
                         he_uniform({out, in, k, k}, static_cast<double>(in * k * k),
                                    derive_seed(seed_, Stream::WeightInit, index)));
    params_.emplace_back(name + ".bias", Tensor::zeros({out}));
    return {index, index + 1};
}

UNet::ConvLayer UNet::add_upconv(const std::string& name, std::int64_t in, std::int64_t out)
{
    // Each output pixel of a stride-2 axis sees one tap along that axis.
    const auto block = up_.size() / 3;
    const auto stride = up_stride(block);
    const double taps = 4.0 / static_cast<double>(stride.h * stride.w);
    const auto index = params_.size();
    params_.emplace_back(name + ".weight", he_uniform({in, out, 2, 2}, static_cast<double>(in) * taps,
                                                      derive_seed(seed_, Stream::WeightInit, index)));
    params_.emplace_back(name + ".bias", Tensor::zeros({out}));
    return {index, index + 1};
}

Tensor UNet::apply(const ConvLayer& layer, const Tensor& x) const
{
    return conv2d(x, params_[layer.weight].value, params_[layer.bias].value);
}

Tensor UNet::forward(const Tensor& input, const std::function<void(const Shape&)>& on_concat) const
{
    if (input.ndim() != 4 || input.dim(1) != 1)
        throw ShapeError("UNet: expected [B,1,angles,bins] input, got " + to_string(input.shape()));
    if (input.dim(2) % 16 || input.dim(3) % 16)
        throw ShapeError("UNet: angles and detector bins must be multiples of 16 (four 2x2 poolings), got "
                         + to_string(input.shape()));

    std::vector<Tensor> skips;
    Tensor h = input;
    for (std::size_t block = 0; block < down_.size() / 2; ++block) {
        h = relu(apply(down_[2 * block], h));
        h = relu(apply(down_[2 * block + 1], h));
        skips.push_back(h);
        h = avgpool2x2(h);
    }
    h = relu(apply(bottleneck_[0], h));
    h = relu(apply(bottleneck_[1], h));
    for (std::size_t block = 0; block < up_.size() / 3; ++block) {
        const auto& up = up_[3 * block];
        h = conv_transpose2d(h, params_[up.weight].value, params_[up.bias].value, up_stride(block));
        if (block < kSkipBlocks) {
            const auto& skip = skips[skips.size() - 1 - block];
            if (on_concat) {
                Shape s = skip.shape();
                on_concat(s);
            }
            h = concat_channels(h, skip);
        }
        h = relu(apply(up_[3 * block + 1], h));
        h = relu(apply(up_[3 * block + 2], h));
    }
    return apply(head_, h);
}

Tensor UNet::infer(const Tensor& input) const
{
    NoGradGuard no_grad;
    Tensor out = forward(input).detach();
    for (auto& v : out.mutable_data())
        v = v > 0.0f ? v : 0.0f;
    return out;
}

std::int64_t UNet::parameter_count() const noexcept
{
    std::int64_t n = 0;
    for (const auto& p : params_)
        n += p.value.numel();
    return n;
}

void UNet::set_normalization(NormalizationMode mode, double constant)
{
    normalization_ = mode;
    normalization_constant_ = constant;
}

namespace {
constexpr char kCheckpointMagic[4] = {'S', 'P', 'C', 'K'};
constexpr std::uint8_t kCheckpointVersion = 1;
} // namespace

std::vector<std::uint8_t> encode_checkpoint(const UNet& model)
{
    detail::ByteWriter w;
    for (char c : kCheckpointMagic)
        w.u8(static_cast<std::uint8_t>(c));
    w.u8(kCheckpointVersion);
    w.u8(0);
    w.u8(0);
    w.u8(0);
    const auto& c = model.config();
    for (auto v : {c.base_channels, c.depth, c.up_blocks, c.in_angles, c.out_angles, c.detector_bins,
                   c.bottleneck_channels})
        w.u32(static_cast<std::uint32_t>(v));
    w.u32(static_cast<std::uint32_t>(model.normalization()));
    w.f64(model.normalization_constant());
    w.u32(static_cast<std::uint32_t>(model.parameters().size()));
    for (const auto& p : model.parameters()) {
        w.u32(static_cast<std::uint32_t>(p.name.size()));
        w.text(p.name);
        w.u32(static_cast<std::uint32_t>(p.value.ndim()));
        for (auto d : p.value.shape())
            w.u32(static_cast<std::uint32_t>(d));
        for (float v : p.value.data())
            w.f32(v);
    }
    return w.take();
}

UNet decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& context)
{
    detail::ByteReader r(bytes, context);
    if (bytes.size() < 4 || !std::equal(kCheckpointMagic, kCheckpointMagic + 4, bytes.begin()))
        throw FormatError(FormatErrorCode::BadMagic, 0, context + ": not a checkpoint (magic mismatch)");
    r.raw(4, "magic");
    const auto version = r.u8("version");
    if (version != kCheckpointVersion)
        throw FormatError(FormatErrorCode::UnsupportedVersion, 4,
                          context + ": checkpoint version " + std::to_string(version) + " is not supported (expected "
                              + std::to_string(kCheckpointVersion) + ")");
    r.raw(3, "padding");
    UNetConfig config;
    for (auto* field : {&config.base_channels, &config.depth, &config.up_blocks, &config.in_angles,
                        &config.out_angles, &config.detector_bins, &config.bottleneck_channels})
        *field = r.u32("config");
    const auto mode = r.u32("normalization mode");
    if (mode != static_cast<std::uint32_t>(NormalizationMode::PerSinogramMax))
        throw FormatError(FormatErrorCode::BadField, r.offset() - 4,
                          context + ": unknown normalization mode " + std::to_string(mode));
    const double constant = r.f64("normalization constant");

    UNet model = [&] {
        try {
            return UNet(config);
        } catch (const ValidationError& e) {
            throw FormatError(FormatErrorCode::BadField, 8, context + ": embedded config invalid: " + e.what());
        }
    }();
    model.set_normalization(NormalizationMode::PerSinogramMax, constant);

    const auto count = r.u32("parameter count");
    if (count != model.parameters().size())
        throw FormatError(FormatErrorCode::ShapeMismatch, r.offset() - 4,
                          context + ": " + std::to_string(count) + " parameters stored, config implies "
                              + std::to_string(model.parameters().size()));
    for (auto& p : model.parameters()) {
        const auto name_offset = r.offset();
        const auto name_len = r.u32("parameter name length");
        auto name_bytes = r.raw(name_len, "parameter name");
        const std::string name(name_bytes.begin(), name_bytes.end());
        if (name != p.name)
            throw FormatError(FormatErrorCode::ShapeMismatch, name_offset,
                              context + ": expected parameter '" + p.name + "', found '" + name + "'");
        const auto ndim = r.u32("parameter rank");
        Shape shape;
        for (std::uint32_t i = 0; i < ndim && i < 8; ++i)
            shape.push_back(r.u32("parameter dims"));
        if (shape != p.value.shape())
            throw FormatError(FormatErrorCode::ShapeMismatch, r.offset(),
                              context + ": parameter '" + name + "' stored as " + to_string(shape)
                                  + " but config implies " + to_string(p.value.shape()));
        r.need(4 * static_cast<std::uint64_t>(p.value.numel()), "parameter values");
        for (auto& v : p.value.mutable_data())
            v = r.f32("parameter values");
    }
    if (r.remaining() != 0)
        throw FormatError(FormatErrorCode::LengthMismatch, r.offset(),
                          context + ": " + std::to_string(r.remaining()) + " trailing bytes");
    return model;
}

void save_checkpoint(const UNet& model, const std::filesystem::path& path)
{
    detail::write_file(path, encode_checkpoint(model));
}

UNet load_checkpoint(const std::filesystem::path& path)
{
    const auto bytes = detail::read_file(path);
    return decode_checkpoint(bytes, path.string());
}

} // namespace sinterp
