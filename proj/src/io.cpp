#include "sinterp/io.hpp"

#include "byte_io.hpp"
#include "sinterp/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace sinterp {

namespace {

constexpr char kMagicPrefix[4] = {'S', 'P', 'T', 'B'};
constexpr char kVersion[4] = {'0', '0', '0', '1'};
constexpr std::uint8_t kKindImage = 0;
constexpr std::uint8_t kKindSinogram = 1;
constexpr std::uint8_t kDtypeF32 = 0;
// Larger grids are almost certainly a corrupt header.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

void write_header(detail::ByteWriter& w, std::uint8_t kind, std::uint32_t d0, std::uint32_t d1, double g0, double g1,
                  double g2)
{
    for (char c : kMagicPrefix)
        w.u8(static_cast<std::uint8_t>(c));
    for (char c : kVersion)
        w.u8(static_cast<std::uint8_t>(c));
    w.u8(kind);
    w.u8(kDtypeF32);
    w.u8(2);
    w.u8(0);
    w.u32(d0);
    w.u32(d1);
    w.f64(g0);
    w.f64(g1);
    w.f64(g2);
}

std::uint32_t checked_dim(std::int64_t v, const char* what)
{
    if (v < 1 || v > std::numeric_limits<std::uint32_t>::max())
        throw ValidationError(std::string("encode_tomo: ") + what + " out of range: " + std::to_string(v));
    return static_cast<std::uint32_t>(v);
}

} // namespace

std::vector<std::uint8_t> encode_tomo(const Image& image)
{
    image.validate();
    detail::ByteWriter w;
    write_header(w, kKindImage, checked_dim(image.height, "height"), checked_dim(image.width, "width"),
                 image.pixel_size, 0.0, 0.0);
    for (float v : image.data)
        w.f32(v);
    return w.take();
}

std::vector<std::uint8_t> encode_tomo(const Sinogram& sinogram)
{
    sinogram.validate();
    detail::ByteWriter w;
    write_header(w, kKindSinogram, checked_dim(sinogram.n_angles, "angles"), checked_dim(sinogram.n_bins, "bins"),
                 sinogram.start_angle_deg, sinogram.angular_range_deg, sinogram.bin_width);
    for (float v : sinogram.data)
        w.f32(v);
    return w.take();
}

TomoData decode_tomo(std::span<const std::uint8_t> bytes, const std::string& context)
{
    using enum FormatErrorCode;
    detail::ByteReader r(bytes, context);
    const auto magic = r.raw(8, "magic");
    if (!std::equal(kMagicPrefix, kMagicPrefix + 4, magic.begin()))
        throw FormatError(BadMagic, 0, context + ": not an SPTB file (bad magic)");
    if (!std::equal(kVersion, kVersion + 4, magic.begin() + 4))
        throw FormatError(UnsupportedVersion, 4,
                          context + ": SPTB version '" + std::string(magic.begin() + 4, magic.end())
                              + "' is not supported (expected 0001)");
    const auto kind = r.u8("kind");
    if (kind != kKindImage && kind != kKindSinogram)
        throw FormatError(BadField, 8, context + ": unknown kind " + std::to_string(kind));
    const auto dtype = r.u8("dtype");
    if (dtype != kDtypeF32)
        throw FormatError(BadField, 9, context + ": unsupported dtype " + std::to_string(dtype));
    const auto ndim = r.u8("ndim");
    if (ndim != 2)
        throw FormatError(BadField, 10, context + ": expected 2 dims, header says " + std::to_string(ndim));
    r.u8("pad");
    const auto d0 = r.u32("dims");
    const auto d1 = r.u32("dims");
    if (d0 == 0 || d1 == 0)
        throw FormatError(BadField, 12, context + ": zero extent in dims");
    const std::uint64_t count = std::uint64_t{d0} * d1;
    if (count > kMaxElements)
        throw FormatError(DimOverflow, 12,
                          context + ": dims " + std::to_string(d0) + "x" + std::to_string(d1)
                              + " exceed the 2^31 element limit");
    const double g0 = r.f64("geometry"), g1 = r.f64("geometry"), g2 = r.f64("geometry");
    const std::uint64_t payload = 4 * count;
    if (r.remaining() < payload)
        throw FormatError(Truncated, r.offset(),
                          context + ": truncated payload, header promises " + std::to_string(payload) + " bytes, "
                              + std::to_string(r.remaining()) + " present");
    if (r.remaining() > payload)
        throw FormatError(LengthMismatch, r.offset() + payload,
                          context + ": " + std::to_string(r.remaining() - payload) + " bytes after the payload");
    std::vector<float> data(count);
    for (auto& v : data)
        v = r.f32("payload");

    try {
        if (kind == kKindImage) {
            Image img;
            img.height = d0;
            img.width = d1;
            img.pixel_size = g0;
            img.data = std::move(data);
            img.validate();
            return img;
        }
        Sinogram s;
        s.n_angles = d0;
        s.n_bins = d1;
        s.start_angle_deg = g0;
        s.angular_range_deg = g1;
        s.bin_width = g2;
        s.data = std::move(data);
        s.validate();
        return s;
    } catch (const ValidationError& e) {
        throw FormatError(BadField, 12, context + ": " + e.what());
    }
}

void write_tomo(const std::filesystem::path& path, const Image& image)
{
    detail::write_file(path, encode_tomo(image));
}

void write_tomo(const std::filesystem::path& path, const Sinogram& sinogram)
{
    detail::write_file(path, encode_tomo(sinogram));
}

TomoData read_tomo(const std::filesystem::path& path)
{
    const auto bytes = detail::read_file(path);
    return decode_tomo(bytes, path.string());
}

Image read_image(const std::filesystem::path& path)
{
    auto data = read_tomo(path);
    if (auto* img = std::get_if<Image>(&data))
        return std::move(*img);
    throw ValidationError(path.string() + ": expected an image, file holds a sinogram");
}

Sinogram read_sinogram(const std::filesystem::path& path)
{
    auto data = read_tomo(path);
    if (auto* s = std::get_if<Sinogram>(&data))
        return std::move(*s);
    throw ValidationError(path.string() + ": expected a sinogram, file holds an image");
}

Sinogram import_raw(const std::filesystem::path& path, std::int64_t n_angles, std::int64_t n_bins, RawDtype dtype,
                    double start_angle_deg, double angular_range_deg, double bin_width)
{
    if (n_angles < 1 || n_bins < 1)
        throw ValidationError("import_raw: angles and bins must be positive");
    const std::uint64_t width = dtype == RawDtype::F32LE ? 4 : 2;
    const auto bytes = detail::read_file(path);
    const std::uint64_t expected = static_cast<std::uint64_t>(n_angles) * static_cast<std::uint64_t>(n_bins) * width;
    if (bytes.size() != expected)
        throw FormatError(FormatErrorCode::LengthMismatch, std::min<std::uint64_t>(bytes.size(), expected),
                          path.string() + ": expected " + std::to_string(expected) + " bytes for " + std::to_string(n_angles)
                              + "x" + std::to_string(n_bins) + ", file has " + std::to_string(bytes.size()));
    Sinogram s = Sinogram::zeros(n_angles, n_bins, start_angle_deg, angular_range_deg, bin_width);
    detail::ByteReader r(bytes, path.string());
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        const auto offset = r.offset();
        const float v = dtype == RawDtype::F32LE ? r.f32("samples") : static_cast<float>(r.u16("samples"));
        if (!std::isfinite(v) || v < 0.0f)
            throw FormatError(FormatErrorCode::NegativeValue, offset,
                              path.string() + ": sample " + std::to_string(i) + " is " + std::to_string(v)
                                  + ", counts must be finite and nonnegative");
        s.data[i] = v;
    }
    s.validate();
    return s;
}

std::vector<std::uint8_t> encode_pgm(const GridView& grid)
{
    if (grid.rows < 1 || grid.cols < 1 || grid.data.size() != static_cast<std::size_t>(grid.rows * grid.cols))
        throw ValidationError("export_pgm: grid extents do not match data");
    float lo = std::numeric_limits<float>::infinity(), hi = -lo;
    for (float v : grid.data) {
        if (!std::isfinite(v))
            throw ValidationError("export_pgm: data contains non-finite values");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const std::string header = "P5\n" + std::to_string(grid.cols) + " " + std::to_string(grid.rows) + "\n65535\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + 2 * grid.data.size());
    const double range = static_cast<double>(hi) - lo;
    for (float v : grid.data) {
        std::uint16_t q = 32768;
        if (range > 0.0)
            q = static_cast<std::uint16_t>(std::lround((static_cast<double>(v) - lo) / range * 65535.0));
        out.push_back(static_cast<std::uint8_t>(q >> 8));
        out.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
    return out;
}

void export_pgm(const GridView& grid, const std::filesystem::path& path)
{
    detail::write_file(path, encode_pgm(grid));
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries)
{
    std::string text;
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["input"] = e.input.generic_string();
        j["target"] = e.target.generic_string();
        j["phantom"] = e.phantom.generic_string();
        j["seed"] = e.seed;
        j["index"] = e.index;
        j["noise"] = e.noise;
        text += j.dump() + "\n";
    }
    detail::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError(path.string(), "cannot open manifest");
    const auto base = path.parent_path();
    std::vector<ManifestEntry> entries;
    std::string line;
    std::uint64_t line_no = 0, offset = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto line_offset = offset;
        offset += line.size() + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(FormatErrorCode::BadField, line_offset, where + ": invalid JSON: " + e.what());
        }
        auto field = [&](const char* key) -> std::string {
            if (!j.is_object() || !j.contains(key) || !j[key].is_string())
                throw FormatError(FormatErrorCode::BadField, line_offset,
                                  where + ": missing or non-string field '" + key + "'");
            return j[key].get<std::string>();
        };
        ManifestEntry e;
        e.input = base / field("input");
        e.target = base / field("target");
        e.phantom = base / field("phantom");
        e.noise = field("noise");
        if (!j.contains("seed") || !j["seed"].is_number_unsigned())
            throw FormatError(FormatErrorCode::BadField, line_offset,
                              where + ": missing or non-integer field 'seed'");
        e.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("index")) {
            if (!j["index"].is_number_unsigned())
                throw FormatError(FormatErrorCode::BadField, line_offset, where + ": non-integer field 'index'");
            e.index = j["index"].get<std::uint64_t>();
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

} // namespace sinterp
