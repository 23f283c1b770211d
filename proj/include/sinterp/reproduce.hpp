#pragma once

#include "sinterp/image.hpp"
#include "sinterp/metrics.hpp"
#include "sinterp/noise.hpp"
#include "sinterp/recon.hpp"
#include "sinterp/unet.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace sinterp {

/// End-to-end experiment on the Shepp-Logan phantom: clean dense-view and
/// noisy sparse-view sinograms, model interpolation, OSEM of both arms.
struct ReproduceOptions
{
    std::vector<NoiseLevel> levels{kNoiseLevels.begin(), kNoiseLevels.end()};
    std::uint64_t seed = 0;
    ReconConfig recon;
};

struct ReproduceRow
{
    NoiseLevel level = NoiseLevel::Low;
    Sinogram noisy;         // sparse views, Poisson noise
    Sinogram predicted;     // model output, dense views
    Image standard;         // OSEM(noisy)
    Image proposed;         // OSEM(predicted)
    MetricsReport denoised; // predicted vs clean dense sinogram
    MetricsReport baseline; // nearest-angle replication vs clean dense sinogram
    MetricsReport standard_image;
    MetricsReport proposed_image;
};

struct ReproduceResult
{
    Image phantom;
    Sinogram clean; // dense views
    std::vector<ReproduceRow> rows;
};

/// Phantom size, view counts and detector width come from the model config.
/// Noise for level k is drawn from derive_seed(seed, Stream::Noise, k).
ReproduceResult reproduce(const UNet& model, const ReproduceOptions& options);

/// Denoising table, reconstruction table and the baseline rows as text.
std::string reproduce_tables(const ReproduceResult& result);
nlohmann::ordered_json to_json(const ReproduceResult& result);

/// JSON report, tables and PGM figures (phantom, sinograms, both
/// reconstructions per level) into `dir`.
void write_reproduction(const ReproduceResult& result, const std::filesystem::path& dir);

} // namespace sinterp
