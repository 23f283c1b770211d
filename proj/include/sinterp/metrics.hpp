#pragma once

#include "sinterp/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace sinterp {

/// Mean squared difference. ShapeError on extent mismatch.
double mse(const GridView& ref, const GridView& est);

/// 10 log10(peak^2 / mse); +inf when mse == 0.
double psnr(const GridView& ref, const GridView& est, double peak = 1.0);

struct MapeResult
{
    double percent = 0.0;
    std::int64_t masked = 0; // bins with ref <= 1e-6 * max(ref)
};

/// 100 * mean |est - ref| / ref over bins with ref > 1e-6 * max(ref).
/// ValidationError when every bin is masked.
MapeResult mape(const GridView& ref, const GridView& est);

struct SsimParams
{
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Mean SSIM over every window position that fits entirely inside the image
/// (no padding), Gaussian-weighted statistics. Separable filtering, parallel
/// over rows.
double ssim(const GridView& ref, const GridView& est, const SsimParams& params = {});

namespace reference {
/// Direct 2-D window sums, serial.
double ssim(const GridView& ref, const GridView& est, const SsimParams& params = {});
} // namespace reference

struct MetricsReport
{
    double mape = 0.0; // percent
    double mse = 0.0;
    double ssim = 0.0;
    double psnr = 0.0; // dB, +inf for identical inputs
    std::int64_t masked_bins = 0;
    std::string reference;
    std::string estimate;
    std::string noise;
};

/// All four metrics after dividing both inputs by max(ref) (when positive),
/// so that the peak is 1 and the MSE is dimensionless.
MetricsReport score(const GridView& ref, const GridView& est);

/// Mean of every numeric field; psnr averages finite entries and is +inf
/// when all entries are.
MetricsReport mean_report(const std::vector<MetricsReport>& reports);

nlohmann::ordered_json to_json(const MetricsReport& report);

/// Noise | MAPE | MSE | SSIM | PSNR, one row per report labelled by its
/// noise field.
std::string denoising_table(const std::vector<MetricsReport>& rows);

/// Noise Level | Standard MSE SSIM PSNR | Proposed MSE SSIM PSNR.
std::string reconstruction_table(const std::vector<MetricsReport>& standard,
                                 const std::vector<MetricsReport>& proposed);

} // namespace sinterp
