#include "sinterp/reproduce.hpp"

#include "byte_io.hpp"
#include "sinterp/phantom.hpp"
#include "sinterp/projector.hpp"
#include "sinterp/rng.hpp"
#include "sinterp/trainer.hpp"

#include <algorithm>

namespace sinterp {

ReproduceResult reproduce(const UNet& model, const ReproduceOptions& options)
{
    options.recon.validate();
    const auto& cfg = model.config();
    ReproduceResult result;
    result.phantom = shepp_logan(cfg.detector_bins);
    ProjectionGeometry dense;
    dense.n_angles = cfg.out_angles;
    ProjectionGeometry sparse;
    sparse.n_angles = cfg.in_angles;
    result.clean = project(result.phantom, dense);
    const Sinogram clean_sparse = project(result.phantom, sparse);

    for (auto level : options.levels) {
        ReproduceRow row;
        row.level = level;
        const auto k = static_cast<std::uint64_t>(std::find(kNoiseLevels.begin(), kNoiseLevels.end(), level)
                                                  - kNoiseLevels.begin());
        row.noisy = apply_poisson(clean_sparse, level, derive_seed(options.seed, Stream::Noise, k));
        row.predicted = predict(model, row.noisy);
        row.standard = osem(row.noisy, options.recon);
        row.proposed = osem(row.predicted, options.recon);
        row.denoised = score(result.clean.view(), row.predicted.view());
        row.baseline = score(result.clean.view(), nearest_angle_upsample(row.noisy).view());
        row.standard_image = score(result.phantom.view(), row.standard.view());
        row.proposed_image = score(result.phantom.view(), row.proposed.view());
        for (auto* r : {&row.denoised, &row.baseline, &row.standard_image, &row.proposed_image})
            r->noise = to_string(level);
        row.denoised.estimate = "model";
        row.baseline.estimate = "nearest-angle";
        row.standard_image.estimate = "osem(noisy sparse)";
        row.proposed_image.estimate = "osem(model)";
        result.rows.push_back(std::move(row));
    }
    return result;
}

std::string reproduce_tables(const ReproduceResult& result)
{
    std::vector<MetricsReport> denoised, baseline, standard, proposed;
    for (const auto& r : result.rows) {
        denoised.push_back(r.denoised);
        baseline.push_back(r.baseline);
        standard.push_back(r.standard_image);
        proposed.push_back(r.proposed_image);
    }
    return "Sinogram denoising (model vs clean dense views)\n" + denoising_table(denoised)
           + "\nNearest-angle replication (baseline)\n" + denoising_table(baseline)
           + "\nReconstruction (OSEM vs phantom)\n" + reconstruction_table(standard, proposed);
}

nlohmann::ordered_json to_json(const ReproduceResult& result)
{
    nlohmann::ordered_json j;
    j["phantom"] = "shepp-logan";
    j["size"] = result.phantom.width;
    j["dense_views"] = result.clean.n_angles;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : result.rows) {
        nlohmann::ordered_json row;
        row["noise"] = to_string(r.level);
        row["sparse_views"] = r.noisy.n_angles;
        row["sinogram"]["model"] = to_json(r.denoised);
        row["sinogram"]["baseline"] = to_json(r.baseline);
        row["image"]["standard"] = to_json(r.standard_image);
        row["image"]["proposed"] = to_json(r.proposed_image);
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j;
}

void write_reproduction(const ReproduceResult& result, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    auto text = [&](const std::string& name, const std::string& body) {
        detail::write_file(dir / name, std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
    };
    text("report.json", to_json(result).dump(2) + "\n");
    text("tables.txt", reproduce_tables(result));
    export_pgm(result.phantom.view(), dir / "phantom.pgm");
    export_pgm(result.clean.view(), dir / "sinogram_clean.pgm");
    for (const auto& r : result.rows) {
        const std::string level = to_string(r.level);
        export_pgm(r.noisy.view(), dir / ("sinogram_noisy_" + level + ".pgm"));
        export_pgm(r.predicted.view(), dir / ("sinogram_model_" + level + ".pgm"));
        export_pgm(r.standard.view(), dir / ("recon_standard_" + level + ".pgm"));
        export_pgm(r.proposed.view(), dir / ("recon_proposed_" + level + ".pgm"));
    }
}

} // namespace sinterp
