#include "sinterp/dataset.hpp"

#include "sinterp/error.hpp"

#include <cstdio>
#include <exception>
#include <string>

namespace sinterp {

namespace {

ProjectionGeometry views(std::int64_t n)
{
    ProjectionGeometry g;
    g.n_angles = n;
    return g;
}

std::string item_name(const char* prefix, std::uint64_t index)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%06llu.sptb", prefix, static_cast<unsigned long long>(index));
    return buf;
}

} // namespace

SamplePair make_sample(const PhantomRecipe& recipe, std::uint64_t index, NoiseLevel level, std::int64_t input_angles,
                       std::int64_t target_angles)
{
    SamplePair pair;
    pair.phantom = generate_phantom(recipe, index);
    pair.target = project(pair.phantom, views(target_angles));
    pair.input = apply_poisson(project(pair.phantom, views(input_angles)), level,
                               derive_seed(recipe.seed, Stream::Noise, index));
    return pair;
}

NoiseLevel dataset_noise(const DatasetSpec& spec, std::uint64_t index)
{
    return spec.noise ? *spec.noise : kNoiseLevels[index % kNoiseLevels.size()];
}

std::vector<ManifestEntry> make_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir)
{
    spec.recipe.validate();
    if (spec.count < 1)
        throw ValidationError("make_dataset: count must be positive, got " + std::to_string(spec.count));
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError(out_dir.string(), "cannot create directory: " + ec.message());

    // Build the shared matrices up front rather than racing inside the loop.
    const auto n = spec.recipe.size;
    for (auto angles : {spec.input_angles, spec.target_angles})
        system_matrix(n, n, 1.0, view_angles(views(angles)), n, 1.0, 0.5);

    std::vector<ManifestEntry> entries(static_cast<std::size_t>(spec.count));
    std::vector<std::exception_ptr> errors(entries.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t k = 0; k < spec.count; ++k) {
        const auto index = spec.first_index + static_cast<std::uint64_t>(k);
        try {
            const auto level = dataset_noise(spec, index);
            const auto pair = make_sample(spec.recipe, index, level, spec.input_angles, spec.target_angles);
            ManifestEntry e;
            e.input = item_name("input", index);
            e.target = item_name("target", index);
            e.phantom = item_name("phantom", index);
            e.seed = spec.recipe.seed;
            e.index = index;
            e.noise = to_string(level);
            write_tomo(out_dir / e.input, pair.input);
            write_tomo(out_dir / e.target, pair.target);
            write_tomo(out_dir / e.phantom, pair.phantom);
            entries[static_cast<std::size_t>(k)] = std::move(e);
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    write_manifest(out_dir / "manifest.jsonl", entries);
    for (auto& e : entries)
        for (auto* p : {&e.input, &e.target, &e.phantom})
            *p = out_dir / *p;
    return entries;
}

} // namespace sinterp
