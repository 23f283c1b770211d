#pragma once

#include "sinterp/io.hpp"
#include "sinterp/noise.hpp"
#include "sinterp/phantom.hpp"
#include "sinterp/projector.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace sinterp {

struct DatasetSpec
{
    PhantomRecipe recipe;
    std::int64_t count = 0;
    /// nullopt mixes levels: item i gets kNoiseLevels[i % 3].
    std::optional<NoiseLevel> noise = NoiseLevel::Low;
    std::uint64_t first_index = 0;
    std::int64_t input_angles = 32;
    std::int64_t target_angles = 128;
};

/// Clean target (target_angles views) and noisy input (input_angles views)
/// for phantom `index`. Noise is drawn from derive_seed(seed, Stream::Noise,
/// index).
struct SamplePair
{
    Image phantom;
    Sinogram input;
    Sinogram target;
};
SamplePair make_sample(const PhantomRecipe& recipe, std::uint64_t index, NoiseLevel level,
                       std::int64_t input_angles = 32, std::int64_t target_angles = 128);

NoiseLevel dataset_noise(const DatasetSpec& spec, std::uint64_t index);

/// Writes {input,target,phantom}_NNNNNN.sptb for every item plus
/// manifest.jsonl into out_dir (created if missing) and returns the entries
/// with paths resolved against out_dir, as read_manifest would.
/// Items are generated in parallel; output bytes do not depend on the thread
/// count.
std::vector<ManifestEntry> make_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

} // namespace sinterp
