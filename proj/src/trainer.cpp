#include "sinterp/trainer.hpp"

#include "sinterp/error.hpp"
#include "sinterp/ops.hpp"
#include "sinterp/optim.hpp"
#include "sinterp/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <omp.h>

namespace sinterp {

// ---- normalization ----

Normalized normalize(const Sinogram& sino)
{
    float peak = 0.0f;
    for (float v : sino.data)
        peak = std::max(peak, v);
    if (!(peak > 0.0f))
        throw ValidationError("normalize: sinogram is all zero");
    Normalized out{sino, peak};
    for (auto& v : out.sinogram.data)
        v /= peak;
    return out;
}

Sinogram denormalize(const Sinogram& sino, double scale)
{
    Sinogram out = sino;
    const auto s = static_cast<float>(scale);
    for (auto& v : out.data)
        v *= s;
    return out;
}

// ---- configuration ----

void TrainConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ValidationError("TrainConfig: " + msg); };
    if (manifest.empty())
        fail("manifest is required");
    if (!(split > 0.0 && split <= 1.0))
        fail("split must be in (0, 1], got " + std::to_string(split));
    if (batch_size < 1)
        fail("batch_size must be at least 1, got " + std::to_string(batch_size));
    if (epochs < 1)
        fail("epochs must be at least 1, got " + std::to_string(epochs));
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        fail("learning_rate must be positive");
    if (loss != "mse")
        fail("only loss = mse is supported, got '" + loss + "'");
    if (base_channels < 1 || bottleneck_channels < 0)
        fail("channel counts must be positive");
    if (noise != "mixed" && !parse_noise_level(noise))
        fail("noise must be mixed, low, medium or high, got '" + noise + "'");
    if (max_steps < 0 || jobs < 0)
        fail("max_steps and jobs must be nonnegative");
}

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value, std::int64_t line)
{
    std::istringstream in(value);
    T out{};
    in >> out;
    if (!in || !in.eof())
        throw ValidationError("train config line " + std::to_string(line) + ": '" + key + "' expects a number, got '"
                              + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value, std::int64_t line)
{
    if (value == "true" || value == "1" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "no")
        return false;
    throw ValidationError("train config line " + std::to_string(line) + ": '" + key + "' expects true/false, got '"
                          + value + "'");
}

} // namespace

TrainConfig parse_train_config(const std::string& text, const std::filesystem::path& base_dir)
{
    TrainConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::int64_t line = 0;
    auto path_value = [&](const std::string& v) { return v.empty() ? std::filesystem::path{} : base_dir / v; };
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const auto content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (content.empty())
            continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos)
            throw ValidationError("train config line " + std::to_string(line) + ": expected key = value");
        const auto key = trim(content.substr(0, eq));
        const auto value = trim(content.substr(eq + 1));
        if (key == "manifest")
            cfg.manifest = path_value(value);
        else if (key == "val_manifest")
            cfg.val_manifest = path_value(value);
        else if (key == "split")
            cfg.split = parse_number<double>(key, value, line);
        else if (key == "batch_size")
            cfg.batch_size = parse_number<std::int64_t>(key, value, line);
        else if (key == "epochs")
            cfg.epochs = parse_number<std::int64_t>(key, value, line);
        else if (key == "learning_rate")
            cfg.learning_rate = parse_number<double>(key, value, line);
        else if (key == "seed")
            cfg.seed = parse_number<std::uint64_t>(key, value, line);
        else if (key == "loss")
            cfg.loss = value;
        else if (key == "normalization") {
            if (value != "per_sinogram_max")
                throw ValidationError("train config line " + std::to_string(line)
                                      + ": normalization must be per_sinogram_max, got '" + value + "'");
            cfg.normalization = NormalizationMode::PerSinogramMax;
        } else if (key == "base_channels")
            cfg.base_channels = parse_number<std::int64_t>(key, value, line);
        else if (key == "bottleneck_channels")
            cfg.bottleneck_channels = parse_number<std::int64_t>(key, value, line);
        else if (key == "checkpoint")
            cfg.checkpoint = path_value(value);
        else if (key == "history")
            cfg.history = path_value(value);
        else if (key == "max_steps")
            cfg.max_steps = parse_number<std::int64_t>(key, value, line);
        else if (key == "deterministic")
            cfg.deterministic = parse_bool(key, value, line);
        else if (key == "jobs")
            cfg.jobs = parse_number<int>(key, value, line);
        else if (key == "val_metrics")
            cfg.val_metrics = parse_bool(key, value, line);
        else if (key == "noise")
            cfg.noise = value;
        else
            throw ValidationError("train config line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
    if (!cfg.checkpoint.is_absolute() && cfg.checkpoint == "model.ckpt")
        cfg.checkpoint = base_dir / cfg.checkpoint;
    if (!cfg.history.is_absolute() && cfg.history == "history.json")
        cfg.history = base_dir / cfg.history;
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError(path.string(), "cannot open train config");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_train_config(buf.str(), path.parent_path());
}

// ---- data ----

TrainPair make_train_pair(const Sinogram& input, const Sinogram& target)
{
    if (target.n_angles != 4 * input.n_angles || target.n_bins != input.n_bins)
        throw ValidationError("training pair: target " + std::to_string(target.n_angles) + "x"
                              + std::to_string(target.n_bins) + " is not 4x the views of input "
                              + std::to_string(input.n_angles) + "x" + std::to_string(input.n_bins));
    const auto norm = normalize(input);
    TrainPair p;
    p.input = norm.sinogram.data;
    p.scale = norm.scale;
    p.target = target.data;
    const auto s = static_cast<float>(norm.scale);
    for (auto& v : p.target)
        v /= s;
    p.in_angles = input.n_angles;
    p.out_angles = target.n_angles;
    p.bins = input.n_bins;
    return p;
}

std::vector<TrainPair> load_pairs(const std::vector<ManifestEntry>& entries)
{
    if (entries.empty())
        throw ValidationError("dataset is empty");
    std::vector<TrainPair> pairs(entries.size());
    std::vector<std::exception_ptr> errors(entries.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t i = 0; i < entries.size(); ++i) {
        try {
            pairs[i] = make_train_pair(read_sinogram(entries[i].input), read_sinogram(entries[i].target));
        } catch (const ValidationError& e) {
            try {
                throw ValidationError(entries[i].input.string() + ": " + e.what());
            } catch (...) {
                errors[i] = std::current_exception();
            }
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    for (std::size_t i = 1; i < pairs.size(); ++i)
        if (pairs[i].in_angles != pairs[0].in_angles || pairs[i].bins != pairs[0].bins)
            throw ValidationError(entries[i].input.string() + ": shape " + std::to_string(pairs[i].in_angles) + "x"
                                  + std::to_string(pairs[i].bins) + " differs from the first pair's "
                                  + std::to_string(pairs[0].in_angles) + "x" + std::to_string(pairs[0].bins));
    return pairs;
}

// ---- training ----

namespace {

struct Batch
{
    Tensor input;
    Tensor target;
};

Batch make_batch(const std::vector<TrainPair>& pairs, std::span<const std::size_t> order)
{
    const auto& first = pairs[order[0]];
    const auto b = static_cast<std::int64_t>(order.size());
    std::vector<float> in, tg;
    in.reserve(static_cast<std::size_t>(b * first.in_angles * first.bins));
    tg.reserve(static_cast<std::size_t>(b * first.out_angles * first.bins));
    for (auto i : order) {
        in.insert(in.end(), pairs[i].input.begin(), pairs[i].input.end());
        tg.insert(tg.end(), pairs[i].target.begin(), pairs[i].target.end());
    }
    return {Tensor({b, 1, first.in_angles, first.bins}, std::move(in)),
            Tensor({b, 1, first.out_angles, first.bins}, std::move(tg))};
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MetricsReport val_report(const UNet& model, const std::vector<TrainPair>& val, std::int64_t batch_size)
{
    std::vector<MetricsReport> reports;
    std::vector<std::size_t> order(val.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t start = 0; start < val.size(); start += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(val.size(), start + static_cast<std::size_t>(batch_size));
        const auto batch = make_batch(val, std::span(order).subspan(start, end - start));
        const Tensor out = model.infer(batch.input);
        const auto per = static_cast<std::size_t>(val[start].out_angles * val[start].bins);
        for (std::size_t k = start; k < end; ++k) {
            const auto o = out.data().subspan((k - start) * per, per);
            const GridView ref{val[k].out_angles, val[k].bins, val[k].target};
            const GridView est{val[k].out_angles, val[k].bins, o};
            reports.push_back(score(ref, est));
        }
    }
    return mean_report(reports);
}

void configure_threads(const TrainConfig& cfg)
{
    if (cfg.deterministic)
        omp_set_num_threads(1);
    else if (cfg.jobs > 0)
        omp_set_num_threads(cfg.jobs);
}

} // namespace

double mean_loss(const UNet& model, const std::vector<TrainPair>& pairs, std::int64_t batch_size)
{
    if (pairs.empty())
        return std::numeric_limits<double>::quiet_NaN();
    NoGradGuard no_grad;
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    double total = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(pairs.size(), start + static_cast<std::size_t>(batch_size));
        const auto batch = make_batch(pairs, std::span(order).subspan(start, end - start));
        total += mse_loss(model.forward(batch.input), batch.target).item() * static_cast<double>(end - start);
    }
    return total / static_cast<double>(pairs.size());
}

nlohmann::ordered_json to_json(const TrainHistory& history)
{
    nlohmann::ordered_json j;
    j["best_epoch"] = history.best_epoch;
    j["best_val_loss"] = history.best_val_loss;
    j["seconds"] = history.seconds;
    auto epochs = nlohmann::ordered_json::array();
    for (const auto& e : history.epochs) {
        nlohmann::ordered_json r;
        r["epoch"] = e.epoch;
        r["steps"] = e.steps;
        r["train_loss"] = e.train_loss;
        r["val_loss"] = std::isnan(e.val_loss) ? nlohmann::ordered_json() : nlohmann::ordered_json(e.val_loss);
        if (e.val_metrics)
            r["val_metrics"] = to_json(*e.val_metrics);
        r["seconds"] = e.seconds;
        epochs.push_back(std::move(r));
    }
    j["epochs"] = std::move(epochs);
    j["step_losses"] = history.step_losses;
    return j;
}

TrainResult train(const TrainConfig& cfg, const std::vector<TrainPair>& train_set, const std::vector<TrainPair>& val,
                  std::ostream* log, const std::function<void(const UNet&)>& on_improve)
{
    if (train_set.empty())
        throw ValidationError("train: training set is empty");
    configure_threads(cfg);
    const auto& first = train_set.front();
    for (const auto* set : {&train_set, &val})
        for (const auto& p : *set)
            if (p.in_angles != first.in_angles || p.bins != first.bins || p.out_angles != first.out_angles)
                throw ValidationError("train: pairs have inconsistent shapes");

    UNetConfig ucfg = UNetConfig::reduced(cfg.base_channels);
    if (cfg.bottleneck_channels)
        ucfg.bottleneck_channels = cfg.bottleneck_channels;
    ucfg.in_angles = first.in_angles;
    ucfg.out_angles = first.out_angles;
    ucfg.detector_bins = first.bins;
    UNet model(ucfg, derive_seed(cfg.seed, Stream::WeightInit));
    model.set_normalization(cfg.normalization, 1.0);

    AdamConfig adam;
    adam.learning_rate = static_cast<float>(cfg.learning_rate);
    TrainHistory history;
    history.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<std::uint8_t> best_bytes = encode_checkpoint(model);
    const auto t_start = std::chrono::steady_clock::now();
    std::int64_t steps = 0;
    bool stop = false;

    for (std::int64_t epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
        const auto t_epoch = std::chrono::steady_clock::now();
        std::vector<std::size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(cfg.seed, Stream::Shuffle, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        EpochRecord rec;
        rec.epoch = epoch;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto batch = make_batch(train_set, std::span(order).subspan(start, end - start));
            Tensor loss = mse_loss(model.forward(batch.input), batch.target);
            const double value = loss.item();
            if (!std::isfinite(value))
                throw ValidationError("train: loss became non-finite at step " + std::to_string(steps + 1));
            loss.backward();
            adam_step(model.parameters(), adam);
            ++steps;
            ++rec.steps;
            history.step_losses.push_back(value);
            loss_sum += value * static_cast<double>(end - start);
            seen += end - start;
            if (cfg.max_steps && steps >= cfg.max_steps) {
                stop = true;
                break;
            }
        }
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.val_loss = val.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_loss(model, val, cfg.batch_size);
        if (!val.empty() && cfg.val_metrics)
            rec.val_metrics = val_report(model, val, cfg.batch_size);
        rec.seconds = seconds_since(t_epoch);

        const double selection = val.empty() ? rec.train_loss : rec.val_loss;
        const bool improved = selection < history.best_val_loss;
        if (improved) {
            history.best_val_loss = selection;
            history.best_epoch = epoch;
            best_bytes = encode_checkpoint(model);
            if (on_improve)
                on_improve(model);
        }
        if (log) {
            char line[256];
            std::snprintf(line, sizeof line, "epoch %lld steps %lld train_loss %.6g val_loss %.6g%s (%.1fs)",
                          static_cast<long long>(epoch), static_cast<long long>(steps), rec.train_loss, rec.val_loss,
                          improved ? " *" : "", rec.seconds);
            *log << line;
            if (rec.val_metrics)
                std::snprintf(line, sizeof line, " val_ssim %.4f val_mape %.2f%%", rec.val_metrics->ssim,
                              rec.val_metrics->mape),
                    *log << line;
            *log << "\n" << std::flush;
        }
        history.epochs.push_back(std::move(rec));
    }
    history.seconds = seconds_since(t_start);
    return {decode_checkpoint(best_bytes), std::move(history)};
}

TrainResult train(const TrainConfig& cfg, std::ostream* log)
{
    cfg.validate();
    configure_threads(cfg);
    auto keep = [&](std::vector<ManifestEntry> entries) {
        if (cfg.noise != "mixed")
            std::erase_if(entries, [&](const ManifestEntry& e) { return e.noise != cfg.noise; });
        return entries;
    };
    auto pairs = load_pairs(keep(read_manifest(cfg.manifest)));
    std::vector<TrainPair> train_set, val;
    if (!cfg.val_manifest.empty()) {
        train_set = std::move(pairs);
        val = load_pairs(keep(read_manifest(cfg.val_manifest)));
    } else {
        std::vector<std::size_t> order(pairs.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(cfg.seed, Stream::Split));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        auto n_train = static_cast<std::size_t>(std::floor(cfg.split * static_cast<double>(pairs.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, pairs.size());
        for (std::size_t k = 0; k < order.size(); ++k)
            (k < n_train ? train_set : val).push_back(std::move(pairs[order[k]]));
    }
    if (log)
        *log << "training on " << train_set.size() << " pairs, validating on " << val.size() << "\n";

    auto result = train(cfg, train_set, val, log, [&](const UNet& m) { save_checkpoint(m, cfg.checkpoint); });
    std::ofstream out(cfg.history);
    if (!out)
        throw IoError(cfg.history.string(), "cannot write history");
    out << to_json(result.history).dump(2) << "\n";
    return result;
}

// ---- inference and evaluation ----

std::vector<Sinogram> predict(const UNet& model, const std::vector<Sinogram>& inputs, std::int64_t batch_size)
{
    std::vector<Sinogram> out;
    out.reserve(inputs.size());
    for (std::size_t start = 0; start < inputs.size(); start += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(inputs.size(), start + static_cast<std::size_t>(batch_size));
        const auto& first = inputs[start];
        std::vector<float> data;
        std::vector<double> scales;
        for (std::size_t k = start; k < end; ++k) {
            const auto& cfg = model.config();
            if (inputs[k].n_angles != cfg.in_angles || inputs[k].n_bins != cfg.detector_bins)
                throw ShapeError("predict: model expects " + std::to_string(cfg.in_angles) + "x"
                                 + std::to_string(cfg.detector_bins) + " sinograms, got "
                                 + std::to_string(inputs[k].n_angles) + "x" + std::to_string(inputs[k].n_bins));
            const auto norm = normalize(inputs[k]);
            data.insert(data.end(), norm.sinogram.data.begin(), norm.sinogram.data.end());
            scales.push_back(norm.scale);
        }
        const Tensor y = model.infer(
            Tensor({static_cast<std::int64_t>(end - start), 1, first.n_angles, first.n_bins}, std::move(data)));
        const auto per = static_cast<std::size_t>(y.dim(2) * y.dim(3));
        for (std::size_t k = start; k < end; ++k) {
            Sinogram s = Sinogram::zeros(y.dim(2), y.dim(3), inputs[k].start_angle_deg, inputs[k].angular_range_deg,
                                         inputs[k].bin_width);
            const auto src = y.data().subspan((k - start) * per, per);
            const auto scale = static_cast<float>(scales[k - start]);
            for (std::size_t i = 0; i < per; ++i)
                s.data[i] = src[i] * scale;
            out.push_back(std::move(s));
        }
    }
    return out;
}

Sinogram predict(const UNet& model, const Sinogram& input)
{
    return predict(model, std::vector<Sinogram>{input}).front();
}

Sinogram nearest_angle_upsample(const Sinogram& input, std::int64_t factor)
{
    if (factor < 1)
        throw ValidationError("nearest_angle_upsample: factor must be positive");
    Sinogram out = Sinogram::zeros(input.n_angles * factor, input.n_bins, input.start_angle_deg,
                                   input.angular_range_deg, input.bin_width);
    for (std::int64_t v = 0; v < out.n_angles; ++v) {
        // Dense view v sits at v / factor sparse steps; round half down.
        const auto q = v / factor, r = v % factor;
        const auto src = (2 * r > factor ? q + 1 : q) % input.n_angles;
        const auto row = input.row(src);
        std::copy(row.begin(), row.end(), out.row(v).begin());
    }
    return out;
}

nlohmann::ordered_json to_json(const EvaluationRow& row)
{
    nlohmann::ordered_json j;
    j["noise"] = row.noise;
    j["pairs"] = row.pairs;
    j["sinogram"]["model"] = to_json(row.model_sinogram);
    j["sinogram"]["baseline"] = to_json(row.baseline_sinogram);
    j["image"]["model"] = to_json(row.model_image);
    j["image"]["baseline"] = to_json(row.baseline_image);
    return j;
}

EvaluationRow evaluate(const Predictor& predictor, const std::vector<ManifestEntry>& entries, const std::string& noise,
                       const EvalOptions& options)
{
    std::vector<const ManifestEntry*> chosen;
    for (const auto& e : entries)
        if (noise.empty() || e.noise == noise)
            chosen.push_back(&e);
    if (options.limit > 0 && chosen.size() > static_cast<std::size_t>(options.limit))
        chosen.resize(static_cast<std::size_t>(options.limit));
    if (chosen.empty())
        throw ValidationError("evaluate: no manifest entries with noise '" + noise + "'");

    std::vector<Sinogram> inputs, targets;
    for (const auto* e : chosen) {
        inputs.push_back(read_sinogram(e->input));
        targets.push_back(read_sinogram(e->target));
    }
    const auto outputs = predictor(inputs);
    if (outputs.size() != inputs.size())
        throw ValidationError("evaluate: predictor returned " + std::to_string(outputs.size()) + " sinograms for "
                              + std::to_string(inputs.size()) + " inputs");

    const auto n = chosen.size();
    std::vector<MetricsReport> ms(n), bs(n), mi, bi;
    if (options.image_space) {
        mi.resize(n);
        bi.resize(n);
    }
    std::vector<std::exception_ptr> errors(n);
    // Warm the matrix cache once so the loop only reads it.
    if (options.image_space) {
        osem(outputs[0], options.recon);
        osem(inputs[0], options.recon);
    }
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t k = 0; k < n; ++k) {
        try {
            if (outputs[k].n_angles != targets[k].n_angles || outputs[k].n_bins != targets[k].n_bins)
                throw ShapeError("evaluate: prediction shape does not match target for " + chosen[k]->target.string());
            ms[k] = score(targets[k].view(), outputs[k].view());
            bs[k] = score(targets[k].view(), nearest_angle_upsample(inputs[k]).view());
            if (options.image_space) {
                const Image phantom = read_image(chosen[k]->phantom);
                mi[k] = score(phantom.view(), osem(outputs[k], options.recon).view());
                bi[k] = score(phantom.view(), osem(inputs[k], options.recon).view());
            }
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    EvaluationRow row;
    row.noise = noise;
    row.pairs = static_cast<std::int64_t>(n);
    row.model_sinogram = mean_report(ms);
    row.baseline_sinogram = mean_report(bs);
    if (options.image_space) {
        row.model_image = mean_report(mi);
        row.baseline_image = mean_report(bi);
    }
    for (auto* r : {&row.model_sinogram, &row.baseline_sinogram, &row.model_image, &row.baseline_image})
        r->noise = noise;
    return row;
}

EvaluationRow evaluate(const UNet& model, const std::vector<ManifestEntry>& entries, NoiseLevel noise,
                       const EvalOptions& options)
{
    return evaluate([&](const std::vector<Sinogram>& in) { return predict(model, in); }, entries, to_string(noise),
                    options);
}

} // namespace sinterp
