#include "sinterp/dataset.hpp"
#include "sinterp/error.hpp"
#include "sinterp/io.hpp"
#include "sinterp/metrics.hpp"
#include "sinterp/noise.hpp"
#include "sinterp/phantom.hpp"
#include "sinterp/projector.hpp"
#include "sinterp/recon.hpp"
#include "sinterp/reproduce.hpp"
#include "sinterp/trainer.hpp"
#include "sinterp/unet.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace sinterp;

namespace {

enum Exit
{
    kOk = 0,
    kUsage = 1,
    kData = 2,
    kInternal = 3,
};

std::string one_line(std::string s)
{
    for (auto& c : s)
        if (c == '\n' || c == '\r')
            c = ' ';
    return s;
}

void fail(const char* kind, const std::string& message)
{
    std::cerr << "sinterp: error[" << kind << "]: " << one_line(message) << "\n";
}

fs::path data_dir()
{
    const char* env = std::getenv("SINTERP_DATA_DIR");
    return env && *env ? fs::path(env) : fs::path("sinterp-data");
}

NoiseLevel level_arg(const std::string& text)
{
    const auto level = parse_noise_level(text);
    if (!level)
        throw ValidationError("unknown noise level '" + text + "' (expected low, medium or high)");
    return *level;
}

std::vector<NoiseLevel> levels_arg(const std::string& text)
{
    if (text == "all")
        return {kNoiseLevels.begin(), kNoiseLevels.end()};
    return {level_arg(text)};
}

void print_json(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << "\n"; }

// ---- subcommands ----

struct PhantomArgs
{
    std::string kind;
    std::int64_t size = 128;
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
    fs::path out;
};

void run_phantom(const PhantomArgs& a)
{
    Image image;
    if (a.kind == "shepp-logan") {
        if (a.size < 16)
            throw ValidationError("shepp-logan size must be at least 16, got " + std::to_string(a.size));
        image = shepp_logan(a.size);
    } else {
        PhantomRecipe recipe;
        recipe.seed = a.seed;
        recipe.size = a.size;
        image = generate_phantom(recipe, a.index);
    }
    write_tomo(a.out, image);
}

struct ProjectArgs
{
    fs::path in, out;
    std::int64_t angles = 128;
    double start = 0.0;
    double range = 360.0;
};

void run_project(const ProjectArgs& a)
{
    ProjectionGeometry g;
    g.n_angles = a.angles;
    g.start_angle_deg = a.start;
    g.angular_range_deg = a.range;
    write_tomo(a.out, project(read_image(a.in), g));
}

struct NoiseArgs
{
    fs::path in, out;
    std::string level;
    std::uint64_t seed = 0;
};

void run_noise(const NoiseArgs& a)
{
    write_tomo(a.out, apply_poisson(read_sinogram(a.in), level_arg(a.level), a.seed));
}

struct DatasetArgs
{
    std::int64_t count = 0;
    std::string noise = "mixed";
    std::uint64_t seed = 0;
    std::uint64_t first = 0;
    std::int64_t size = 128;
    fs::path out;
};

void run_dataset(const DatasetArgs& a)
{
    if (a.count < 1)
        throw ValidationError("--count must be at least 1");
    DatasetSpec spec;
    spec.recipe.seed = a.seed;
    spec.recipe.size = a.size;
    spec.count = a.count;
    spec.first_index = a.first;
    spec.noise = a.noise == "mixed" ? std::nullopt : std::optional<NoiseLevel>(level_arg(a.noise));
    const fs::path out = a.out.empty() ? data_dir() / "dataset" : a.out;
    make_dataset(spec, out);
    std::cout << "wrote " << a.count << " pairs to " << (out / "manifest.jsonl").string() << "\n";
}

struct TrainArgs
{
    fs::path config;
    std::int64_t max_steps = -1;
};

void run_train(const TrainArgs& a, bool deterministic, int jobs)
{
    auto cfg = load_train_config(a.config);
    if (a.max_steps >= 0)
        cfg.max_steps = a.max_steps;
    cfg.deterministic = cfg.deterministic || deterministic;
    if (jobs > 0)
        cfg.jobs = jobs;
    cfg.validate();
    const auto result = train(cfg, &std::cout);
    std::cout << "best epoch " << result.history.best_epoch << " loss " << result.history.best_val_loss
              << "; checkpoint " << cfg.checkpoint.string() << ", history " << cfg.history.string() << "\n";
}

struct InferArgs
{
    fs::path model, in, out;
};

void run_infer(const InferArgs& a)
{
    write_tomo(a.out, predict(load_checkpoint(a.model), read_sinogram(a.in)));
}

struct ReconArgs
{
    fs::path in, out;
    ReconConfig cfg;
};

void run_recon(const ReconArgs& a) { write_tomo(a.out, osem(read_sinogram(a.in), a.cfg)); }

struct EvalArgs
{
    fs::path ref, est;
    fs::path model, manifest;
    std::string noise = "all";
    std::int64_t limit = 0;
    bool table = false;
    bool sinogram_only = false;
};

GridView grid_of(const TomoData& d)
{
    return std::visit([](const auto& x) { return x.view(); }, d);
}

void run_eval(const EvalArgs& a)
{
    if (!a.model.empty()) {
        if (a.manifest.empty())
            throw ValidationError("--model needs --manifest");
        const UNet model = load_checkpoint(a.model);
        const auto entries = read_manifest(a.manifest);
        EvalOptions opts;
        opts.limit = a.limit;
        opts.image_space = !a.sinogram_only;
        std::vector<EvaluationRow> rows;
        for (auto level : levels_arg(a.noise))
            rows.push_back(evaluate(model, entries, level, opts));
        if (a.table) {
            std::vector<MetricsReport> m, b, s, p;
            for (const auto& r : rows) {
                m.push_back(r.model_sinogram);
                b.push_back(r.baseline_sinogram);
                s.push_back(r.baseline_image);
                p.push_back(r.model_image);
            }
            std::cout << "Sinogram denoising (model)\n" << denoising_table(m)
                      << "\nNearest-angle replication (baseline)\n" << denoising_table(b);
            if (opts.image_space)
                std::cout << "\nReconstruction (OSEM vs phantom)\n" << reconstruction_table(s, p);
        } else {
            auto j = nlohmann::ordered_json::array();
            for (const auto& r : rows)
                j.push_back(to_json(r));
            print_json(j);
        }
        return;
    }
    if (a.ref.empty() || a.est.empty())
        throw ValidationError("eval needs --ref and --est, or --model and --manifest");
    const auto ref = read_tomo(a.ref);
    const auto est = read_tomo(a.est);
    auto report = score(grid_of(ref), grid_of(est));
    report.reference = a.ref.string();
    report.estimate = a.est.string();
    if (a.table)
        std::cout << denoising_table({report});
    else
        print_json(to_json(report));
}

struct ReproduceArgs
{
    fs::path model;
    std::string noise = "all";
    std::uint64_t seed = 0;
    fs::path out;
    ReconConfig recon;
};

void run_reproduce(const ReproduceArgs& a)
{
    const fs::path model_path = a.model.empty() ? data_dir() / "model.ckpt" : a.model;
    const UNet model = load_checkpoint(model_path);
    ReproduceOptions opts;
    opts.levels = levels_arg(a.noise);
    opts.seed = a.seed;
    opts.recon = a.recon;
    const auto result = reproduce(model, opts);
    const fs::path out = a.out.empty() ? data_dir() / "reproduce" : a.out;
    write_reproduction(result, out);
    std::cout << reproduce_tables(result) << "\nfigures and report.json in " << out.string() << "\n";
}

struct ImportArgs
{
    fs::path in, out;
    std::int64_t angles = 0, bins = 0;
    std::string dtype = "f32";
    double start = 0.0, range = 360.0, bin_width = 1.0;
};

void run_import(const ImportArgs& a)
{
    const auto dtype = a.dtype == "u16" ? RawDtype::U16LE : RawDtype::F32LE;
    write_tomo(a.out, import_raw(a.in, a.angles, a.bins, dtype, a.start, a.range, a.bin_width));
}

struct PgmArgs
{
    fs::path in, out;
};

void run_pgm(const PgmArgs& a) { export_pgm(grid_of(read_tomo(a.in)), a.out); }

void add_recon_flags(CLI::App* cmd, ReconConfig& cfg)
{
    cmd->add_option("--subsets", cfg.n_subsets, "OSEM subsets (must divide the view count)")->capture_default_str();
    cmd->add_option("--iters", cfg.n_iterations, "OSEM iterations")->capture_default_str();
    cmd->add_option("--epsilon", cfg.epsilon, "stop when the relative L1 change falls below this (0: off)")
        ->capture_default_str();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sparse-view sinogram interpolation: phantoms, projection, noise, U-Net training, OSEM, metrics"};
    app.require_subcommand(1);
    int jobs = 0;
    bool deterministic = false;
    app.add_option("--jobs", jobs, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    app.add_flag("--deterministic", deterministic, "single thread, reproducible training");

    PhantomArgs phantom;
    auto* c_phantom = app.add_subcommand("phantom", "random or Shepp-Logan phantom image");
    c_phantom->add_option("kind", phantom.kind)->required()->check(CLI::IsMember({"random", "shepp-logan"}));
    c_phantom->add_option("--size", phantom.size, "width = height in pixels")->capture_default_str();
    c_phantom->add_option("--seed", phantom.seed, "recipe seed (random)")->capture_default_str();
    c_phantom->add_option("--index", phantom.index, "item index within the seed (random)")->capture_default_str();
    c_phantom->add_option("--out", phantom.out)->required();

    ProjectArgs proj;
    auto* c_project = app.add_subcommand("project", "parallel-beam forward projection");
    c_project->add_option("--in", proj.in)->required();
    c_project->add_option("--angles", proj.angles)->capture_default_str();
    c_project->add_option("--start", proj.start, "first view angle, degrees")->capture_default_str();
    c_project->add_option("--range", proj.range, "angular range, degrees")->capture_default_str();
    c_project->add_option("--out", proj.out)->required();

    NoiseArgs noise;
    auto* c_noise = app.add_subcommand("noise", "Poisson count noise");
    c_noise->add_option("--in", noise.in)->required();
    c_noise->add_option("--level", noise.level)->required()->check(CLI::IsMember({"low", "medium", "high"}));
    c_noise->add_option("--seed", noise.seed)->capture_default_str();
    c_noise->add_option("--out", noise.out)->required();

    DatasetArgs ds;
    auto* c_dataset = app.add_subcommand("dataset", "noisy sparse / clean dense training pairs");
    c_dataset->add_option("--count", ds.count)->required();
    c_dataset->add_option("--noise", ds.noise, "low|medium|high|mixed")
        ->check(CLI::IsMember({"low", "medium", "high", "mixed"}))
        ->capture_default_str();
    c_dataset->add_option("--seed", ds.seed)->capture_default_str();
    c_dataset->add_option("--first-index", ds.first, "index of the first item")->capture_default_str();
    c_dataset->add_option("--size", ds.size, "phantom size in pixels")->capture_default_str();
    c_dataset->add_option("--out", ds.out, "output directory (default $SINTERP_DATA_DIR/dataset)");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "train the U-Net from a key=value config");
    c_train->add_option("--config", tr.config)->required();
    c_train->add_option("--max-steps", tr.max_steps, "override max_steps from the config");

    InferArgs inf;
    auto* c_infer = app.add_subcommand("infer", "sparse-view sinogram -> dense-view sinogram");
    c_infer->add_option("--model", inf.model)->required();
    c_infer->add_option("--in", inf.in)->required();
    c_infer->add_option("--out", inf.out)->required();

    ReconArgs rec;
    auto* c_recon = app.add_subcommand("recon", "OSEM reconstruction");
    c_recon->add_option("--in", rec.in)->required();
    c_recon->add_option("--out", rec.out)->required();
    add_recon_flags(c_recon, rec.cfg);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "metrics between two files, or a model over a manifest");
    c_eval->add_option("--ref", ev.ref);
    c_eval->add_option("--est", ev.est);
    c_eval->add_option("--model", ev.model);
    c_eval->add_option("--manifest", ev.manifest);
    c_eval->add_option("--noise", ev.noise, "low|medium|high|all (manifest mode)")
        ->check(CLI::IsMember({"low", "medium", "high", "all"}))
        ->capture_default_str();
    c_eval->add_option("--limit", ev.limit, "pairs per noise level (0: all)")->capture_default_str();
    c_eval->add_flag("--sinogram-only", ev.sinogram_only, "skip the OSEM image-space comparison");
    c_eval->add_flag("--table", ev.table, "aligned text table instead of JSON");

    ReproduceArgs rep;
    auto* c_rep = app.add_subcommand("reproduce", "Shepp-Logan end to end: noise, interpolation, OSEM, tables, figures");
    c_rep->add_option("--model", rep.model, "checkpoint (default $SINTERP_DATA_DIR/model.ckpt)");
    c_rep->add_option("--noise", rep.noise, "low|medium|high|all")
        ->check(CLI::IsMember({"low", "medium", "high", "all"}))
        ->capture_default_str();
    c_rep->add_option("--seed", rep.seed)->capture_default_str();
    c_rep->add_option("--out", rep.out, "output directory (default $SINTERP_DATA_DIR/reproduce)");
    add_recon_flags(c_rep, rep.recon);

    ImportArgs imp;
    auto* c_import = app.add_subcommand("import-raw", "headerless raw sinogram -> SPTB");
    c_import->add_option("--in", imp.in)->required();
    c_import->add_option("--angles", imp.angles)->required();
    c_import->add_option("--bins", imp.bins)->required();
    c_import->add_option("--dtype", imp.dtype)->check(CLI::IsMember({"f32", "u16"}))->capture_default_str();
    c_import->add_option("--start", imp.start)->capture_default_str();
    c_import->add_option("--range", imp.range)->capture_default_str();
    c_import->add_option("--bin-width", imp.bin_width)->capture_default_str();
    c_import->add_option("--out", imp.out)->required();

    PgmArgs pgm;
    auto* c_pgm = app.add_subcommand("pgm", "export an image or sinogram as 16-bit PGM");
    c_pgm->add_option("--in", pgm.in)->required();
    c_pgm->add_option("--out", pgm.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail("usage", e.what());
        return kUsage;
    }

    try {
        if (deterministic)
            omp_set_num_threads(1);
        else if (jobs > 0)
            omp_set_num_threads(jobs);

        if (*c_phantom)
            run_phantom(phantom);
        else if (*c_project)
            run_project(proj);
        else if (*c_noise)
            run_noise(noise);
        else if (*c_dataset)
            run_dataset(ds);
        else if (*c_train)
            run_train(tr, deterministic, jobs);
        else if (*c_infer)
            run_infer(inf);
        else if (*c_recon)
            run_recon(rec);
        else if (*c_eval)
            run_eval(ev);
        else if (*c_rep)
            run_reproduce(rep);
        else if (*c_import)
            run_import(imp);
        else if (*c_pgm)
            run_pgm(pgm);
    } catch (const FormatError& e) {
        fail(to_string(e.code()), e.what());
        return kData;
    } catch (const Error& e) {
        fail(e.kind(), e.what());
        return kData;
    } catch (const std::filesystem::filesystem_error& e) {
        fail("io", e.what());
        return kData;
    } catch (const std::exception& e) {
        fail("internal", e.what());
        return kInternal;
    }
    return kOk;
}
