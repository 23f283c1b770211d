#include "sinterp/metrics.hpp"

#include "sinterp/error.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <limits>

namespace sinterp {

namespace {

void check_pair(const GridView& ref, const GridView& est, const char* what)
{
    if (ref.rows != est.rows || ref.cols != est.cols || ref.data.size() != est.data.size()
        || ref.data.size() != static_cast<std::size_t>(ref.rows * ref.cols))
        throw ShapeError(std::string(what) + ": reference is " + std::to_string(ref.rows) + "x"
                         + std::to_string(ref.cols) + ", estimate is " + std::to_string(est.rows) + "x"
                         + std::to_string(est.cols));
}

std::vector<double> gaussian_taps(const SsimParams& p)
{
    std::vector<double> g(static_cast<std::size_t>(p.window));
    const double c = 0.5 * (p.window - 1);
    double sum = 0.0;
    for (int k = 0; k < p.window; ++k) {
        const double d = k - c;
        g[static_cast<std::size_t>(k)] = std::exp(-d * d / (2.0 * p.sigma * p.sigma));
        sum += g[static_cast<std::size_t>(k)];
    }
    for (auto& v : g)
        v /= sum;
    return g;
}

void check_ssim_input(const GridView& ref, const GridView& est, const SsimParams& p)
{
    check_pair(ref, est, "ssim");
    if (p.window < 1 || ref.rows < p.window || ref.cols < p.window)
        throw ShapeError("ssim: images must be at least " + std::to_string(p.window) + "x" + std::to_string(p.window)
                         + ", got " + std::to_string(ref.rows) + "x" + std::to_string(ref.cols));
}

double ssim_at(double mx, double my, double xx, double yy, double xy, double c1, double c2)
{
    const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
    return ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string fmt_psnr(double v) { return std::isinf(v) ? std::string("inf") : fmt("%.2f", v); }

std::string pad(const std::string& s, std::size_t width)
{
    return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string capitalized(std::string s)
{
    if (!s.empty())
        s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

} // namespace

double mse(const GridView& ref, const GridView& est)
{
    check_pair(ref, est, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        const double d = static_cast<double>(est.data[i]) - ref.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(ref.data.size());
}

double psnr(const GridView& ref, const GridView& est, double peak)
{
    const double m = mse(ref, est);
    if (m == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

MapeResult mape(const GridView& ref, const GridView& est)
{
    check_pair(ref, est, "mape");
    float peak = 0.0f;
    for (float v : ref.data)
        peak = std::max(peak, v);
    const double tau = 1e-6 * peak;
    MapeResult out;
    double acc = 0.0;
    std::int64_t used = 0;
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        const double r = ref.data[i];
        if (!(r > tau)) {
            ++out.masked;
            continue;
        }
        acc += std::fabs(static_cast<double>(est.data[i]) - r) / r;
        ++used;
    }
    if (used == 0)
        throw ValidationError("mape: reference effectively zero, all " + std::to_string(out.masked) + " bins masked");
    out.percent = 100.0 * acc / static_cast<double>(used);
    return out;
}

double ssim(const GridView& ref, const GridView& est, const SsimParams& p)
{
    check_ssim_input(ref, est, p);
    const auto g = gaussian_taps(p);
    const auto w = static_cast<std::int64_t>(p.window);
    const auto rows = ref.rows, cols = ref.cols;
    const auto out_rows = rows - w + 1, out_cols = cols - w + 1;
    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

    // Horizontal pass: five filtered planes of rows x out_cols.
    const auto plane = static_cast<std::size_t>(rows * out_cols);
    std::vector<double> h(5 * plane);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        const float* x = ref.data.data() + r * cols;
        const float* y = est.data.data() + r * cols;
        for (std::int64_t c = 0; c < out_cols; ++c) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (std::int64_t k = 0; k < w; ++k) {
                const double gk = g[static_cast<std::size_t>(k)];
                const double xv = x[c + k], yv = y[c + k];
                sx += gk * xv;
                sy += gk * yv;
                sxx += gk * (xv * xv);
                syy += gk * (yv * yv);
                sxy += gk * (xv * yv);
            }
            const auto i = static_cast<std::size_t>(r * out_cols + c);
            h[i] = sx;
            h[plane + i] = sy;
            h[2 * plane + i] = sxx;
            h[3 * plane + i] = syy;
            h[4 * plane + i] = sxy;
        }
    }

    std::vector<double> row_sums(static_cast<std::size_t>(out_rows));
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < out_rows; ++r) {
        double acc = 0.0;
        for (std::int64_t c = 0; c < out_cols; ++c) {
            double s[5] = {0, 0, 0, 0, 0};
            for (std::int64_t k = 0; k < w; ++k) {
                const double gk = g[static_cast<std::size_t>(k)];
                const auto i = static_cast<std::size_t>((r + k) * out_cols + c);
                for (int q = 0; q < 5; ++q)
                    s[q] += gk * h[static_cast<std::size_t>(q) * plane + i];
            }
            acc += ssim_at(s[0], s[1], s[2], s[3], s[4], c1, c2);
        }
        row_sums[static_cast<std::size_t>(r)] = acc;
    }
    double total = 0.0;
    for (double v : row_sums)
        total += v;
    return total / static_cast<double>(out_rows * out_cols);
}

namespace reference {

double ssim(const GridView& ref, const GridView& est, const SsimParams& p)
{
    check_ssim_input(ref, est, p);
    const auto g = gaussian_taps(p);
    const auto w = static_cast<std::int64_t>(p.window);
    const auto cols = ref.cols;
    const auto out_rows = ref.rows - w + 1, out_cols = cols - w + 1;
    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    double total = 0.0;
    for (std::int64_t r = 0; r < out_rows; ++r) {
        for (std::int64_t c = 0; c < out_cols; ++c) {
            double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
            for (std::int64_t i = 0; i < w; ++i) {
                for (std::int64_t j = 0; j < w; ++j) {
                    const double gw = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
                    const auto idx = static_cast<std::size_t>((r + i) * cols + c + j);
                    const double xv = ref.data[idx], yv = est.data[idx];
                    mx += gw * xv;
                    my += gw * yv;
                    xx += gw * xv * xv;
                    yy += gw * yv * yv;
                    xy += gw * xv * yv;
                }
            }
            total += ssim_at(mx, my, xx, yy, xy, c1, c2);
        }
    }
    return total / static_cast<double>(out_rows * out_cols);
}

} // namespace reference

MetricsReport score(const GridView& ref, const GridView& est)
{
    check_pair(ref, est, "score");
    float peak = 0.0f;
    for (float v : ref.data)
        peak = std::max(peak, v);
    std::vector<float> r(ref.data.begin(), ref.data.end()), e(est.data.begin(), est.data.end());
    if (peak > 0.0f) {
        for (auto& v : r)
            v = static_cast<float>(static_cast<double>(v) / peak);
        for (auto& v : e)
            v = static_cast<float>(static_cast<double>(v) / peak);
    }
    const GridView rv{ref.rows, ref.cols, r}, ev{est.rows, est.cols, e};
    MetricsReport out;
    const auto m = mape(rv, ev);
    out.mape = m.percent;
    out.masked_bins = m.masked;
    out.mse = mse(rv, ev);
    out.psnr = out.mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / out.mse);
    out.ssim = ssim(rv, ev);
    return out;
}

MetricsReport mean_report(const std::vector<MetricsReport>& reports)
{
    if (reports.empty())
        throw ValidationError("mean_report: no reports to average");
    MetricsReport out = reports.front();
    out.mape = out.mse = out.ssim = out.psnr = 0.0;
    out.masked_bins = 0;
    double finite_psnr = 0.0;
    std::int64_t finite = 0;
    for (const auto& r : reports) {
        out.mape += r.mape;
        out.mse += r.mse;
        out.ssim += r.ssim;
        out.masked_bins += r.masked_bins;
        if (std::isfinite(r.psnr)) {
            finite_psnr += r.psnr;
            ++finite;
        }
    }
    const auto n = static_cast<double>(reports.size());
    out.mape /= n;
    out.mse /= n;
    out.ssim /= n;
    out.psnr = finite ? finite_psnr / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
    return out;
}

nlohmann::ordered_json to_json(const MetricsReport& report)
{
    nlohmann::ordered_json j;
    j["mape_percent"] = report.mape;
    j["mse"] = report.mse;
    j["ssim"] = report.ssim;
    // JSON has no infinity.
    if (std::isinf(report.psnr))
        j["psnr_db"] = "inf";
    else
        j["psnr_db"] = report.psnr;
    j["masked_bins"] = report.masked_bins;
    if (!report.reference.empty())
        j["reference"] = report.reference;
    if (!report.estimate.empty())
        j["estimate"] = report.estimate;
    if (!report.noise.empty())
        j["noise"] = report.noise;
    return j;
}

std::string denoising_table(const std::vector<MetricsReport>& rows)
{
    std::string out = pad("Noise", 10) + pad("MAPE", 10) + pad("MSE", 10) + pad("SSIM", 8) + "PSNR\n";
    for (const auto& r : rows)
        out += pad(capitalized(r.noise), 10) + pad(fmt("%.2f%%", r.mape), 10) + pad(fmt("%.4f", r.mse), 10)
               + pad(fmt("%.3f", r.ssim), 8) + fmt_psnr(r.psnr) + "\n";
    return out;
}

std::string reconstruction_table(const std::vector<MetricsReport>& standard, const std::vector<MetricsReport>& proposed)
{
    if (standard.size() != proposed.size())
        throw ValidationError("reconstruction_table: standard and proposed row counts differ");
    std::string out = pad("", 13) + pad("Standard Method", 25) + "Proposed Method\n";
    out += pad("Noise Level", 13) + pad("MSE", 9) + pad("SSIM", 7) + pad("PSNR", 9) + pad("MSE", 9) + pad("SSIM", 7)
           + "PSNR\n";
    for (std::size_t i = 0; i < standard.size(); ++i) {
        const auto& s = standard[i];
        const auto& p = proposed[i];
        out += pad(capitalized(s.noise), 13) + pad(fmt("%.4f", s.mse), 9) + pad(fmt("%.2f", s.ssim), 7)
               + pad(fmt_psnr(s.psnr), 9) + pad(fmt("%.4f", p.mse), 9) + pad(fmt("%.2f", p.ssim), 7)
               + fmt_psnr(p.psnr) + "\n";
    }
    return out;
}

} // namespace sinterp
