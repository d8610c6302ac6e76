#include "phil/harness/plots.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "phil/harness/export.hpp"

namespace phil {

namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 420;
constexpr int kLeft = 80;
constexpr int kRight = 20;
constexpr int kTop = 40;
constexpr int kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string num(Real x) {
    char buffer[32];
    const auto r = std::to_chars(buffer, buffer + sizeof(buffer), x, std::chars_format::general, 6);
    return std::string(buffer, r.ptr);
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Range {
    Real lo = 0.0;
    Real hi = 1.0;
};

Range padded(Real lo, Real hi) {
    if (!(hi > lo)) {
        const Real pad = std::max(std::abs(lo) * 1e-3, 1e-9);
        return {lo - pad, hi + pad};
    }
    const Real pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out)
        throw IoError("failed writing " + path.string());
}

PlotSeries decimated(const std::string& label, const Recording& rec, const std::vector<Real>& y, std::size_t begin,
                     std::size_t end, std::size_t step) {
    PlotSeries s{label, {}, {}};
    for (std::size_t k = begin; k < end; k += step) {
        s.t.push_back(rec.time(k));
        s.y.push_back(y[k]);
    }
    return s;
}

} // namespace

std::string svg_line_plot(const std::string& title, const std::string& y_label, const std::vector<PlotSeries>& series) {
    Real t_lo = 0.0, t_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
    bool any = false;
    for (const auto& s : series) {
        for (std::size_t k = 0; k < s.t.size(); ++k) {
            if (!any) {
                t_lo = t_hi = s.t[k];
                y_lo = y_hi = s.y[k];
                any = true;
            }
            t_lo = std::min(t_lo, s.t[k]);
            t_hi = std::max(t_hi, s.t[k]);
            y_lo = std::min(y_lo, s.y[k]);
            y_hi = std::max(y_hi, s.y[k]);
        }
    }
    const Range tr = t_hi > t_lo ? Range{t_lo, t_hi} : padded(t_lo, t_hi);
    const Range yr = padded(y_lo, y_hi);
    const Real pw = kWidth - kLeft - kRight;
    const Real ph = kHeight - kTop - kBottom;
    auto px = [&](Real t) { return kLeft + (t - tr.lo) / (tr.hi - tr.lo) * pw; };
    auto py = [&](Real y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) + "\" height=\"" +
           std::to_string(kHeight) + "\" viewBox=\"0 0 " + std::to_string(kWidth) + " " + std::to_string(kHeight) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
           escape(title) + "</text>\n";
    svg += "<rect x=\"" + std::to_string(kLeft) + "\" y=\"" + std::to_string(kTop) + "\" width=\"" + num(pw) +
           "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

    svg += "<g class=\"ticks\" stroke=\"#ddd\">\n";
    for (int k = 0; k <= 4; ++k) {
        const Real f = k / 4.0;
        const Real x = kLeft + f * pw;
        const Real y = kTop + f * ph;
        svg += "<line x1=\"" + num(x) + "\" y1=\"" + std::to_string(kTop) + "\" x2=\"" + num(x) + "\" y2=\"" +
               num(kTop + ph) + "\"/>\n";
        svg += "<line x1=\"" + std::to_string(kLeft) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kLeft + pw) +
               "\" y2=\"" + num(y) + "\"/>\n";
    }
    svg += "</g>\n<g class=\"labels\">\n";
    for (int k = 0; k <= 4; ++k) {
        const Real f = k / 4.0;
        svg += "<text x=\"" + num(kLeft + f * pw) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
               num(tr.lo + f * (tr.hi - tr.lo)) + "</text>\n";
        svg += "<text x=\"" + std::to_string(kLeft - 6) + "\" y=\"" + num(kTop + (1 - f) * ph + 4) +
               "\" text-anchor=\"end\">" + num(yr.lo + f * (yr.hi - yr.lo)) + "</text>\n";
    }
    svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + std::to_string(kHeight - 10) +
           "\" text-anchor=\"middle\">t (s)</text>\n";
    svg += "<text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
           num(kTop + ph / 2) + ")\">" + escape(y_label) + "</text>\n";
    svg += "</g>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kColors[s % std::size(kColors)];
        svg += "<polyline class=\"series\" data-label=\"" + escape(series[s].label) +
               "\" fill=\"none\" stroke-width=\"1.2\" stroke=\"" + color + "\" points=\"";
        for (std::size_t k = 0; k < series[s].t.size(); ++k) {
            if (k)
                svg += ' ';
            svg += num(px(series[s].t[k])) + "," + num(py(series[s].y[k]));
        }
        svg += "\"/>\n";
        svg += "<text x=\"" + num(kLeft + pw - 6) + "\" y=\"" + num(kTop + 16 + 14 * static_cast<Real>(s)) +
               "\" text-anchor=\"end\" fill=\"" + color + "\">" + escape(series[s].label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

void export_plots(const Recording& rec, const std::filesystem::path& dir) {
    const std::size_t n = rec.f_grid.size();
    if (n == 0)
        throw IoError("cannot plot an empty recording");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

    const std::size_t d = std::max<std::size_t>(rec.decimation, 1);
    write_file(dir / "frequency.svg",
               svg_line_plot("Grid frequency", "f (Hz)", {decimated("f_grid", rec, rec.f_grid, 0, n, d)}));

    std::vector<Real> p_kw(rec.p_pcc.size());
    std::transform(rec.p_pcc.begin(), rec.p_pcc.end(), p_kw.begin(), [](Real p) { return p * 1e-3; });
    write_file(dir / "p_pcc.svg",
               svg_line_plot("Active power into the microgrid", "P (kW)", {decimated("p_pcc", rec, p_kw, 0, n, d)}));
    write_file(dir / "v_rms_pcc.svg", svg_line_plot("Coupling point voltage", "V rms (V)",
                                                    {decimated("v_rms_pcc", rec, rec.v_rms_pcc, 0, n, d)}));
    write_file(dir / "v_nodes.svg", svg_line_plot("Feeder node voltages", "V rms (V)",
                                                  {decimated("n1", rec, rec.v_rms_n1, 0, n, d),
                                                   decimated("n2", rec, rec.v_rms_n2, 0, n, d),
                                                   decimated("n3", rec, rec.v_rms_n3, 0, n, d)}));

    const std::size_t wd = std::max<std::size_t>(1, d / 10);
    const std::uint64_t half = rec.step_at(0.2);
    for (std::size_t e = 0; e < rec.event_times.size(); ++e) {
        const std::uint64_t at = rec.step_at(rec.event_times[e]);
        const std::size_t begin = at > half ? at - half : 0;
        const std::size_t end = std::min<std::size_t>(n, at + half);
        std::vector<PlotSeries> series;
        const char* names[] = {"i_a", "i_b", "i_c"};
        for (int p = 0; p < 3; ++p) {
            PlotSeries s{names[p], {}, {}};
            for (std::size_t k = begin; k < end; k += wd) {
                s.t.push_back(rec.time(k));
                s.y.push_back(rec.i_abc_pcc[k](p));
            }
            series.push_back(std::move(s));
        }
        write_file(dir / ("currents_event_" + std::to_string(e + 1) + ".svg"),
                   svg_line_plot("Coupling current around event " + std::to_string(e + 1), "i (A)", series));
    }
}

} // namespace phil
