#include "resmin/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace resmin {

namespace {

std::string number(double v) {
    if (!std::isfinite(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

} // namespace

void write_records_csv(std::ostream& out, const std::vector<ConvergenceRecord>& records) {
    out << "level,dofs,est_Vh,err_L2_coarse,err_Vh_coarse,err_L2_full,err_Vh_full,"
           "err_L2_adjoint,err_Vh_adjoint,err_L2_dg,err_Vh_dg,newton_iters\n";
    for (const auto& r : records) {
        out << r.level << ',' << r.dofs << ',' << number(r.est_vh) << ',' << number(r.errors.l2_coarse) << ','
            << number(r.errors.vh_coarse) << ',' << number(r.errors.l2_full) << ',' << number(r.errors.vh_full)
            << ',' << number(r.errors.l2_adjoint) << ',' << number(r.errors.vh_adjoint) << ','
            << number(r.errors.l2_dg) << ',' << number(r.errors.vh_dg) << ',';
        if (r.newton_iters >= 0) out << r.newton_iters;
        out << '\n';
    }
}

namespace {

struct Series {
    std::string label;
    std::string color;
    std::vector<double> x; // dofs^(1/2)
    std::vector<double> y; // value
};

void add_series(std::vector<Series>& all, const std::vector<ConvergenceRecord>& records,
                const std::string& label, const std::string& color,
                double (*pick)(const ConvergenceRecord&)) {
    Series s;
    s.label = label;
    s.color = color;
    for (const auto& r : records) {
        const double v = pick(r);
        if (std::isfinite(v) && v > 0.0) {
            s.x.push_back(std::sqrt(static_cast<double>(r.dofs)));
            s.y.push_back(v);
        }
    }
    if (s.x.size() >= 2) all.push_back(std::move(s));
}

} // namespace

void write_convergence_svg(std::ostream& out, const std::vector<ConvergenceRecord>& records,
                           const std::string& title) {
    std::vector<Series> series;
    add_series(series, records, "estimator", "#1f77b4", [](const ConvergenceRecord& r) { return r.est_vh; });
    add_series(series, records, "coarse", "#d62728", [](const ConvergenceRecord& r) { return r.errors.vh_coarse; });
    add_series(series, records, "full-scale", "#2ca02c", [](const ConvergenceRecord& r) { return r.errors.vh_full; });
    add_series(series, records, "adjoint", "#9467bd", [](const ConvergenceRecord& r) { return r.errors.vh_adjoint; });
    add_series(series, records, "dG", "#ff7f0e", [](const ConvergenceRecord& r) { return r.errors.vh_dg; });

    const double width = 720, height = 520;
    const double ml = 70, mr = 170, mt = 40, mb = 55;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << (ml + (width - ml - mr) / 2) << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

    if (series.empty()) {
        out << "<text x=\"50%\" y=\"50%\" text-anchor=\"middle\" font-family=\"sans-serif\">no data</text>\n";
        out << "</svg>\n";
        return;
    }

    double lx0 = 1e300, lx1 = -1e300, ly0 = 1e300, ly1 = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            lx0 = std::min(lx0, std::log10(s.x[i]));
            lx1 = std::max(lx1, std::log10(s.x[i]));
            ly0 = std::min(ly0, std::log10(s.y[i]));
            ly1 = std::max(ly1, std::log10(s.y[i]));
        }
    if (lx1 - lx0 < 1e-9) lx1 = lx0 + 1;
    if (ly1 - ly0 < 1e-9) ly1 = ly0 + 1;
    const double padx = 0.04 * (lx1 - lx0), pady = 0.06 * (ly1 - ly0);
    lx0 -= padx;
    lx1 += padx;
    ly0 -= pady;
    ly1 += pady;

    auto px = [&](double logx) { return ml + (logx - lx0) / (lx1 - lx0) * (width - ml - mr); };
    auto py = [&](double logy) { return height - mb - (logy - ly0) / (ly1 - ly0) * (height - mt - mb); };

    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << (width - ml - mr) << "\" height=\""
        << (height - mt - mb) << "\" fill=\"none\" stroke=\"black\"/>\n";

    // decade ticks
    for (int e = static_cast<int>(std::ceil(lx0)); e <= static_cast<int>(std::floor(lx1)); ++e) {
        const double x = px(e);
        out << "<line x1=\"" << x << "\" y1=\"" << mt << "\" x2=\"" << x << "\" y2=\"" << (height - mb)
            << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << x << "\" y=\"" << (height - mb + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">1e" << e << "</text>\n";
    }
    for (int e = static_cast<int>(std::ceil(ly0)); e <= static_cast<int>(std::floor(ly1)); ++e) {
        const double y = py(e);
        out << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << (width - mr) << "\" y2=\"" << y
            << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << (ml - 8) << "\" y=\"" << (y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">1e" << e << "</text>\n";
    }
    out << "<text x=\"" << (ml + (width - ml - mr) / 2) << "\" y=\"" << (height - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">dofs^(1/2)</text>\n";
    out << "<text x=\"18\" y=\"" << (mt + (height - mt - mb) / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 "
        << (mt + (height - mt - mb) / 2) << ")\">error</text>\n";

    double legend_y = mt + 14;
    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            out << px(std::log10(s.x[i])) << ',' << py(std::log10(s.y[i])) << ' ';
        out << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            out << "<circle cx=\"" << px(std::log10(s.x[i])) << "\" cy=\"" << py(std::log10(s.y[i]))
                << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";

        // least-squares rate over the last (up to) five points
        const int n = static_cast<int>(s.x.size());
        const int w = std::min(5, n);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = n - w; i < n; ++i) {
            const double lx = std::log(s.x[static_cast<std::size_t>(i)]);
            const double ly = std::log(s.y[static_cast<std::size_t>(i)]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        const double slope = (w * sxy - sx * sy) / (w * sxx - sx * sx);
        char rate[32];
        std::snprintf(rate, sizeof(rate), "%.2f", -slope);

        out << "<line x1=\"" << (width - mr + 12) << "\" y1=\"" << legend_y << "\" x2=\"" << (width - mr + 34)
            << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << (width - mr + 40) << "\" y=\"" << (legend_y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << " (rate " << rate << ")</text>\n";
        legend_y += 18;
    }
    out << "</svg>\n";
}

} // namespace resmin
