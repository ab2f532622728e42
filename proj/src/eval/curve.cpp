#include "cxrkit/eval/curve.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace cxrkit::eval {

namespace {

std::string format_double(double value, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, value);
    return buf;
}

} // namespace

std::vector<CurvePoint> shots_curve(std::span<const EvalReport> reports) {
    if (reports.empty()) {
        throw std::invalid_argument("shots_curve: no reports");
    }
    std::vector<CurvePoint> curve;
    curve.reserve(reports.size());
    for (const EvalReport& report : reports) {
        if (report.n_shots < 0) {
            throw std::invalid_argument("shots_curve: negative shot count");
        }
        curve.push_back({report.n_shots, report.mean_auc});
    }
    std::sort(curve.begin(), curve.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.n_shots < b.n_shots; });
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].n_shots == curve[i - 1].n_shots) {
            throw std::invalid_argument("shots_curve: duplicate shot count " +
                                        std::to_string(curve[i].n_shots));
        }
    }
    return curve;
}

std::string curve_to_csv(std::span<const CurvePoint> curve) {
    std::string csv = "shots,mean_auc\n";
    for (const CurvePoint& point : curve) {
        csv += std::to_string(point.n_shots);
        csv += ',';
        csv += format_double(point.mean_auc, "%.10g");
        csv += '\n';
    }
    return csv;
}

std::string curve_to_svg(std::span<const CurvePoint> curve) {
    if (curve.empty()) {
        throw std::invalid_argument("curve_to_svg: empty curve");
    }
    constexpr double kWidth = 640.0;
    constexpr double kHeight = 400.0;
    constexpr double kLeft = 70.0;
    constexpr double kRight = 20.0;
    constexpr double kTop = 20.0;
    constexpr double kBottom = 50.0;

    double x_min = curve.front().n_shots;
    double x_max = curve.front().n_shots;
    double y_min = curve.front().mean_auc;
    double y_max = curve.front().mean_auc;
    for (const CurvePoint& point : curve) {
        x_min = std::min(x_min, static_cast<double>(point.n_shots));
        x_max = std::max(x_max, static_cast<double>(point.n_shots));
        y_min = std::min(y_min, point.mean_auc);
        y_max = std::max(y_max, point.mean_auc);
    }
    if (x_max - x_min < 1.0) x_max = x_min + 1.0;
    const double y_pad = std::max(0.002, (y_max - y_min) * 0.15);
    y_min -= y_pad;
    y_max += y_pad;

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const auto sx = [&](double v) { return kLeft + (v - x_min) / (x_max - x_min) * plot_w; };
    const auto sy = [&](double v) { return kTop + (y_max - v) / (y_max - y_min) * plot_h; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
           "viewBox=\"0 0 640 400\">\n";
    svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";

    constexpr int kYTicks = 5;
    for (int t = 0; t <= kYTicks; ++t) {
        const double v = y_min + (y_max - y_min) * t / kYTicks;
        const std::string y = format_double(sy(v), "%.1f");
        svg += "<line x1=\"" + format_double(kLeft, "%.1f") + "\" y1=\"" + y + "\" x2=\"" +
               format_double(kWidth - kRight, "%.1f") + "\" y2=\"" + y +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg += "<text x=\"" + format_double(kLeft - 8.0, "%.1f") + "\" y=\"" + y +
               "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" "
               "dominant-baseline=\"middle\">" +
               format_double(v, "%.4f") + "</text>\n";
    }
    for (const CurvePoint& point : curve) {
        const std::string x = format_double(sx(point.n_shots), "%.1f");
        svg += "<line x1=\"" + x + "\" y1=\"" + format_double(kHeight - kBottom, "%.1f") +
               "\" x2=\"" + x + "\" y2=\"" + format_double(kHeight - kBottom + 5.0, "%.1f") +
               "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg += "<text x=\"" + x + "\" y=\"" + format_double(kHeight - kBottom + 20.0, "%.1f") +
               "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" +
               std::to_string(point.n_shots) + "</text>\n";
    }

    svg += "<line x1=\"" + format_double(kLeft, "%.1f") + "\" y1=\"" +
           format_double(kHeight - kBottom, "%.1f") + "\" x2=\"" +
           format_double(kWidth - kRight, "%.1f") + "\" y2=\"" +
           format_double(kHeight - kBottom, "%.1f") + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg += "<line x1=\"" + format_double(kLeft, "%.1f") + "\" y1=\"" +
           format_double(kTop, "%.1f") + "\" x2=\"" + format_double(kLeft, "%.1f") + "\" y2=\"" +
           format_double(kHeight - kBottom, "%.1f") + "\" stroke=\"black\" stroke-width=\"1\"/>\n";

    std::string path;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        path += (i == 0 ? "M" : " L");
        path += format_double(sx(curve[i].n_shots), "%.1f");
        path += ",";
        path += format_double(sy(curve[i].mean_auc), "%.1f");
    }
    svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
    for (const CurvePoint& point : curve) {
        svg += "<circle cx=\"" + format_double(sx(point.n_shots), "%.1f") + "\" cy=\"" +
               format_double(sy(point.mean_auc), "%.1f") +
               "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
    }

    svg += "<text x=\"" + format_double(kLeft + plot_w / 2.0, "%.1f") + "\" y=\"" +
           format_double(kHeight - 8.0, "%.1f") +
           "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">Shots</text>\n";
    svg += "<text x=\"16\" y=\"" + format_double(kTop + plot_h / 2.0, "%.1f") +
           "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 16 " +
           format_double(kTop + plot_h / 2.0, "%.1f") + ")\">Mean AUC</text>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace cxrkit::eval
