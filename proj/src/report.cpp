#include "abstain/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace abstain {
namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
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

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
                                "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39",
                                "#7b4173", "#3182bd", "#e6550d", "#31a354", "#756bb1", "#636363"};

RejectionCurve read_curve(const io::fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
    RejectionCurve c;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) fail(ErrorCode::data, "'" + path.string() + "': malformed curve row");
        try {
            c.coverage.push_back(std::stod(line.substr(0, comma)));
            c.value.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            fail(ErrorCode::data, "'" + path.string() + "': malformed curve row");
        }
    }
    return c;
}

std::string metric_title(const std::string& metric) {
    if (metric == "rc_auc") return "risk";
    if (metric == "accuracy_auc") return "accuracy";
    if (metric == "fr_auc") return "F1-micro";
    return metric;
}

} // namespace

std::vector<int> podium(const std::vector<double>& values) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isnan(values[i])) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<int> out(values.size(), -1);
    for (std::size_t k = 0; k < idx.size() && k < 2; ++k) out[idx[k]] = static_cast<int>(k);
    return out;
}

std::string render_curves_svg(const std::vector<std::pair<std::string, RejectionCurve>>& curves,
                              const std::string& title) {
    constexpr double W = 640, H = 420, L = 60, R = 170, T = 36, B = 48;
    const double pw = W - L - R, ph = H - T - B;
    double lo = 0.0, hi = 1.0;
    bool first = true;
    for (const auto& [name, c] : curves)
        for (double v : c.value) {
            if (!std::isfinite(v)) continue;
            if (first) lo = hi = v, first = false;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const auto px = [&](double cov) { return L + (1.0 - cov) * pw; }; // rejection rate on x
    const auto py = [&](double v) { return T + (hi - v) / (hi - lo) * ph; };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << L + pw / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
      << "</text>\n";
    s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double frac = k / 5.0;
        const double x = L + frac * pw;
        const double v = lo + frac * (hi - lo);
        const double y = py(v);
        s << "<line x1=\"" << x << "\" y1=\"" << T + ph << "\" x2=\"" << x << "\" y2=\"" << T + ph + 4
          << "\" stroke=\"black\"/>";
        s << "<text x=\"" << x << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">" << fixed(frac, 1)
          << "</text>\n";
        s << "<line x1=\"" << L - 4 << "\" y1=\"" << y << "\" x2=\"" << L << "\" y2=\"" << y << "\" stroke=\"black\"/>";
        s << "<text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fixed(v, 3) << "</text>\n";
    }
    s << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">rejection rate</text>\n";
    std::size_t k = 0;
    for (const auto& [name, c] : curves) {
        const char* colour = kPalette[k % std::size(kPalette)];
        // At most ~200 vertices per curve.
        const std::size_t step = std::max<std::size_t>(1, c.size() / 200);
        s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < c.size(); i += step) {
            if (!std::isfinite(c.value[i])) continue;
            s << fixed(px(c.coverage[i]), 2) << ',' << fixed(py(c.value[i]), 2) << ' ';
        }
        if (c.size() > 0 && std::isfinite(c.value.back()))
            s << fixed(px(c.coverage.back()), 2) << ',' << fixed(py(c.value.back()), 2);
        s << "\"/>\n";
        const double ly = T + 10 + 14.0 * static_cast<double>(k);
        s << "<line x1=\"" << L + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << L + pw + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>";
        s << "<text x=\"" << L + pw + 34 << "\" y=\"" << ly + 4 << "\">" << escape(name) << "</text>\n";
        ++k;
    }
    s << "</svg>\n";
    return s.str();
}

void run_report(const ReportOptions& o) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(io::read_text(o.metrics));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::data, "'" + o.metrics.string() + "': " + e.what());
    }
    if (!doc.contains("entries") || !doc["entries"].is_array())
        fail(ErrorCode::data, "'" + o.metrics.string() + "': no metric entries");

    std::vector<std::string> methods, metrics;
    std::map<std::pair<std::string, std::string>, double> value; // (method, metric|span) -> normalized
    const auto remember = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    try {
        for (const auto& e : doc["entries"]) {
            const auto method = e.at("method").get<std::string>();
            const auto metric = e.at("metric").get<std::string>();
            const auto span = e.at("span").get<std::string>();
            remember(methods, method);
            remember(metrics, metric);
            value[{method, metric + "|" + span}] =
                e.at("normalized").is_null() ? std::nan("") : e.at("normalized").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::data, "'" + o.metrics.string() + "': " + e.what());
    }

    std::ostringstream html;
    html << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Selective prediction report</title>\n"
         << "<style>body{font-family:sans-serif}table{border-collapse:collapse}"
         << "td,th{border:1px solid #999;padding:3px 8px;text-align:right}td:first-child{text-align:left}</style>\n"
         << "</head><body>\n<h1>Selective prediction report</h1>\n";
    html << "<p>task: " << escape(doc.value("task", "")) << ", split: " << escape(doc.value("split", ""))
         << ", mode: " << escape(doc.value("mode", "")) << ". Normalized AUC: 1 = oracle, 0 = random. "
         << "Best per column in bold, second underlined.</p>\n";
    html << "<table>\n<tr><th rowspan=\"2\">method</th>";
    for (const auto& m : metrics) html << "<th colspan=\"2\">" << escape(metric_title(m)) << "</th>";
    html << "</tr>\n<tr>";
    for (std::size_t i = 0; i < metrics.size(); ++i) html << "<th>50%</th><th>100%</th>";
    html << "</tr>\n";

    std::vector<std::string> columns;
    for (const auto& m : metrics) {
        columns.push_back(m + "|first50");
        columns.push_back(m + "|full");
    }
    std::map<std::string, std::vector<int>> marks;
    for (const auto& col : columns) {
        std::vector<double> v;
        for (const auto& m : methods) {
            const auto it = value.find({m, col});
            v.push_back(it == value.end() ? std::nan("") : it->second);
        }
        marks[col] = podium(v);
    }
    for (std::size_t r = 0; r < methods.size(); ++r) {
        html << "<tr><td>" << escape(methods[r]) << "</td>";
        for (const auto& col : columns) {
            const auto it = value.find({methods[r], col});
            if (it == value.end()) {
                html << "<td></td>";
                continue;
            }
            const std::string text = std::isnan(it->second) ? "n/a" : fixed(it->second, 3);
            const int mark = marks[col][r];
            html << "<td>" << (mark == 0 ? "<b>" : mark == 1 ? "<u>" : "") << text
                 << (mark == 0 ? "</b>" : mark == 1 ? "</u>" : "") << "</td>";
        }
        html << "</tr>\n";
    }
    html << "</table>\n";

    const io::fs::path curves_dir = o.curves_dir.empty() ? o.metrics.parent_path() / "curves" : o.curves_dir;
    std::string first_svg;
    for (const auto& metric : metrics) {
        std::vector<std::pair<std::string, RejectionCurve>> curves;
        for (const auto& m : methods) {
            const auto path = curves_dir / (m + "__" + metric + ".csv");
            if (io::fs::exists(path)) curves.emplace_back(m, read_curve(path));
        }
        if (curves.empty()) continue;
        const auto svg = render_curves_svg(curves, metric_title(metric) + " rejection curves");
        if (first_svg.empty()) first_svg = svg;
        html << "<h2>" << escape(metric_title(metric)) << " rejection curves</h2>\n" << svg;
    }
    html << "</body></html>\n";
    io::write_text(o.out, html.str());
    if (!first_svg.empty()) {
        auto svg_path = o.out;
        svg_path.replace_extension(".svg");
        if (svg_path != o.out) io::write_text(svg_path, first_svg);
    }
}

} // namespace abstain
