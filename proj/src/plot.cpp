#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "fedlc/error.hpp"
#include "fedlc/fileio.hpp"
#include "fedlc/harness.hpp"

namespace fedlc {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 200, kTop = 30, kBottom = 60;

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string color(std::size_t i, std::size_t n) {
    std::ostringstream s;
    s << "hsl(" << (i * 360 / std::max<std::size_t>(n, 1)) % 360 << ",70%,40%)";
    return s.str();
}

}  // namespace

std::string render_accuracy_svg(const std::vector<PlotSeries>& series) {
    double x_lo = 0, x_hi = 1;
    bool first = true;
    for (const auto& s : series) {
        for (double x : s.rounds) {
            if (first) {
                x_lo = x_hi = x;
                first = false;
            }
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
        }
    }
    if (x_hi <= x_lo) x_hi = x_lo + 1;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto py = [&](double y) { return kTop + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };

    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<g id=\"axes\" stroke=\"black\">\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
        << "\"/>\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph << "\"/>\n";
    out << "</g>\n";
    for (int t = 0; t <= 5; ++t) {
        const double y = t / 5.0;
        out << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << std::setprecision(1)
            << y << std::setprecision(2) << "</text>\n";
        const double x = x_lo + (x_hi - x_lo) * t / 5.0;
        out << "<text x=\"" << px(x) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
            << std::setprecision(0) << x << std::setprecision(2) << "</text>\n";
    }
    out << "<text id=\"x-label\" x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15
        << "\" text-anchor=\"middle\">round</text>\n";
    out << "<text id=\"y-label\" transform=\"translate(18," << kTop + ph / 2
        << ") rotate(-90)\" text-anchor=\"middle\">test accuracy</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        out << "<polyline id=\"series-" << i << "\" fill=\"none\" stroke=\"" << color(i, series.size())
            << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < s.rounds.size() && k < s.accuracy.size(); ++k) {
            if (k) out << ' ';
            out << px(s.rounds[k]) << ',' << py(s.accuracy[k]);
        }
        out << "\"/>\n";
    }
    out << "<g id=\"legend\">\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double y = kTop + 10 + 18.0 * static_cast<double>(i);
        out << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << y << "\" x2=\"" << kLeft + pw + 32 << "\" y2=\"" << y
            << "\" stroke=\"" << color(i, series.size()) << "\" stroke-width=\"2\"/>";
        out << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << y + 4 << "\">" << escape_xml(series[i].label)
            << "</text>\n";
    }
    out << "</g>\n</svg>\n";
    return out.str();
}

PlotSeries read_metrics_series(const std::filesystem::path& jsonl, const std::string& label) {
    PlotSeries s;
    s.label = label;
    std::istringstream in(read_file(jsonl));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            s.rounds.push_back(j.at("round").get<double>());
            s.accuracy.push_back(j.at("test_acc").get<double>());
        } catch (const nlohmann::json::exception& e) {
            throw IngestionError(jsonl.string() + ":" + std::to_string(line_no), e.what());
        }
    }
    return s;
}

namespace {

// "<config name> seed <s>" for run directories, otherwise the file name.
std::string series_label(const std::filesystem::path& jsonl) {
    const auto seed_dir = jsonl.parent_path();
    const auto run_dir = seed_dir.parent_path();
    const auto cfg = run_dir / "config.cfg";
    const std::string dir_name = seed_dir.filename().string();
    if (dir_name.rfind("seed_", 0) == 0 && std::filesystem::exists(cfg)) {
        try {
            return load_config(cfg).name + " seed " + dir_name.substr(5);
        } catch (const std::exception&) {
        }
    }
    return jsonl.string();
}

}  // namespace

void emit_plot(const std::vector<std::filesystem::path>& metrics, const std::filesystem::path& out_svg) {
    if (metrics.empty()) throw ConfigError("metrics", "no input runs to plot");
    std::vector<PlotSeries> series;
    for (const auto& m : metrics) series.push_back(read_metrics_series(m, series_label(m)));
    write_file_atomic(out_svg, render_accuracy_svg(series));
}

}  // namespace fedlc
