#include "autoenv/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

namespace autoenv::report {

std::string fmt(double v, int precision) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? fmt(*v, 10) : ""; }

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr double kWidth = 640;
constexpr double kHeight = 480;
constexpr double kMargin = 60;

struct Frame {
    double x0, x1, y0, y1;

    [[nodiscard]] double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
    [[nodiscard]] double py(double y) const {
        return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin);
    }
};

Frame make_frame(double x0, double x1, double y0, double y1) {
    auto widen = [](double& lo, double& hi) {
        if (!(hi > lo)) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    };
    widen(x0, x1);
    widen(y0, y1);
    return {x0, x1, y0, y1};
}

void axes(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xl,
          const std::string& yl) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
       << "</text>\n";
    os << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin << "\" y2=\""
       << kHeight - kMargin << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
       << kHeight - kMargin << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
        const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
        os << "<text x=\"" << fmt(f.px(x), 5) << "\" y=\"" << kHeight - kMargin + 16
           << "\" text-anchor=\"middle\">" << fmt(x, 3) << "</text>\n";
        os << "<text x=\"" << kMargin - 6 << "\" y=\"" << fmt(f.py(y) + 4, 5) << "\" text-anchor=\"end\">"
           << fmt(y, 3) << "</text>\n";
    }
    os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16 << "\" text-anchor=\"middle\">" << escape(xl)
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << kHeight / 2 << ")\">" << escape(yl) << "</text>\n";
}

}  // namespace

std::string trials_csv(const std::vector<hpo::TrialRecord>& trials) {
    const auto space = env::DesignSpace::standard(true);
    std::ostringstream os;
    os << "id,tag,status,invalid_share,mean_error,invalid_share_std,mean_error_std,wall_seconds";
    for (const auto& v : space.variables()) os << ',' << v.name;
    os << '\n';
    for (const auto& t : trials) {
        os << t.id << ',' << t.tag << ',' << (t.status == hpo::TrialStatus::complete ? "complete" : "failed") << ','
           << opt(t.metrics.invalid_share) << ',' << opt(t.metrics.mean_error) << ',' << opt(t.invalid_share_std)
           << ',' << opt(t.mean_error_std) << ',' << fmt(t.wall_seconds, 4);
        for (const auto& v : space.variables()) os << ',' << fmt(env::get_value(t.design, v.name), 10);
        os << '\n';
    }
    return os.str();
}

std::string pareto_svg(const std::vector<hpo::TrialRecord>& trials, const std::vector<hpo::TrialRecord>& baselines,
                       const std::string& title) {
    const auto front = hpo::pareto_front(trials);
    const std::set<const hpo::TrialRecord*> on_front(front.begin(), front.end());
    double x0 = std::numeric_limits<double>::infinity();
    double x1 = -x0;
    double y0 = x0;
    double y1 = -x0;
    auto extend = [&](const hpo::TrialRecord& t) {
        if (!t.rankable()) return;
        const double x = *t.metrics.invalid_share;
        const double y = *t.metrics.mean_error;
        const double sx = t.invalid_share_std.value_or(0.0);
        const double sy = t.mean_error_std.value_or(0.0);
        x0 = std::min(x0, x - sx);
        x1 = std::max(x1, x + sx);
        y0 = std::min(y0, y - sy);
        y1 = std::max(y1, y + sy);
    };
    for (const auto& t : trials) extend(t);
    for (const auto& t : baselines) extend(t);
    if (!std::isfinite(x0)) {
        x0 = 0;
        x1 = 1;
        y0 = 0;
        y1 = 1;
    }
    const Frame f = make_frame(x0, x1, y0, y1);
    std::ostringstream os;
    axes(os, f, title, "invalid share", "mean error");
    auto point = [&](const hpo::TrialRecord& t, const char* color) {
        const double x = *t.metrics.invalid_share;
        const double y = *t.metrics.mean_error;
        const double sx = t.invalid_share_std.value_or(0.0);
        const double sy = t.mean_error_std.value_or(0.0);
        os << "<g stroke=\"" << color << "\" stroke-opacity=\"0.5\">"
           << "<line x1=\"" << fmt(f.px(x - sx), 6) << "\" y1=\"" << fmt(f.py(y), 6) << "\" x2=\""
           << fmt(f.px(x + sx), 6) << "\" y2=\"" << fmt(f.py(y), 6) << "\"/>"
           << "<line x1=\"" << fmt(f.px(x), 6) << "\" y1=\"" << fmt(f.py(y - sy), 6) << "\" x2=\"" << fmt(f.px(x), 6)
           << "\" y2=\"" << fmt(f.py(y + sy), 6) << "\"/></g>\n";
        os << "<circle cx=\"" << fmt(f.px(x), 6) << "\" cy=\"" << fmt(f.py(y), 6) << "\" r=\"4\" fill=\"" << color
           << "\"><title>" << t.tag << ' ' << t.id << "</title></circle>\n";
    };
    for (const auto& t : trials) {
        if (t.rankable() && !on_front.count(&t)) point(t, "blue");
    }
    for (const auto& t : trials) {
        if (t.rankable() && on_front.count(&t)) point(t, "red");
    }
    for (const auto& t : baselines) {
        if (t.rankable()) point(t, "green");
    }
    os << "<g font-size=\"11\"><circle cx=\"" << kWidth - 150 << "\" cy=\"44\" r=\"4\" fill=\"red\"/><text x=\""
       << kWidth - 140 << "\" y=\"48\">non-dominated</text>"
       << "<circle cx=\"" << kWidth - 150 << "\" cy=\"60\" r=\"4\" fill=\"blue\"/><text x=\"" << kWidth - 140
       << "\" y=\"64\">dominated</text>"
       << "<circle cx=\"" << kWidth - 150 << "\" cy=\"76\" r=\"4\" fill=\"green\"/><text x=\"" << kWidth - 140
       << "\" y=\"80\">baseline</text></g>\n";
    os << "</svg>\n";
    return os.str();
}

std::string curves_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& y_label) {
    static const char* colors[] = {"red", "green", "blue", "orange", "purple", "black", "brown", "teal"};
    double x0 = std::numeric_limits<double>::infinity();
    double x1 = -x0;
    double y0 = x0;
    double y1 = -x0;
    for (const auto& c : curves) {
        for (const auto& [x, y] : c.points) {
            if (!std::isfinite(y)) continue;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    if (!std::isfinite(x0)) {
        x0 = 0;
        x1 = 1;
        y0 = 0;
        y1 = 1;
    }
    const Frame f = make_frame(x0, x1, y0, y1);
    std::ostringstream os;
    axes(os, f, title, "training steps", y_label);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = colors[i % std::size(colors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (const auto& [x, y] : curves[i].points) {
            if (!std::isfinite(y)) continue;
            os << (first ? "" : " ") << fmt(f.px(x), 6) << ',' << fmt(f.py(y), 6);
            first = false;
        }
        os << "\"/>\n";
        os << "<text x=\"" << kMargin + 10 << "\" y=\"" << kMargin + 14 * static_cast<double>(i) << "\" fill=\""
           << color << "\">" << escape(curves[i].label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string curves_csv(const std::vector<Curve>& curves) {
    std::ostringstream os;
    os << "label,step,value\n";
    for (const auto& c : curves) {
        for (const auto& [x, y] : c.points) os << c.label << ',' << fmt(x, 10) << ',' << fmt(y, 10) << '\n';
    }
    return os.str();
}

std::vector<double> rolling_average(const std::vector<double>& values, std::size_t window) {
    if (window == 0) window = 1;
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
        double s = 0.0;
        for (std::size_t k = lo; k <= i; ++k) s += values[k];
        out[i] = s / static_cast<double>(i - lo + 1);
    }
    return out;
}

}  // namespace autoenv::report
