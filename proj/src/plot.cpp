#include "acmloc/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

namespace acmloc {

Traces collect_traces(const Network<float>& net, const HyperParams& hp, const MatF& native_features,
                      const VideoRecord& record, const std::vector<std::string>& class_names, ResampleMode resample) {
    const VideoInference inf = infer_video(net, hp, native_features, record, resample);
    std::vector<int> classes = record.label.class_ids;
    if (classes.empty()) classes = inf.classes;

    Traces tr;
    tr.ground_truth = record.instances;
    tr.duration_s = record.duration_s;
    const TimeMap tm = time_map_for(record, static_cast<int>(native_features.rows()), hp.T);
    for (int t = 0; t < hp.T; ++t) {
        const Segment s = tm.to_seconds(t, t + 1);
        tr.time_s.push_back(0.5 * (s.start + s.end));
    }
    auto column = [&](const MatF& m, int c) {
        std::vector<double> v(m.rows());
        for (Eigen::Index t = 0; t < m.rows(); ++t) v[t] = m(t, c);
        return v;
    };
    for (int c : classes) tr.series.push_back({"cas_" + class_names.at(c), column(inf.acts.phi, c)});
    tr.series.push_back({"att_ins", column(inf.acts.att, kIns)});
    for (int c : classes) tr.series.push_back({"cas_ins_" + class_names.at(c), column(inf.acts.cas_ins, c)});
    return tr;
}

void write_traces_csv(const std::filesystem::path& path, const Traces& traces) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot open '" + path.string() + "' for writing");
    out << "time_s";
    for (const auto& s : traces.series) out << ',' << s.name;
    out << '\n';
    char buf[64];
    for (std::size_t t = 0; t < traces.time_s.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%.6g", traces.time_s[t]);
        out << buf;
        for (const auto& s : traces.series) {
            std::snprintf(buf, sizeof buf, "%.9g", s.values[t]);
            out << ',' << buf;
        }
        out << '\n';
    }
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

void write_traces_svg(const std::filesystem::path& path, const Traces& traces, const std::string& title) {
    constexpr double W = 900, panel_h = 160, left = 60, right = 20, top = 40, gap = 30;
    const double plot_w = W - left - right;
    const double H = top + 3 * panel_h + 2 * gap + 30;
    const double t_max = std::max(traces.duration_s, traces.time_s.empty() ? 1.0 : traces.time_s.back());

    std::ofstream out(path);
    if (!out) throw LoadError("cannot open '" + path.string() + "' for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";

    const char* panel_names[3] = {"CAS", "att_ins", "CAS_ins"};
    for (int panel = 0; panel < 3; ++panel) {
        const double y0 = top + panel * (panel_h + gap);
        std::vector<const TraceSeries*> members;
        for (const auto& s : traces.series) {
            const bool is_att = s.name == "att_ins";
            const bool is_ins = s.name.rfind("cas_ins_", 0) == 0;
            if ((panel == 1 && is_att) || (panel == 2 && is_ins) || (panel == 0 && !is_att && !is_ins))
                members.push_back(&s);
        }
        double lo = panel == 1 ? 0.0 : std::numeric_limits<double>::max();
        double hi = panel == 1 ? 1.0 : std::numeric_limits<double>::lowest();
        if (panel != 1) {
            for (const auto* s : members)
                for (double v : s->values) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            if (!(hi > lo)) {
                lo -= 0.5;
                hi += 0.5;
            }
        }
        auto sx = [&](double t) { return left + plot_w * t / t_max; };
        auto sy = [&](double v) { return y0 + panel_h - panel_h * (v - lo) / (hi - lo); };

        for (const auto& g : traces.ground_truth)
            out << "<rect x=\"" << sx(g.start_s) << "\" y=\"" << y0 << "\" width=\"" << sx(g.end_s) - sx(g.start_s)
                << "\" height=\"" << panel_h << "\" fill=\"#f2d9a6\" opacity=\"0.6\"/>\n";
        out << "<rect x=\"" << left << "\" y=\"" << y0 << "\" width=\"" << plot_w << "\" height=\"" << panel_h
            << "\" fill=\"none\" stroke=\"#444\"/>\n";
        out << "<text x=\"5\" y=\"" << y0 + 12 << "\">" << panel_names[panel] << "</text>\n";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", hi);
        out << "<text x=\"5\" y=\"" << y0 + 26 << "\" fill=\"#666\">" << buf << "</text>\n";
        std::snprintf(buf, sizeof buf, "%.3g", lo);
        out << "<text x=\"5\" y=\"" << y0 + panel_h << "\" fill=\"#666\">" << buf << "</text>\n";

        for (std::size_t m = 0; m < members.size(); ++m) {
            out << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[m % 6] << "\" points=\"";
            for (std::size_t t = 0; t < traces.time_s.size(); ++t) out << sx(traces.time_s[t]) << ',' << sy(members[m]->values[t]) << ' ';
            out << "\"/>\n";
            out << "<text x=\"" << left + plot_w - 150 << "\" y=\"" << y0 + 14 + 12 * m << "\" fill=\"" << kPalette[m % 6]
                << "\">" << members[m]->name << "</text>\n";
        }
    }
    const double axis_y = top + 3 * panel_h + 2 * gap + 15;
    out << "<text x=\"" << left << "\" y=\"" << axis_y << "\">0 s</text>\n";
    out << "<text x=\"" << left + plot_w - 40 << "\" y=\"" << axis_y << "\">" << t_max << " s</text>\n";
    out << "</svg>\n";
}

}  // namespace acmloc
