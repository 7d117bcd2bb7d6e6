#include "tgiqa/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>

namespace tgiqa {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 480;
constexpr double kLeft = 70;
constexpr double kRight = 170;  // room for the legend
constexpr double kTop = 20;
constexpr double kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Axis {
    double lo;
    double hi;
    double pix_lo;
    double pix_hi;

    double map(double v) const { return pix_lo + (v - lo) / (hi - lo) * (pix_hi - pix_lo); }
};

Axis fit_axis(double lo, double hi, double pix_lo, double pix_hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad, pix_lo, pix_hi};
}

std::string frame(const Axis& x, const Axis& y, const std::string& x_label, const std::string& y_label) {
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
    s += "<g stroke=\"black\" fill=\"none\">\n";
    s += "<line x1=\"" + num(x.pix_lo) + "\" y1=\"" + num(y.pix_lo) + "\" x2=\"" + num(x.pix_hi) + "\" y2=\"" +
         num(y.pix_lo) + "\"/>\n";
    s += "<line x1=\"" + num(x.pix_lo) + "\" y1=\"" + num(y.pix_lo) + "\" x2=\"" + num(x.pix_lo) + "\" y2=\"" +
         num(y.pix_hi) + "\"/>\n";
    s += "</g>\n<g fill=\"black\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x.lo + (x.hi - x.lo) * i / 4.0;
        const double yv = y.lo + (y.hi - y.lo) * i / 4.0;
        s += "<text x=\"" + num(x.map(xv)) + "\" y=\"" + num(y.pix_lo + 18) + "\" text-anchor=\"middle\">" + tick(xv) +
             "</text>\n";
        s += "<text x=\"" + num(x.pix_lo - 6) + "\" y=\"" + num(y.map(yv) + 4) + "\" text-anchor=\"end\">" + tick(yv) +
             "</text>\n";
    }
    s += "<text x=\"" + num(0.5 * (x.pix_lo + x.pix_hi)) + "\" y=\"" + num(kHeight - 15) +
         "\" text-anchor=\"middle\">" + xml_escape(x_label) + "</text>\n";
    s += "<text x=\"18\" y=\"" + num(0.5 * (y.pix_lo + y.pix_hi)) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         num(0.5 * (y.pix_lo + y.pix_hi)) + ")\">" + xml_escape(y_label) + "</text>\n";
    s += "</g>\n";
    return s;
}

}  // namespace

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string scatter_svg(std::span<const GroupSummary> groups, const std::string& x_label,
                        const std::string& y_label) {
    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
    std::map<std::string, std::size_t> colour;
    for (const auto& g : groups) {
        x_lo = std::min(x_lo, g.mean_q);
        x_hi = std::max(x_hi, g.mean_q);
        y_lo = std::min(y_lo, g.mean_m);
        y_hi = std::max(y_hi, g.mean_m);
        colour.emplace(g.key.corruption, 0);
    }
    if (groups.empty()) x_lo = x_hi = y_lo = y_hi = 0.0;
    std::size_t next = 0;
    for (auto& [name, c] : colour) c = next++ % std::size(kPalette);

    const Axis x = fit_axis(x_lo, x_hi, kLeft, kWidth - kRight);
    const Axis y = fit_axis(y_lo, y_hi, kHeight - kBottom, kTop);
    std::string s = frame(x, y, x_label, y_label);
    s += "<g stroke=\"black\" stroke-width=\"0.5\">\n";
    for (const auto& g : groups) {
        s += "<circle cx=\"" + num(x.map(g.mean_q)) + "\" cy=\"" + num(y.map(g.mean_m)) + "\" r=\"4\" fill=\"" +
             kPalette[colour[g.key.corruption]] + "\"><title>" + xml_escape(g.key.corruption) + " " +
             std::to_string(g.key.severity) + "</title></circle>\n";
    }
    s += "</g>\n<g>\n";
    double ly = kTop + 10;
    for (const auto& [name, c] : colour) {
        s += "<rect x=\"" + num(kWidth - kRight + 20) + "\" y=\"" + num(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
             kPalette[c] + "\"/>\n";
        s += "<text x=\"" + num(kWidth - kRight + 36) + "\" y=\"" + num(ly) + "\">" + xml_escape(name) + "</text>\n";
        ly += 16;
    }
    s += "</g>\n</svg>\n";
    return s;
}

std::string line_chart_svg(std::span<const LinePoint> points, const std::string& x_label, const std::string& y_label) {
    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
    for (const auto& p : points) {
        x_lo = std::min(x_lo, p.x);
        x_hi = std::max(x_hi, p.x);
        y_lo = std::min({y_lo, p.y, p.lo});
        y_hi = std::max({y_hi, p.y, p.hi});
    }
    if (points.empty()) x_lo = x_hi = y_lo = y_hi = 0.0;
    const Axis x = fit_axis(x_lo, x_hi, kLeft, kWidth - kRight);
    const Axis y = fit_axis(y_lo, y_hi, kHeight - kBottom, kTop);
    std::string s = frame(x, y, x_label, y_label);
    s += "<g stroke=\"#1f77b4\">\n";
    for (const auto& p : points) {
        if (p.hi > p.lo) {
            s += "<line x1=\"" + num(x.map(p.x)) + "\" y1=\"" + num(y.map(p.lo)) + "\" x2=\"" + num(x.map(p.x)) +
                 "\" y2=\"" + num(y.map(p.hi)) + "\"/>\n";
        }
    }
    std::string pts;
    for (const auto& p : points) pts += (pts.empty() ? "" : " ") + num(x.map(p.x)) + "," + num(y.map(p.y));
    s += "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    for (const auto& p : points) {
        s += "<circle cx=\"" + num(x.map(p.x)) + "\" cy=\"" + num(y.map(p.y)) + "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    }
    s += "</g>\n</svg>\n";
    return s;
}

std::string predictability_json(std::span<const PredictabilitySummary> rows) {
    auto doc = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["metric"] = r.metric;
        j["model"] = r.model;
        j["auc"] = r.pointwise.auc;
        j["auc_ci"] = {r.pointwise.auc_ci.lo, r.pointwise.auc_ci.hi};
        j["ce"] = r.pointwise.ce;
        j["ce_ci"] = {r.pointwise.ce_ci.lo, r.pointwise.ce_ci.hi};
        if (r.per_label) {
            j["mauc"] = r.per_label->mauc;
            j["mauc_sigma"] = r.per_label->sigma_auc;
            j["mce"] = r.per_label->mce;
            j["skipped"] = r.per_label->labels_skipped;
        } else {
            j["mauc"] = nullptr;
            j["mauc_sigma"] = nullptr;
            j["mce"] = nullptr;
            j["skipped"] = 0;
        }
        if (r.per_image) {
            j["image_kfold"] = {{"mauc", r.per_image->mauc},
                                {"sigma", r.per_image->sigma},
                                {"mce", r.per_image->mce},
                                {"ids_used", r.per_image->ids_used},
                                {"ids_skipped", r.per_image->ids_skipped}};
        }
        j["train_size"] = r.pointwise.train_size;
        j["test_size"] = r.pointwise.test_size;
        j["weight"] = r.pointwise.model.weight;
        j["bias"] = r.pointwise.model.bias;
        doc.push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

}  // namespace tgiqa
