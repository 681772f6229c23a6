#include "emaattn/svg.hpp"

#include "emaattn/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace emaattn {
namespace {

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

const char* colour(int i) { return kPalette[static_cast<std::size_t>(i) % kPalette.size()]; }

std::string num(double v, int decimals = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s == "-0.00" || s == "-0.0" || s == "-0") s.erase(0, 1);
  return s;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

class SvgDoc {
 public:
  SvgDoc(double width, double height) : width_(width), height_(height) {}

  void line(double x1, double y1, double x2, double y2, const char* stroke = "#000", const char* cls = "axis") {
    body_ << "<line class=\"" << cls << "\" x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
          << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill, const char* cls) {
    body_ << "<rect class=\"" << cls << "\" x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
          << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
  }
  void circle(double cx, double cy, double r, const char* fill) {
    body_ << "<circle class=\"point\" cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r)
          << "\" fill=\"" << fill << "\" fill-opacity=\"0.7\"/>\n";
  }
  void text(double x, double y, const std::string& s, const char* anchor = "middle", const char* cls = "label",
            int size = 10, double rotate = 0.0) {
    body_ << "<text class=\"" << cls << "\" x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
          << "\" text-anchor=\"" << anchor << "\"";
    if (rotate != 0.0) body_ << " transform=\"rotate(" << num(rotate) << ' ' << num(x) << ' ' << num(y) << ")\"";
    body_ << ">" << escape(s) << "</text>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_, 0) << "\" height=\"" << num(height_, 0)
        << "\" viewBox=\"0 0 " << num(width_, 0) << ' ' << num(height_, 0) << "\" font-family=\"sans-serif\">\n"
        << "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" << num(width_, 0) << "\" height=\""
        << num(height_, 0) << "\" fill=\"#ffffff\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double width_;
  double height_;
  std::ostringstream body_;
};

// Linear map of [lo, hi] onto [a, b]; a degenerate range maps to the midpoint.
double scale(double v, double lo, double hi, double a, double b) {
  if (hi <= lo) return 0.5 * (a + b);
  return a + (v - lo) / (hi - lo) * (b - a);
}

std::string heat_colour(double v, double lo, double hi) {
  const double t = std::clamp(hi > lo ? (v - lo) / (hi - lo) : 0.0, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 - t * (255 - 178)));
  const int g = static_cast<int>(std::lround(255 - t * (255 - 24)));
  const int b = static_cast<int>(std::lround(255 - t * (255 - 43)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string render_correlation_bars(const std::vector<CorrelationProfile>& profiles,
                                    const std::vector<std::string>& feature_names) {
  if (profiles.empty() || feature_names.empty()) throw Error(Errc::empty_artifact, "no correlation profiles");
  const double panel_w = 40.0 + 22.0 * static_cast<double>(feature_names.size());
  const double panel_h = 220.0;
  const double top = 40.0;
  SvgDoc doc(60.0 + panel_w * static_cast<double>(profiles.size()), top + panel_h + 90.0);
  doc.text(30.0 + 0.5 * panel_w * static_cast<double>(profiles.size()), 20.0,
           "Correlation of averaged temporal attention with each feature", "middle", "title", 13);

  for (std::size_t p = 0; p < profiles.size(); ++p) {
    const double x0 = 50.0 + panel_w * static_cast<double>(p);
    const double zero_y = top + panel_h / 2.0;
    doc.line(x0, top, x0, top + panel_h);
    doc.line(x0, zero_y, x0 + panel_w - 20.0, zero_y);
    for (double tick : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      const double y = scale(tick, -1.0, 1.0, top + panel_h, top);
      doc.line(x0 - 4.0, y, x0, y, "#000", "tick");
      if (p == 0) doc.text(x0 - 6.0, y + 3.0, num(tick, 1), "end", "tick-label", 9);
    }
    doc.text(x0 + 0.5 * (panel_w - 20.0), top - 6.0, "Cluster " + std::to_string(profiles[p].cluster), "middle",
             "panel-title", 11);
    for (std::size_t f = 0; f < feature_names.size(); ++f) {
      const double r = f < static_cast<std::size_t>(profiles[p].r.size()) ? profiles[p].r(static_cast<Eigen::Index>(f)) : 0.0;
      const double y = scale(r, -1.0, 1.0, top + panel_h, top);
      const double bx = x0 + 6.0 + 22.0 * static_cast<double>(f);
      doc.rect(bx, std::min(y, zero_y), 16.0, std::abs(y - zero_y), r < 0.0 ? "#d62728" : "#1f77b4", "bar");
      doc.text(bx + 8.0, top + panel_h + 12.0, feature_names[f], "end", "axis-label", 9, -60.0);
    }
  }
  return doc.str();
}

std::string render_heatmap(const FeatureAttentionHeatmap& heatmap, const std::vector<std::string>& feature_names) {
  const Eigen::Index v = heatmap.weights.rows();
  if (v == 0 || heatmap.weights.cols() != v || static_cast<Eigen::Index>(feature_names.size()) != v) {
    throw Error(Errc::empty_artifact, "heatmap is empty or does not match the feature names");
  }
  const double cell = 36.0;
  const double left = 110.0;
  const double top = 50.0;
  SvgDoc doc(left + cell * static_cast<double>(v) + 30.0, top + cell * static_cast<double>(v) + 100.0);
  doc.text(left + 0.5 * cell * static_cast<double>(v), 22.0,
           "Cluster " + std::to_string(heatmap.cluster) + " mean feature-level attention", "middle", "title", 13);
  const double lo = heatmap.weights.minCoeff();
  const double hi = heatmap.weights.maxCoeff();
  for (Eigen::Index i = 0; i < v; ++i) {
    for (Eigen::Index j = 0; j < v; ++j) {
      const double x = left + cell * static_cast<double>(j);
      const double y = top + cell * static_cast<double>(i);
      doc.rect(x, y, cell, cell, heat_colour(heatmap.weights(i, j), lo, hi), "cell");
      doc.text(x + cell / 2.0, y + cell / 2.0 + 3.0, num(heatmap.weights(i, j)), "middle", "cell-value", 9);
    }
  }
  for (Eigen::Index i = 0; i < v; ++i) {
    const auto& name = feature_names[static_cast<std::size_t>(i)];
    doc.text(left - 6.0, top + cell * (static_cast<double>(i) + 0.5) + 3.0, name, "end", "axis-label", 10);
    const double x = left + cell * (static_cast<double>(i) + 0.5);
    doc.text(x, top + cell * static_cast<double>(v) + 12.0, name, "end", "axis-label", 10, -60.0);
  }
  return doc.str();
}

std::string render_scatter(const std::vector<AttentionFeatureRecord>& records, const std::string& feature_name) {
  if (records.empty()) throw Error(Errc::empty_artifact, "no scatter records");
  double x_lo = records.front().mean_feature, x_hi = x_lo;
  double y_lo = records.front().mean_attention, y_hi = y_lo;
  std::set<int> clusters;
  std::size_t n_models = 0;
  for (const auto& r : records) {
    x_lo = std::min(x_lo, r.mean_feature);
    x_hi = std::max(x_hi, r.mean_feature);
    y_lo = std::min(y_lo, r.mean_attention);
    y_hi = std::max(y_hi, r.mean_attention);
    clusters.insert(r.cluster);
    n_models = std::max(n_models, r.model + 1);
  }
  const double panel = 240.0;
  const double left = 70.0;
  const double top = 50.0;
  const double width = left + (panel + 40.0) * static_cast<double>(n_models) + 110.0;
  SvgDoc doc(width, top + panel + 60.0);
  doc.text(0.5 * width, 22.0, feature_name + " against mean temporal attention", "middle", "title", 13);
  for (std::size_t m = 0; m < n_models; ++m) {
    const double x0 = left + (panel + 40.0) * static_cast<double>(m);
    doc.line(x0, top, x0, top + panel);
    doc.line(x0, top + panel, x0 + panel, top + panel);
    doc.text(x0 + panel / 2.0, top - 8.0, "Model " + std::to_string(m), "middle", "panel-title", 11);
    doc.text(x0 + panel / 2.0, top + panel + 30.0, feature_name, "middle", "axis-label", 10);
    doc.text(x0 - 6.0, top + panel + 3.0, num(y_lo, 3), "end", "tick-label", 9);
    doc.text(x0 - 6.0, top + 3.0, num(y_hi, 3), "end", "tick-label", 9);
    doc.text(x0, top + panel + 14.0, num(x_lo), "middle", "tick-label", 9);
    doc.text(x0 + panel, top + panel + 14.0, num(x_hi), "middle", "tick-label", 9);
  }
  for (const auto& r : records) {
    const double x0 = left + (panel + 40.0) * static_cast<double>(r.model);
    const double cx = scale(r.mean_feature, x_lo, x_hi, x0 + 6.0, x0 + panel - 6.0);
    const double cy = scale(r.mean_attention, y_lo, y_hi, top + panel - 6.0, top + 6.0);
    doc.circle(cx, cy, 3.5, colour(r.cluster));
  }
  double ly = top + 10.0;
  const double lx = width - 100.0;
  for (int c : clusters) {
    doc.rect(lx, ly - 8.0, 10.0, 10.0, colour(c), "legend-marker");
    doc.text(lx + 16.0, ly, "Cluster " + std::to_string(c), "start", "legend", 10);
    ly += 16.0;
  }
  return doc.str();
}

std::string render_summary(const IndividualSummary& summary, const std::vector<std::string>& feature_names) {
  if (summary.features.empty() || summary.features.front().empty()) {
    throw Error(Errc::empty_artifact, "individual summary has no entries");
  }
  const std::size_t v = summary.features.size();
  double w_lo = summary.features.front().front().weight, w_hi = w_lo;
  for (const auto& f : summary.features) {
    for (const auto& e : f) {
      w_lo = std::min(w_lo, e.weight);
      w_hi = std::max(w_hi, e.weight);
    }
  }
  const double row_h = 26.0;
  const double left = 120.0;
  const double plot_w = 360.0;
  const double top = 50.0;
  SvgDoc doc(left + plot_w + 140.0, top + row_h * static_cast<double>(v) + 50.0);
  doc.text(left + plot_w / 2.0, 22.0,
           "Individual " + summary.id + " (cluster " + std::to_string(summary.cluster) + ", model " +
               std::to_string(summary.model) + ")",
           "middle", "title", 13);
  doc.line(left, top, left, top + row_h * static_cast<double>(v));
  doc.line(left, top + row_h * static_cast<double>(v), left + plot_w, top + row_h * static_cast<double>(v));
  doc.text(left, top + row_h * static_cast<double>(v) + 14.0, "0", "middle", "tick-label", 9);
  doc.text(left + plot_w, top + row_h * static_cast<double>(v) + 14.0, "1", "middle", "tick-label", 9);
  doc.text(left + plot_w / 2.0, top + row_h * static_cast<double>(v) + 30.0, "feature value", "middle",
           "axis-label", 10);
  for (std::size_t f = 0; f < v; ++f) {
    const double cy = top + row_h * (static_cast<double>(f) + 0.5);
    doc.text(left - 6.0, cy + 3.0, f < feature_names.size() ? feature_names[f] : std::to_string(f), "end",
             "axis-label", 10);
    for (const auto& e : summary.features[f]) {
      const double x = left + std::clamp(e.value, 0.0, 1.0) * plot_w;
      const double t = w_hi > w_lo ? (e.weight - w_lo) / (w_hi - w_lo) : 0.5;
      doc.circle(x, cy + (t - 0.5) * row_h * 0.6, 2.5, t > 0.5 ? "#d62728" : "#1f77b4");
    }
  }
  doc.rect(left + plot_w + 20.0, top, 10.0, 10.0, "#d62728", "legend-marker");
  doc.text(left + plot_w + 36.0, top + 9.0, "high attention", "start", "legend", 10);
  doc.rect(left + plot_w + 20.0, top + 16.0, 10.0, 10.0, "#1f77b4", "legend-marker");
  doc.text(left + plot_w + 36.0, top + 25.0, "low attention", "start", "legend", 10);
  return doc.str();
}

}  // namespace emaattn
