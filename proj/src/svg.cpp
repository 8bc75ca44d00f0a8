#include "mpr/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace mpr::svg {

namespace {
std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
}  // namespace

Document::Document(double width, double height) : width_(width), height_(height) {}

void Document::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                    double stroke_width, const std::string& dash) {
  body_ << "<line x1='" << fmt(x1) << "' y1='" << fmt(y1) << "' x2='" << fmt(x2) << "' y2='"
        << fmt(y2) << "' stroke='" << stroke << "' stroke-width='" << fmt(stroke_width) << "'";
  if (!dash.empty()) body_ << " stroke-dasharray='" << dash << "'";
  body_ << "/>\n";
}

void Document::polyline(const std::vector<std::pair<double, double>>& pts,
                        const std::string& stroke, double stroke_width) {
  body_ << "<polyline fill='none' stroke='" << stroke << "' stroke-width='" << fmt(stroke_width)
        << "' points='";
  for (const auto& [x, y] : pts) body_ << fmt(x) << ',' << fmt(y) << ' ';
  body_ << "'/>\n";
}

void Document::rect(double x, double y, double w, double h, const std::string& fill,
                    double opacity, const std::string& stroke) {
  body_ << "<rect x='" << fmt(x) << "' y='" << fmt(y) << "' width='" << fmt(w) << "' height='"
        << fmt(h) << "' fill='" << fill << "' fill-opacity='" << fmt(opacity) << "' stroke='"
        << stroke << "'/>\n";
}

void Document::circle(double cx, double cy, double r, const std::string& fill) {
  body_ << "<circle cx='" << fmt(cx) << "' cy='" << fmt(cy) << "' r='" << fmt(r) << "' fill='"
        << fill << "'/>\n";
}

void Document::text(double x, double y, const std::string& s, double size,
                    const std::string& anchor) {
  body_ << "<text x='" << fmt(x) << "' y='" << fmt(y) << "' font-size='" << fmt(size)
        << "' font-family='sans-serif' text-anchor='" << anchor << "'>" << s << "</text>\n";
}

std::string Document::str() const {
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << fmt(width_) << "' height='"
     << fmt(height_) << "' viewBox='0 0 " << fmt(width_) << ' ' << fmt(height_) << "'>\n"
     << "<rect width='100%' height='100%' fill='white'/>\n"
     << body_.str() << "</svg>\n";
  return os.str();
}

void Document::write(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << str();
}

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& xs,
                     const std::vector<std::vector<double>>& ys, bool log_y) {
  const double W = 640, H = 420, ml = 60, mr = 20, mt = 30, mb = 40;
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (size_t i = 0; i < ys.size(); ++i) {
    for (size_t j = 0; j < ys[i].size(); ++j) {
      const double y = log_y ? std::log10(std::max(ys[i][j], 1e-12)) : ys[i][j];
      x_min = std::min(x_min, xs[i][j]);
      x_max = std::max(x_max, xs[i][j]);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_max <= x_min) x_max = x_min + 1;
  if (y_max <= y_min) y_max = y_min + 1;
  auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (W - ml - mr); };
  auto py = [&](double y) {
    const double v = log_y ? std::log10(std::max(y, 1e-12)) : y;
    return H - mb - (v - y_min) / (y_max - y_min) * (H - mt - mb);
  };

  Document doc(W, H);
  doc.line(ml, H - mb, W - mr, H - mb, "#000");
  doc.line(ml, mt, ml, H - mb, "#000");
  doc.text(W / 2, mt - 10, title, 13, "middle");
  for (int i = 0; i <= 4; ++i) {
    const double fy = y_min + (y_max - y_min) * i / 4.0;
    const double yy = H - mb - (fy - y_min) / (y_max - y_min) * (H - mt - mb);
    std::ostringstream lbl;
    lbl << std::setprecision(3) << (log_y ? std::pow(10.0, fy) : fy);
    doc.text(ml - 6, yy + 3, lbl.str(), 9, "end");
    doc.line(ml, yy, W - mr, yy, "#ddd", 0.5);
    const double fx = x_min + (x_max - x_min) * i / 4.0;
    std::ostringstream xl;
    xl << std::setprecision(3) << fx;
    doc.text(px(fx), H - mb + 14, xl.str(), 9, "middle");
  }
  for (size_t i = 0; i < ys.size(); ++i) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(ys[i].size());
    for (size_t j = 0; j < ys[i].size(); ++j) pts.emplace_back(px(xs[i][j]), py(ys[i][j]));
    const std::string color = kPalette[i % 6];
    doc.polyline(pts, color);
    doc.text(W - mr - 140, mt + 14 * (i + 1), names[i], 10);
    doc.line(W - mr - 160, mt + 14 * (i + 1) - 4, W - mr - 145, mt + 14 * (i + 1) - 4, color, 2);
  }
  doc.write(path);
}

void write_bar_chart(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& series,
                     const std::vector<std::string>& groups,
                     const std::vector<std::vector<double>>& values) {
  const double W = 640, H = 420, ml = 60, mr = 20, mt = 30, mb = 50;
  double v_max = 0;
  for (const auto& row : values)
    for (double v : row)
      if (std::isfinite(v)) v_max = std::max(v_max, v);
  if (v_max <= 0) v_max = 1;

  Document doc(W, H);
  doc.line(ml, H - mb, W - mr, H - mb, "#000");
  doc.line(ml, mt, ml, H - mb, "#000");
  doc.text(W / 2, mt - 10, title, 13, "middle");
  const size_t ng = groups.size(), ns = series.size();
  const double group_w = (W - ml - mr) / static_cast<double>(ng);
  const double bar_w = group_w * 0.8 / static_cast<double>(ns);
  for (size_t g = 0; g < ng; ++g) {
    for (size_t s = 0; s < ns; ++s) {
      const double v = values[s][g];
      if (!std::isfinite(v)) continue;
      const double h = v / v_max * (H - mt - mb);
      const double x = ml + group_w * g + group_w * 0.1 + bar_w * s;
      doc.rect(x, H - mb - h, bar_w, h, kPalette[s % 6], 0.9);
    }
    doc.text(ml + group_w * (g + 0.5), H - mb + 16, groups[g], 10, "middle");
  }
  for (int i = 0; i <= 4; ++i) {
    const double fy = v_max * i / 4.0;
    const double yy = H - mb - fy / v_max * (H - mt - mb);
    std::ostringstream lbl;
    lbl << std::setprecision(3) << fy;
    doc.text(ml - 6, yy + 3, lbl.str(), 9, "end");
  }
  for (size_t s = 0; s < ns; ++s) {
    doc.rect(W - mr - 160, mt + 14 * s, 10, 10, kPalette[s % 6], 0.9);
    doc.text(W - mr - 145, mt + 14 * s + 9, series[s], 10);
  }
  doc.write(path);
}

}  // namespace mpr::svg
