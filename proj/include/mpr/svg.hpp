#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace mpr::svg {

/// Minimal deterministic SVG writer; enough for traces, curves and bar
/// charts without an external plotting dependency.
class Document {
 public:
  Document(double width, double height);

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double stroke_width = 1.0, const std::string& dash = "");
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double stroke_width = 1.5);
  void rect(double x, double y, double w, double h, const std::string& fill,
            double opacity = 1.0, const std::string& stroke = "none");
  void circle(double cx, double cy, double r, const std::string& fill);
  void text(double x, double y, const std::string& s, double size = 10.0,
            const std::string& anchor = "start");

  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  double width_, height_;
  std::ostringstream body_;
};

/// Simple line plot of one or more named series over a shared x axis.
void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& xs,
                     const std::vector<std::vector<double>>& ys, bool log_y = false);

/// Grouped bar chart; values[i][j] is the bar for series i in group j.
void write_bar_chart(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& series,
                     const std::vector<std::string>& groups,
                     const std::vector<std::vector<double>>& values);

}  // namespace mpr::svg
