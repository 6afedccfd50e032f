#pragma once

#include <string>
#include <string_view>

namespace stylelens {

// Minimal SVG document builder. Coordinates are in user units with the
// origin at the top left.
class SvgDocument {
 public:
  SvgDocument(double width, double height);

  void rect(double x, double y, double w, double h, std::string_view fill,
            std::string_view stroke = "none");
  void line(double x1, double y1, double x2, double y2, std::string_view stroke,
            double stroke_width = 1.0);
  /// anchor is "start", "middle" or "end".
  void text(double x, double y, std::string_view content, double size = 10.0,
            std::string_view anchor = "start");

  std::string str() const;

 private:
  double width_;
  double height_;
  std::string body_;
};

std::string xml_escape(std::string_view text);

/// White-to-blue ramp for t in [0, 1], as "#rrggbb".
std::string heat_color(double t);

}  // namespace stylelens
