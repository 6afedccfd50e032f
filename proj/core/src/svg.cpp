#include "stylelens/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace stylelens {

SvgDocument::SvgDocument(double width, double height) : width_(width), height_(height) {}

void SvgDocument::rect(double x, double y, double w, double h, std::string_view fill,
                       std::string_view stroke) {
  body_ += fmt::format(
      "  <rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" "
      "stroke=\"{}\"/>\n",
      x, y, std::max(w, 0.0), std::max(h, 0.0), fill, stroke);
}

void SvgDocument::line(double x1, double y1, double x2, double y2, std::string_view stroke,
                       double stroke_width) {
  body_ += fmt::format(
      "  <line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" "
      "stroke-width=\"{:.2f}\"/>\n",
      x1, y1, x2, y2, stroke, stroke_width);
}

void SvgDocument::text(double x, double y, std::string_view content, double size,
                       std::string_view anchor) {
  body_ += fmt::format(
      "  <text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"{:.1f}\" font-family=\"sans-serif\" "
      "text-anchor=\"{}\">{}</text>\n",
      x, y, size, anchor, xml_escape(content));
}

std::string SvgDocument::str() const {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\">\n  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "{}</svg>\n",
      width_, height_, width_, height_, body_);
}

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
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

std::string heat_color(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const auto channel = [t](double lo) { return static_cast<int>(std::lround(255.0 + (lo - 255.0) * t)); };
  return fmt::format("#{:02x}{:02x}{:02x}", channel(33.0), channel(102.0), channel(172.0));
}

}  // namespace stylelens
