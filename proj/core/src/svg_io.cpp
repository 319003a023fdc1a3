// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "styledraw/io.hpp"

namespace styledraw {
namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int channel_byte(double c) {
  const long b = std::lround(std::fmin(std::fmax(c, 0.0), 1.0) * 255.0);
  return static_cast<int>(b);
}

std::string hex_color(const std::array<double, 3>& rgb) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", channel_byte(rgb[0]),
                channel_byte(rgb[1]), channel_byte(rgb[2]));
  return buf;
}

// Value of attribute `name` within the tag text, or empty when absent.
std::string attr_value(const std::string& tag, const std::string& name) {
  const std::string needle = name + "=\"";
  const auto pos = tag.find(needle);
  if (pos == std::string::npos) return {};
  const auto start = pos + needle.size();
  const auto end = tag.find('"', start);
  if (end == std::string::npos) return {};
  return tag.substr(start, end - start);
}

double parse_number(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v))
      throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("svg import: bad ") + what + " '" +
                             s + "'");
  }
}

std::array<double, 3> parse_hex_color(const std::string& s) {
  if (s.size() != 7 || s[0] != '#')
    throw std::runtime_error("svg import: bad color '" + s + "'");
  const auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::runtime_error("svg import: bad color '" + s + "'");
  };
  std::array<double, 3> rgb{};
  for (int i = 0; i < 3; ++i)
    rgb[static_cast<std::size_t>(i)] =
        (nibble(s[static_cast<std::size_t>(1 + 2 * i)]) * 16 +
         nibble(s[static_cast<std::size_t>(2 + 2 * i)])) /
        255.0;
  return rgb;
}

}  // namespace

std::string svg_string(const Drawing& d) {
  validate_drawing(d);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << d.canvas_width
      << "\" height=\"" << d.canvas_height << "\">\n";
  out << "<rect width=\"" << d.canvas_width << "\" height=\""
      << d.canvas_height << "\" fill=\"" << hex_color(d.background_color)
      << "\"/>\n";
  for (const auto& s : d.strokes) {
    const auto px = [&](const Vec2& p) {
      return fixed4(p.x * d.canvas_width) + " " + fixed4(p.y * d.canvas_height);
    };
    out << "<path d=\"M " << px(s.control_points[0]);
    for (int seg = 0; seg < s.segment_count(); ++seg) {
      const std::size_t base = static_cast<std::size_t>(3 * seg);
      out << " C " << px(s.control_points[base + 1]) << ", "
          << px(s.control_points[base + 2]) << ", "
          << px(s.control_points[base + 3]);
    }
    out << "\" fill=\"none\" stroke=\"" << hex_color(s.color)
        << "\" stroke-opacity=\"" << fixed4(s.opacity) << "\" stroke-width=\""
        << fixed4(s.width) << "\" stroke-linecap=\"round\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void export_svg(const Drawing& d, const std::string& path) {
  const std::string text = svg_string(d);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("svg export: cannot open " + path);
  f << text;
  if (!f) throw std::runtime_error("svg export: write failed for " + path);
}

Drawing parse_svg(const std::string& text) {
  Drawing d;
  d.strokes.clear();

  const auto tag_at = [&](std::size_t pos) {
    const auto end = text.find('>', pos);
    if (end == std::string::npos)
      throw std::runtime_error("svg import: unterminated tag");
    return text.substr(pos, end - pos + 1);
  };

  const auto svg_pos = text.find("<svg");
  if (svg_pos == std::string::npos)
    throw std::runtime_error("svg import: no <svg> element");
  const std::string svg_tag = tag_at(svg_pos);
  d.canvas_width =
      static_cast<int>(parse_number(attr_value(svg_tag, "width"), "width"));
  d.canvas_height =
      static_cast<int>(parse_number(attr_value(svg_tag, "height"), "height"));

  const auto rect_pos = text.find("<rect");
  if (rect_pos == std::string::npos)
    throw std::runtime_error("svg import: no background rect");
  d.background_color = parse_hex_color(attr_value(tag_at(rect_pos), "fill"));

  for (auto pos = text.find("<path"); pos != std::string::npos;
       pos = text.find("<path", pos + 1)) {
    const std::string tag = tag_at(pos);
    StrokePath s;
    s.color = parse_hex_color(attr_value(tag, "stroke"));
    s.opacity = parse_number(attr_value(tag, "stroke-opacity"), "opacity");
    s.width = parse_number(attr_value(tag, "stroke-width"), "width");

    std::string data = attr_value(tag, "d");
    for (auto& c : data)
      if (c == ',') c = ' ';
    std::istringstream ds(data);
    std::string cmd;
    double x = 0.0, y = 0.0;
    if (!(ds >> cmd) || cmd != "M" || !(ds >> x >> y))
      throw std::runtime_error("svg import: path must start with M x y");
    s.control_points.emplace_back(x / d.canvas_width, y / d.canvas_height);
    while (ds >> cmd) {
      if (cmd != "C")
        throw std::runtime_error("svg import: unsupported path command '" +
                                 cmd + "'");
      for (int i = 0; i < 3; ++i) {
        if (!(ds >> x >> y))
          throw std::runtime_error("svg import: C needs three points");
        s.control_points.emplace_back(x / d.canvas_width,
                                      y / d.canvas_height);
      }
    }
    d.strokes.push_back(std::move(s));
  }

  try {
    validate_drawing(d);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("svg import: ") + e.what());
  }
  return d;
}

Drawing import_svg(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("svg import: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_svg(buf.str());
}

}  // namespace styledraw
