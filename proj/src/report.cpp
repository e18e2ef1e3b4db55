#include "icnr/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "icnr/error.hpp"

namespace icnr {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr int kPanelW = 260, kPanelH = 200, kMargin = 46;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

std::pair<double, double> padded_range(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.05;
    return {lo - pad, hi + pad};
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

const char* axis_title(const std::string& panel) {
  if (panel == "psnr") return "PSNR (dB)";
  if (panel == "ssim") return "SSIM";
  if (panel == "fla") return "FLA residual";
  if (panel == "fca") return "FCA residual";
  return "CT accuracy";
}

}  // namespace

double panel_value(const EvalReport& r, const std::string& panel) {
  if (panel == "psnr") return r.psnr;
  if (panel == "ssim") return r.ssim ? *r.ssim : kNan;
  if (panel == "fla") return r.fla_residual ? r.fla_residual->mean : kNan;
  if (panel == "fca") return r.fca_residual ? r.fca_residual->mean : kNan;
  if (panel == "ct") return r.ct ? r.ct->accuracy : kNan;
  throw Error(ErrorKind::Config, "unknown panel '" + panel + "'");
}

std::string render_rd_svg(std::vector<RdPoint> points) {
  std::erase_if(points, [](const RdPoint& p) { return !p.report.ratio; });
  std::stable_sort(points.begin(), points.end(),
                   [](const RdPoint& a, const RdPoint& b) { return *a.report.ratio < *b.report.ratio; });

  const int n_panels = int(kRdPanels.size());
  const int width = n_panels * (kPanelW + kMargin) + kMargin;
  const int height = kPanelH + 2 * kMargin + 20;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  double rlo = std::numeric_limits<double>::infinity(), rhi = -rlo;
  for (const auto& p : points) {
    rlo = std::min(rlo, *p.report.ratio);
    rhi = std::max(rhi, *p.report.ratio);
  }
  if (points.empty()) rlo = 0, rhi = 1;
  const auto [xlo, xhi] = padded_range(rlo, rhi);

  for (int k = 0; k < n_panels; ++k) {
    const std::string& panel = kRdPanels[std::size_t(k)];
    const int ox = kMargin + k * (kPanelW + kMargin);
    const int oy = kMargin;
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : points) {
      const double v = panel_value(p.report, panel);
      if (std::isfinite(v)) xy.emplace_back(*p.report.ratio, v);
    }
    double vlo = 0, vhi = 1;
    if (!xy.empty()) {
      vlo = vhi = xy.front().second;
      for (auto& [x, v] : xy) vlo = std::min(vlo, v), vhi = std::max(vhi, v);
    }
    const auto [ylo, yhi] = padded_range(vlo, vhi);
    auto px = [&](double x) { return ox + (x - xlo) / (xhi - xlo) * kPanelW; };
    auto py = [&](double y) { return oy + kPanelH - (y - ylo) / (yhi - ylo) * kPanelH; };

    svg << "<g class=\"panel\" id=\"" << panel << "\">\n";
    svg << "<rect x=\"" << ox << "\" y=\"" << oy << "\" width=\"" << kPanelW << "\" height=\"" << kPanelH
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    svg << "<text x=\"" << ox + kPanelW / 2 << "\" y=\"" << oy - 8 << "\" text-anchor=\"middle\">"
        << axis_title(panel) << "</text>\n";
    svg << "<text x=\"" << ox + kPanelW / 2 << "\" y=\"" << oy + kPanelH + 30
        << "\" text-anchor=\"middle\">compression ratio</text>\n";
    svg << "<text x=\"" << ox << "\" y=\"" << oy + kPanelH + 14 << "\">" << num(xlo) << "</text>\n";
    svg << "<text x=\"" << ox + kPanelW << "\" y=\"" << oy + kPanelH + 14 << "\" text-anchor=\"end\">" << num(xhi)
        << "</text>\n";
    svg << "<text x=\"" << ox - 4 << "\" y=\"" << oy + 10 << "\" text-anchor=\"end\">" << num(yhi) << "</text>\n";
    svg << "<text x=\"" << ox - 4 << "\" y=\"" << oy + kPanelH << "\" text-anchor=\"end\">" << num(ylo) << "</text>\n";
    if (xy.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
      for (auto& [x, v] : xy) svg << num(px(x)) << "," << num(py(v)) << " ";
      svg << "\"/>\n";
    }
    for (auto& [x, v] : xy)
      svg << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(v)) << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    if (xy.empty())
      svg << "<text x=\"" << ox + kPanelW / 2 << "\" y=\"" << oy + kPanelH / 2
          << "\" text-anchor=\"middle\" fill=\"#999\">no data</text>\n";
    svg << "</g>\n";
  }
  int lx = kMargin;
  for (const auto& p : points) {
    svg << "<text x=\"" << lx << "\" y=\"" << height - 6 << "\" fill=\"#666\">" << esc(p.label) << " ("
        << num(*p.report.ratio) << "x)</text>\n";
    lx += 160;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::filesystem::path write_rd_plots(const std::vector<RdPoint>& points, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  const auto svg_path = out_dir / "rate_distortion.svg";
  {
    std::ofstream out(svg_path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + svg_path.string());
    out << render_rd_svg(points);
  }
  std::ofstream csv(out_dir / "rate_distortion.csv", std::ios::binary);
  if (!csv) throw Error(ErrorKind::Io, "cannot write rate_distortion.csv");
  csv << "label,ratio";
  for (const auto& p : kRdPanels) csv << "," << p;
  csv << "\n";
  for (const auto& p : points) {
    csv << p.label << "," << (p.report.ratio ? num(*p.report.ratio) : "");
    for (const auto& panel : kRdPanels) {
      const double v = panel_value(p.report, panel);
      csv << "," << (std::isfinite(v) ? num(v) : "");
    }
    csv << "\n";
  }
  return svg_path;
}

}  // namespace icnr
