#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "icnr/eval.hpp"

namespace icnr {

struct RdPoint {
  std::string label;
  EvalReport report;
};

// Panels in this order, each against compression ratio.
inline const std::vector<std::string> kRdPanels{"psnr", "ssim", "fla", "fca", "ct"};

// Value plotted in a panel, NaN when the report lacks it. fla/fca use the residual mean, ct the accuracy.
double panel_value(const EvalReport& r, const std::string& panel);

// Points without a ratio are dropped; the rest are sorted by ratio.
std::string render_rd_svg(std::vector<RdPoint> points);

// Writes rate_distortion.svg and rate_distortion.csv into out_dir; returns the svg path.
std::filesystem::path write_rd_plots(const std::vector<RdPoint>& points, const std::filesystem::path& out_dir);

}  // namespace icnr
