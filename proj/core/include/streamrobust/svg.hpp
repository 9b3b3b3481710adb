#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace streamrobust {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static log-log line chart. Nonpositive points are skipped.
void write_loglog_svg(std::ostream& out, const std::string& title,
                      std::span<const SvgSeries> series, const std::string& x_label,
                      const std::string& y_label);

}  // namespace streamrobust
