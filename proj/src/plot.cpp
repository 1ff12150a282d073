/*
 * Copyright 2026 The pulseflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "pulseflow/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace pulseflow::plot {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error("invalid pattern spec: bad number '" + s + "'");
  return v;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

sim::PriPattern parse_pattern(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.size() < 2 || parts.size() > 4) throw Error("invalid pattern spec '" + spec + "'");
  sim::PriPattern p;
  try {
    p.type = sim::pri_type_from_string(parts[0]);
  } catch (const Error&) {
    throw Error("invalid pattern spec: unknown PRI type '" + parts[0] + "'");
  }
  for (const auto& x : split(parts[1], '/')) p.base_pris.push_back(to_double(x));
  if (parts.size() > 2) p.deviation_frac = to_double(parts[2]);
  if (parts.size() > 3) {
    for (const auto& x : split(parts[3], '/')) p.dwells.push_back(static_cast<int>(to_double(x)));
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(std::string("invalid pattern spec: ") + e.what());
  }
  return p;
}

std::vector<Panel> pri_type_panels() {
  return {{"a_constant", parse_pattern("constant:500:0")},
          {"b_jitter", parse_pattern("jitter:500:0.1")},
          {"c_constant_stagger", parse_pattern("constant_stagger:500/400/600:0")},
          {"d_random_stagger", parse_pattern("random_stagger:400/500/600:0")},
          {"e_switch_dwell", parse_pattern("switch_dwell:600/400/500:0:5/7/3")}};
}

std::string pri_csv(std::span<const double> pris) {
  std::string out = "index,pri_us\n";
  for (std::size_t i = 0; i < pris.size(); ++i) out += std::to_string(i) + "," + fmt(pris[i]) + "\n";
  return out;
}

std::string pri_svg(std::span<const double> pris, const std::string& title) {
  constexpr double w = 640, h = 360, left = 60, right = 20, top = 40, bottom = 40;
  double lo = 0.0, hi = 1.0;
  if (!pris.empty()) {
    lo = *std::min_element(pris.begin(), pris.end());
    hi = *std::max_element(pris.begin(), pris.end());
  }
  const double pad = std::max(1.0, 0.1 * (hi - lo));
  lo = std::max(0.0, lo - pad);
  hi += pad;
  const double n = std::max<double>(1.0, static_cast<double>(pris.size()) - 1.0);
  auto px = [&](double i) { return left + (w - left - right) * i / n; };
  auto py = [&](double v) { return h - bottom - (h - top - bottom) * (v - lo) / (hi - lo); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << title << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    s << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"10\">" << fmt(v) << "</text>\n";
  }
  s << "<text x=\"" << w / 2 << "\" y=\"" << h - 8 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"11\">pulse index</text>\n";
  s << "<text x=\"14\" y=\"" << h / 2 << "\" transform=\"rotate(-90 14 " << h / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">PRI (us)</text>\n";
  for (std::size_t i = 0; i < pris.size(); ++i) {
    s << "<circle cx=\"" << fmt(px(static_cast<double>(i))) << "\" cy=\"" << fmt(py(pris[i]))
      << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string histogram_csv(const classical::DiffHistogram& h) {
  std::string out = "bin_low_us,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    if (h.counts[k] > 0) out += fmt(h.binning.lower(k)) + "," + fmt(h.counts[k]) + "\n";
  }
  return out;
}

}  // namespace pulseflow::plot
