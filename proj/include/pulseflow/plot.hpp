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
#pragma once

#include <span>
#include <string>
#include <vector>

#include "pulseflow/classical.hpp"
#include "pulseflow/simulator.hpp"

namespace pulseflow::plot {

/// Parses "type:pri[/pri...][:deviation[:dwell/dwell...]]", e.g.
/// "jitter:500:0.1" or "switch_dwell:600/400/500:0:5/7/3".
sim::PriPattern parse_pattern(const std::string& spec);

struct Panel {
  std::string name;
  sim::PriPattern pattern;
};

/// The five PRI types of the simulator, with the parameters used to illustrate them.
std::vector<Panel> pri_type_panels();

/// "index,pri_us" rows.
std::string pri_csv(std::span<const double> pris);

/// Scatter of PRI against pulse index.
std::string pri_svg(std::span<const double> pris, const std::string& title);

/// "bin_low_us,count" rows, non-empty bins only.
std::string histogram_csv(const classical::DiffHistogram& h);

}  // namespace pulseflow::plot
