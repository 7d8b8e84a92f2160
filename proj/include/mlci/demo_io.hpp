#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mlci/inference.hpp"

namespace mlci {

// Demonstration CSV, one row per time sample:
//
//   # <free-form header comment lines>
//   # goal demo=<id> target=<v0;v1;...> free=<0|1;...>     (optional, one per demo)
//   demo_id,t,<state labels...>,<control labels...>
//
// t is seconds from the demo start. The final sample of each demo leaves the
// control cells empty. Without a goal line the last sample becomes the goal.
void write_demos_csv(std::ostream& out, const SystemSpec& system, const std::vector<Demonstration>& demos,
                     const std::string& header_comment);

std::vector<Demonstration> read_demos_csv(std::istream& in, const SystemSpec& system);

// "t=s theta=rad ..." for the system's columns.
std::string units_fragment(const SystemSpec& system);

}  // namespace mlci
