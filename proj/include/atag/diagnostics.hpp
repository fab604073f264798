#pragma once

#include <string>
#include <vector>

namespace atag {

/// Per-thread log of non-fatal conditions (degenerate loss weights, fully
/// masked softmax rows, missing videos). Callers drain it with
/// take_warnings() after an operation of interest.
void record_warning(std::string message);
std::vector<std::string> take_warnings();
std::size_t warning_count();

}  // namespace atag
