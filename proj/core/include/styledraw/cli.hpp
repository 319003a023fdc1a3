// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace styledraw {

// Full command-line front end. Returns 0 on success, 1 on usage errors
// (unknown flags, missing required inputs), 2 on runtime failures. Writes
// final.svg, final.png, losses.csv, checkpoint.json, and
// snapshots/iter_%04d.png under --out.
int cli_main(int argc, const char* const* argv);

}  // namespace styledraw
