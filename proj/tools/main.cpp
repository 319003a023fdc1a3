// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 styledraw authors

#include "styledraw/cli.hpp"

int main(int argc, char** argv) { return styledraw::cli_main(argc, argv); }
