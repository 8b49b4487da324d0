// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "geomark/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return geomark::cli::run(args, std::cout, std::cerr);
}
