// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace geomark {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

}  // namespace geomark
