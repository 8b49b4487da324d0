// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0
//
// The 16-landmark vocabulary for one anterior-tooth slice, the line-group
// structure used by the geometric loss, and the JSON annotation format.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geomark {

// Channel order is fixed: heatmap channel k always holds landmark k.
enum class LandmarkId : int {
    CP = 0,   // crown point
    AP,       // apical (root tip) point
    CEJ_A,    // labial cementoenamel junction
    CEJ_P,    // lingual cementoenamel junction
    A_crest,  // labial alveolar crest
    P_crest,  // lingual alveolar crest
    AB_AP,    // labial bone at root apex level
    PB_AP,    // lingual bone at root apex level
    AB_13,    // labial bone at apical-third level
    AR_13,    // labial root at apical-third level
    PR_13,    // lingual root at apical-third level
    PB_13,    // lingual bone at apical-third level
    AB_12,    // labial bone at mid-root level
    AR_12,    // labial root at mid-root level
    PR_12,    // lingual root at mid-root level
    PB_12,    // lingual bone at mid-root level
};

inline constexpr int kNumLandmarks = 16;

inline constexpr std::array<std::string_view, kNumLandmarks> kLandmarkNames = {
    "CP",    "AP",    "CEJ_A", "CEJ_P", "A_crest", "P_crest", "AB_AP", "PB_AP",
    "AB_13", "AR_13", "PR_13", "PB_13", "AB_12",   "AR_12",   "PR_12", "PB_12",
};

constexpr int index_of(LandmarkId id) { return static_cast<int>(id); }
constexpr std::string_view name_of(LandmarkId id) { return kLandmarkNames[static_cast<size_t>(id)]; }
std::optional<LandmarkId> landmark_from_name(std::string_view name);

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
    friend bool operator==(Point2 a, Point2 b) { return a.x == b.x && a.y == b.y; }
};

// Named sub-pixel 2D coordinates for all 16 points of one image.
// Convention: x = column, y = row, origin at the top-left pixel center.
struct LandmarkSet {
    std::array<Point2, kNumLandmarks> coords{};

    Point2& operator[](LandmarkId id) { return coords[static_cast<size_t>(id)]; }
    const Point2& operator[](LandmarkId id) const { return coords[static_cast<size_t>(id)]; }
    friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

// Transformation applied to the perpendicularity dot products inside the
// geometric loss. `Raw` keeps the signed dot; `Absolute` and `Squared`
// make the term nonnegative (and, for `Squared`, smooth).
enum class LossMode { Raw, Absolute, Squared };

std::string_view to_string(LossMode mode);
std::optional<LossMode> loss_mode_from_name(std::string_view name);

// Which landmarks form the tooth axis and the three level lines.
// Data-driven so alternative groupings stay testable.
struct LineGroupSchema {
    std::array<LandmarkId, 2> axis{LandmarkId::CP, LandmarkId::AP};
    std::array<std::vector<LandmarkId>, 3> level_lines;
    LossMode loss_mode = LossMode::Raw;
};

// The default grouping: axis CP-AP, root-apex level (3 members, AP
// included since the line passes through it), apical-third and mid-root
// levels (4 members each). CEJ and crest points join no group.
LineGroupSchema line_groups_default();

struct AnnotationRecord {
    std::string image_id;
    int width = 0;   // px
    int height = 0;  // px
    double spacing_mm_per_px = 0.0;  // isotropic; mandatory, never defaulted
    LandmarkSet landmarks;
};

struct ValidationFailure {
    LandmarkId id;
    std::string reason;
};

struct ValidationVerdict {
    std::vector<ValidationFailure> failures;
    bool ok() const { return failures.empty(); }
};

// Lists every non-finite or out-of-bounds ([0,W) x [0,H)) coordinate.
ValidationVerdict validate_landmark_set(const LandmarkSet& set, int width, int height);

struct ParseOptions {
    bool strict = true;          // reject unknown keys
    bool enforce_bounds = true;  // annotations yes, predictions no
};

inline constexpr ParseOptions kAnnotationParseOptions{true, true};
inline constexpr ParseOptions kPredictionParseOptions{true, false};

// Parses the documented JSON format: either a top-level array of records
// or an object {"records": [...]} whose other top-level "_meta" entry is
// ignored. Order of records is preserved.
std::vector<AnnotationRecord> parse_dataset(std::string_view content,
                                            const ParseOptions& options = {});

// Canonical array form; parse_dataset(write_dataset(r)) == r bit-exactly.
std::string write_dataset(std::span<const AnnotationRecord> records);

std::vector<AnnotationRecord> load_dataset(const std::filesystem::path& path,
                                           const ParseOptions& options = {});
void save_dataset(const std::filesystem::path& path, std::span<const AnnotationRecord> records);

}  // namespace geomark
