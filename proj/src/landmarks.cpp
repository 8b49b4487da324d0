// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include "geomark/landmarks.hpp"

#include <cmath>
#include <json.hpp>

#include "geomark/errors.hpp"
#include "geomark/util.hpp"

namespace geomark {

using nlohmann::ordered_json;

std::optional<LandmarkId> landmark_from_name(std::string_view name) {
    for (int i = 0; i < kNumLandmarks; ++i) {
        if (kLandmarkNames[static_cast<size_t>(i)] == name) {
            return static_cast<LandmarkId>(i);
        }
    }
    return std::nullopt;
}

std::string_view to_string(LossMode mode) {
    switch (mode) {
        case LossMode::Raw: return "raw";
        case LossMode::Absolute: return "absolute";
        case LossMode::Squared: return "squared";
    }
    return "raw";
}

std::optional<LossMode> loss_mode_from_name(std::string_view name) {
    if (name == "raw") return LossMode::Raw;
    if (name == "absolute") return LossMode::Absolute;
    if (name == "squared") return LossMode::Squared;
    return std::nullopt;
}

LineGroupSchema line_groups_default() {
    LineGroupSchema schema;
    schema.axis = {LandmarkId::CP, LandmarkId::AP};
    schema.level_lines[0] = {LandmarkId::AB_AP, LandmarkId::AP, LandmarkId::PB_AP};
    schema.level_lines[1] = {LandmarkId::AB_13, LandmarkId::AR_13, LandmarkId::PR_13,
                             LandmarkId::PB_13};
    schema.level_lines[2] = {LandmarkId::AB_12, LandmarkId::AR_12, LandmarkId::PR_12,
                             LandmarkId::PB_12};
    schema.loss_mode = LossMode::Raw;
    return schema;
}

ValidationVerdict validate_landmark_set(const LandmarkSet& set, int width, int height) {
    ValidationVerdict verdict;
    for (int i = 0; i < kNumLandmarks; ++i) {
        const auto id = static_cast<LandmarkId>(i);
        const Point2 p = set.coords[static_cast<size_t>(i)];
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            verdict.failures.push_back({id, "non-finite coordinate"});
            continue;
        }
        if (p.x < 0.0 || p.x >= static_cast<double>(width) || p.y < 0.0 ||
            p.y >= static_cast<double>(height)) {
            verdict.failures.push_back(
                {id, "out of bounds: (" + format_double(p.x) + ", " + format_double(p.y) + ")"});
        }
    }
    return verdict;
}

namespace {

std::string record_locus(size_t index, const ordered_json& rec) {
    std::string locus = "record " + std::to_string(index);
    if (rec.is_object() && rec.contains("image_id") && rec["image_id"].is_string()) {
        locus += " (image_id '" + rec["image_id"].get<std::string>() + "')";
    }
    return locus;
}

AnnotationRecord parse_record(const ordered_json& rec, size_t index, const ParseOptions& options) {
    const std::string locus = record_locus(index, rec);
    if (!rec.is_object()) {
        throw ParseError(locus + ": expected an object");
    }

    static constexpr std::array<std::string_view, 5> kKeys = {"image_id", "width", "height",
                                                              "spacing_mm_per_px", "landmarks"};
    for (const auto& key : kKeys) {
        if (!rec.contains(key)) {
            throw SchemaError(locus + ": missing field '" + std::string(key) + "'");
        }
    }
    if (options.strict) {
        for (const auto& [key, value] : rec.items()) {
            (void)value;
            bool known = false;
            for (const auto& k : kKeys) known = known || key == k;
            if (!known) {
                throw SchemaError(locus + ": unknown field '" + key + "'");
            }
        }
    }

    AnnotationRecord out;
    if (!rec["image_id"].is_string()) {
        throw SchemaError(locus + ": image_id must be a string");
    }
    out.image_id = rec["image_id"].get<std::string>();
    if (!rec["width"].is_number_integer() || !rec["height"].is_number_integer()) {
        throw SchemaError(locus + ": width/height must be integers");
    }
    out.width = rec["width"].get<int>();
    out.height = rec["height"].get<int>();
    if (out.width <= 0 || out.height <= 0) {
        throw ValidationError(locus + ": width and height must be positive");
    }
    if (!rec["spacing_mm_per_px"].is_number()) {
        throw SchemaError(locus + ": spacing_mm_per_px must be a number");
    }
    out.spacing_mm_per_px = rec["spacing_mm_per_px"].get<double>();
    if (!(out.spacing_mm_per_px > 0.0) || !std::isfinite(out.spacing_mm_per_px)) {
        throw ValidationError(locus + ": spacing_mm_per_px must be positive");
    }

    const auto& lm = rec["landmarks"];
    if (!lm.is_object()) {
        throw SchemaError(locus + ": landmarks must be an object");
    }
    std::array<bool, kNumLandmarks> seen{};
    for (const auto& [key, value] : lm.items()) {
        const auto id = landmark_from_name(key);
        if (!id) {
            if (options.strict) {
                throw SchemaError(locus + ": unknown landmark '" + key + "'");
            }
            continue;
        }
        if (!value.is_array() || value.size() != 2 || !value[0].is_number() ||
            !value[1].is_number()) {
            throw SchemaError(locus + ": landmark '" + key + "' must be [x, y]");
        }
        out.landmarks[*id] = {value[0].get<double>(), value[1].get<double>()};
        seen[static_cast<size_t>(*id)] = true;
    }
    for (int i = 0; i < kNumLandmarks; ++i) {
        if (!seen[static_cast<size_t>(i)]) {
            throw SchemaError(locus + ": missing landmark '" +
                              std::string(name_of(static_cast<LandmarkId>(i))) + "'");
        }
    }

    for (int i = 0; i < kNumLandmarks; ++i) {
        const Point2 p = out.landmarks.coords[static_cast<size_t>(i)];
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw ValidationError(locus + ": landmark '" +
                                  std::string(name_of(static_cast<LandmarkId>(i))) +
                                  "' has a non-finite coordinate");
        }
    }
    if (options.enforce_bounds) {
        const auto verdict = validate_landmark_set(out.landmarks, out.width, out.height);
        if (!verdict.ok()) {
            throw ValidationError(locus + ": landmark '" +
                                  std::string(name_of(verdict.failures.front().id)) +
                                  "' " + verdict.failures.front().reason);
        }
    }
    return out;
}

}  // namespace

std::vector<AnnotationRecord> parse_dataset(std::string_view content,
                                            const ParseOptions& options) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }

    const ordered_json* records = nullptr;
    if (doc.is_array()) {
        records = &doc;
    } else if (doc.is_object() && doc.contains("records") && doc["records"].is_array()) {
        // Generator output wraps the array and adds "_meta"; both are
        // accepted, "_meta" is ignored even in strict mode.
        records = &doc["records"];
        if (options.strict) {
            for (const auto& [key, value] : doc.items()) {
                (void)value;
                if (key != "records" && key != "_meta") {
                    throw SchemaError("unknown top-level field '" + key + "'");
                }
            }
        }
    } else {
        throw ParseError("top level must be an array of records or {\"records\": [...]}");
    }

    std::vector<AnnotationRecord> out;
    out.reserve(records->size());
    for (size_t i = 0; i < records->size(); ++i) {
        out.push_back(parse_record((*records)[i], i, options));
    }
    return out;
}

namespace {

ordered_json record_to_json(const AnnotationRecord& rec) {
    ordered_json j;
    j["image_id"] = rec.image_id;
    j["width"] = rec.width;
    j["height"] = rec.height;
    j["spacing_mm_per_px"] = rec.spacing_mm_per_px;
    ordered_json lm = ordered_json::object();
    for (int i = 0; i < kNumLandmarks; ++i) {
        const Point2 p = rec.landmarks.coords[static_cast<size_t>(i)];
        lm[std::string(kLandmarkNames[static_cast<size_t>(i)])] = ordered_json::array({p.x, p.y});
    }
    j["landmarks"] = std::move(lm);
    return j;
}

}  // namespace

std::string write_dataset(std::span<const AnnotationRecord> records) {
    ordered_json arr = ordered_json::array();
    for (const auto& rec : records) {
        arr.push_back(record_to_json(rec));
    }
    return arr.dump(2) + "\n";
}

std::vector<AnnotationRecord> load_dataset(const std::filesystem::path& path,
                                           const ParseOptions& options) {
    try {
        return parse_dataset(read_text_file(path), options);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void save_dataset(const std::filesystem::path& path, std::span<const AnnotationRecord> records) {
    write_text_file(path, write_dataset(records));
}

}  // namespace geomark
