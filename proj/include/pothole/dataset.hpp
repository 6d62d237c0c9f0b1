#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pothole/box.hpp"

namespace pothole {

struct ImageRecord {
    std::string image_id;
    double width = 0.0;   // pixels; file loader requires positive integers
    double height = 0.0;
    std::string source_tag;

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Annotation {
    std::string image_id;
    BoundingBox box;

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Detection {
    std::string image_id;
    BoundingBox box;
    double score = 0.0;  // in [0, 1]

    friend bool operator==(const Detection&, const Detection&) = default;
};

// Immutable-after-load collection of images and their ground-truth boxes.
// Annotations are kept in insertion order; every annotation references a
// known image and lies within its bounds.
class Dataset {
public:
    Dataset() = default;

    // Throws std::invalid_argument on duplicate image ids or non-positive
    // dimensions.
    void add_image(ImageRecord image);
    // Throws std::invalid_argument when the image is unknown or the box falls
    // outside [0, width] x [0, height].
    void add_annotation(Annotation annotation);

    const std::vector<ImageRecord>& images() const noexcept { return images_; }
    const std::vector<Annotation>& annotations() const noexcept { return annotations_; }

    const ImageRecord* find_image(std::string_view image_id) const noexcept;
    bool has_image(std::string_view image_id) const noexcept { return find_image(image_id) != nullptr; }

    std::string split_tag;

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.images_ == b.images_ && a.annotations_ == b.annotations_ &&
               a.split_tag == b.split_tag;
    }

private:
    std::vector<ImageRecord> images_;
    std::vector<Annotation> annotations_;
    std::unordered_map<std::string, std::size_t> index_;
};

// One malformed or invalid input record. Lines are 1-based; image_id is empty
// when the failure happened before the id could be read.
struct LoadIssue {
    int line = 0;
    std::string image_id;
    std::string message;

    friend bool operator==(const LoadIssue&, const LoadIssue&) = default;
};

struct AnnotationLoadResult {
    Dataset dataset;
    std::vector<LoadIssue> errors;
};

struct DetectionLoadResult {
    std::vector<Detection> detections;
    std::vector<LoadIssue> errors;
    std::vector<LoadIssue> warnings;  // e.g. boxes clamped to image bounds
};

// Annotation files are JSON Lines, one image per line:
//   {"image_id": "a", "width": 1024, "height": 800, "source": "cam0",
//    "boxes": [{"x_min": 1, "y_min": 2, "x_max": 3, "y_max": 4}, ...]}
// Unknown keys are ignored. Records violating an invariant are dropped and
// reported with their line number. Throws std::runtime_error when the file
// cannot be opened.
AnnotationLoadResult load_annotations(const std::filesystem::path& path);

// Detection files are JSON Lines, one detection per line:
//   {"image_id": "a", "x_min": 1, "y_min": 2, "x_max": 3, "y_max": 4,
//    "score": 0.9}
// Boxes slightly outside the image are clamped to its bounds with a warning;
// detections for unknown images or with scores outside [0, 1] are errors.
DetectionLoadResult load_detections(const std::filesystem::path& path, const Dataset& dataset);

void save_annotations(const Dataset& dataset, const std::filesystem::path& path);
void save_detections(std::span<const Detection> detections, const std::filesystem::path& path);

enum class ConversionMode { kInclusiveToHalfOpen, kHalfOpenToInclusive };

// Raw box as stored in a file, prior to validation. Inclusive-convention
// boxes may be degenerate (x_max == x_min), which BoundingBox cannot hold.
struct RawBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    friend bool operator==(const RawBox&, const RawBox&) = default;
};

// Adjusts the max edges by +1 (inclusive -> half-open) or -1 (half-open ->
// inclusive). Coordinates must be integral; throws std::invalid_argument
// otherwise or when the source box is invalid under its convention.
RawBox convert_box(const RawBox& box, ConversionMode mode);

// File-level conversion between the two pixel conventions. Box coordinates
// are rewritten, all other keys pass through. Returns per-line issues for
// records that could not be converted; those lines are dropped.
std::vector<LoadIssue> convert_annotation_file(const std::filesystem::path& in,
                                               const std::filesystem::path& out,
                                               ConversionMode mode);
std::vector<LoadIssue> convert_detection_file(const std::filesystem::path& in,
                                              const std::filesystem::path& out,
                                              ConversionMode mode);

}  // namespace pothole
