#include "pothole/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pothole {

namespace {

using nlohmann::ordered_json;

bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

std::optional<double> get_number(const ordered_json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) return std::nullopt;
    return it->get<double>();
}

// Emits width/height as integers so that saved files reload cleanly.
ordered_json image_to_json(const ImageRecord& img, const std::vector<const Annotation*>& boxes) {
    ordered_json rec;
    rec["image_id"] = img.image_id;
    rec["width"] = static_cast<std::int64_t>(img.width);
    rec["height"] = static_cast<std::int64_t>(img.height);
    rec["source"] = img.source_tag;
    ordered_json arr = ordered_json::array();
    for (const Annotation* a : boxes) {
        ordered_json b;
        b["x_min"] = a->box.x_min();
        b["y_min"] = a->box.y_min();
        b["x_max"] = a->box.x_max();
        b["y_max"] = a->box.y_max();
        arr.push_back(std::move(b));
    }
    rec["boxes"] = std::move(arr);
    return rec;
}

}  // namespace

void Dataset::add_image(ImageRecord image) {
    if (image.image_id.empty()) {
        throw std::invalid_argument("image_id must be non-empty");
    }
    if (index_.contains(image.image_id)) {
        throw std::invalid_argument("duplicate image_id: " + image.image_id);
    }
    if (!(image.width > 0.0) || !(image.height > 0.0)) {
        throw std::invalid_argument("image dimensions must be positive: " + image.image_id);
    }
    index_.emplace(image.image_id, images_.size());
    images_.push_back(std::move(image));
}

void Dataset::add_annotation(Annotation annotation) {
    const ImageRecord* img = find_image(annotation.image_id);
    if (img == nullptr) {
        throw std::invalid_argument("annotation references unknown image: " + annotation.image_id);
    }
    const BoundingBox& b = annotation.box;
    if (b.x_min() < 0.0 || b.y_min() < 0.0 || b.x_max() > img->width || b.y_max() > img->height) {
        throw std::invalid_argument("annotation box outside image bounds: " + annotation.image_id);
    }
    annotations_.push_back(std::move(annotation));
}

const ImageRecord* Dataset::find_image(std::string_view image_id) const noexcept {
    const auto it = index_.find(std::string(image_id));
    return it == index_.end() ? nullptr : &images_[it->second];
}

AnnotationLoadResult load_annotations(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    AnnotationLoadResult result;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;

        ordered_json rec = ordered_json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            result.errors.push_back({line_no, "", "malformed JSON object"});
            continue;
        }
        const auto id_it = rec.find("image_id");
        if (id_it == rec.end() || !id_it->is_string()) {
            result.errors.push_back({line_no, "", "missing or non-string image_id"});
            continue;
        }
        const std::string image_id = id_it->get<std::string>();
        const auto width = get_number(rec, "width");
        const auto height = get_number(rec, "height");
        if (!width || !height || !is_integral(*width) || !is_integral(*height) ||
            *width <= 0 || *height <= 0) {
            result.errors.push_back({line_no, image_id, "width/height must be positive integers"});
            continue;
        }
        if (result.dataset.has_image(image_id)) {
            result.errors.push_back({line_no, image_id, "duplicate image_id"});
            continue;
        }

        ImageRecord img{image_id, *width, *height, {}};
        if (const auto src = rec.find("source"); src != rec.end() && src->is_string()) {
            img.source_tag = src->get<std::string>();
        }
        result.dataset.add_image(std::move(img));

        const auto boxes = rec.find("boxes");
        if (boxes == rec.end()) continue;
        if (!boxes->is_array()) {
            result.errors.push_back({line_no, image_id, "boxes must be an array"});
            continue;
        }
        for (const auto& bj : *boxes) {
            const auto x0 = get_number(bj, "x_min");
            const auto y0 = get_number(bj, "y_min");
            const auto x1 = get_number(bj, "x_max");
            const auto y1 = get_number(bj, "y_max");
            if (!x0 || !y0 || !x1 || !y1) {
                result.errors.push_back({line_no, image_id, "box with missing or non-numeric coordinates"});
                continue;
            }
            auto box = BoundingBox::make(*x0, *y0, *x1, *y1);
            if (!box) {
                result.errors.push_back({line_no, image_id, "degenerate or non-finite box"});
                continue;
            }
            if (box->x_min() < 0.0 || box->y_min() < 0.0 || box->x_max() > *width ||
                box->y_max() > *height) {
                result.errors.push_back({line_no, image_id, "box outside image bounds"});
                continue;
            }
            result.dataset.add_annotation({image_id, *box});
        }
    }
    return result;
}

DetectionLoadResult load_detections(const std::filesystem::path& path, const Dataset& dataset) {
    std::ifstream in = open_input(path);
    DetectionLoadResult result;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;

        ordered_json rec = ordered_json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            result.errors.push_back({line_no, "", "malformed JSON object"});
            continue;
        }
        const auto id_it = rec.find("image_id");
        if (id_it == rec.end() || !id_it->is_string()) {
            result.errors.push_back({line_no, "", "missing or non-string image_id"});
            continue;
        }
        const std::string image_id = id_it->get<std::string>();
        const ImageRecord* img = dataset.find_image(image_id);
        if (img == nullptr) {
            result.errors.push_back({line_no, image_id, "unknown image_id"});
            continue;
        }
        const auto x0 = get_number(rec, "x_min");
        const auto y0 = get_number(rec, "y_min");
        const auto x1 = get_number(rec, "x_max");
        const auto y1 = get_number(rec, "y_max");
        const auto score = get_number(rec, "score");
        if (!x0 || !y0 || !x1 || !y1 || !score) {
            result.errors.push_back({line_no, image_id, "missing or non-numeric field"});
            continue;
        }
        if (!(*score >= 0.0 && *score <= 1.0)) {
            result.errors.push_back({line_no, image_id, "score outside [0, 1]"});
            continue;
        }
        if (!BoundingBox::valid(*x0, *y0, *x1, *y1)) {
            result.errors.push_back({line_no, image_id, "degenerate or non-finite box"});
            continue;
        }
        const double cx0 = std::max(0.0, *x0);
        const double cy0 = std::max(0.0, *y0);
        const double cx1 = std::min(img->width, *x1);
        const double cy1 = std::min(img->height, *y1);
        auto box = BoundingBox::make(cx0, cy0, cx1, cy1);
        if (!box) {
            result.errors.push_back({line_no, image_id, "box entirely outside image"});
            continue;
        }
        if (cx0 != *x0 || cy0 != *y0 || cx1 != *x1 || cy1 != *y1) {
            result.warnings.push_back({line_no, image_id, "box clamped to image bounds"});
        }
        result.detections.push_back({image_id, *box, *score});
    }
    return result;
}

void save_annotations(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    std::unordered_map<std::string_view, std::vector<const Annotation*>> grouped;
    for (const Annotation& a : dataset.annotations()) {
        grouped[a.image_id].push_back(&a);
    }
    for (const ImageRecord& img : dataset.images()) {
        const auto it = grouped.find(img.image_id);
        static const std::vector<const Annotation*> kNone;
        out << image_to_json(img, it == grouped.end() ? kNone : it->second).dump() << '\n';
    }
}

void save_detections(std::span<const Detection> detections, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    for (const Detection& d : detections) {
        ordered_json rec;
        rec["image_id"] = d.image_id;
        rec["x_min"] = d.box.x_min();
        rec["y_min"] = d.box.y_min();
        rec["x_max"] = d.box.x_max();
        rec["y_max"] = d.box.y_max();
        rec["score"] = d.score;
        out << rec.dump() << '\n';
    }
}

RawBox convert_box(const RawBox& box, ConversionMode mode) {
    for (double v : {box.x_min, box.y_min, box.x_max, box.y_max}) {
        if (!is_integral(v)) {
            throw std::invalid_argument("convert_box: coordinates must be integers");
        }
    }
    if (mode == ConversionMode::kInclusiveToHalfOpen) {
        if (box.x_max < box.x_min || box.y_max < box.y_min) {
            throw std::invalid_argument("convert_box: invalid inclusive box");
        }
        return {box.x_min, box.y_min, box.x_max + 1.0, box.y_max + 1.0};
    }
    if (!(box.x_max > box.x_min) || !(box.y_max > box.y_min)) {
        throw std::invalid_argument("convert_box: invalid half-open box");
    }
    return {box.x_min, box.y_min, box.x_max - 1.0, box.y_max - 1.0};
}

namespace {

void convert_box_json(ordered_json& obj, ConversionMode mode) {
    const auto x0 = get_number(obj, "x_min");
    const auto y0 = get_number(obj, "y_min");
    const auto x1 = get_number(obj, "x_max");
    const auto y1 = get_number(obj, "y_max");
    if (!x0 || !y0 || !x1 || !y1) {
        throw std::invalid_argument("box with missing or non-numeric coordinates");
    }
    const RawBox converted = convert_box({*x0, *y0, *x1, *y1}, mode);
    obj["x_min"] = static_cast<std::int64_t>(converted.x_min);
    obj["y_min"] = static_cast<std::int64_t>(converted.y_min);
    obj["x_max"] = static_cast<std::int64_t>(converted.x_max);
    obj["y_max"] = static_cast<std::int64_t>(converted.y_max);
}

template <typename PerRecord>
std::vector<LoadIssue> convert_file(const std::filesystem::path& in_path,
                                    const std::filesystem::path& out_path,
                                    PerRecord&& per_record) {
    std::ifstream in = open_input(in_path);
    std::ofstream out = open_output(out_path);
    std::vector<LoadIssue> issues;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ordered_json rec = ordered_json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            issues.push_back({line_no, "", "malformed JSON object"});
            continue;
        }
        std::string image_id;
        if (const auto it = rec.find("image_id"); it != rec.end() && it->is_string()) {
            image_id = it->get<std::string>();
        }
        try {
            per_record(rec);
        } catch (const std::invalid_argument& e) {
            issues.push_back({line_no, image_id, e.what()});
            continue;
        }
        out << rec.dump() << '\n';
    }
    return issues;
}

}  // namespace

std::vector<LoadIssue> convert_annotation_file(const std::filesystem::path& in,
                                               const std::filesystem::path& out,
                                               ConversionMode mode) {
    return convert_file(in, out, [mode](ordered_json& rec) {
        const auto boxes = rec.find("boxes");
        if (boxes == rec.end()) return;
        if (!boxes->is_array()) throw std::invalid_argument("boxes must be an array");
        for (auto& b : *boxes) convert_box_json(b, mode);
    });
}

std::vector<LoadIssue> convert_detection_file(const std::filesystem::path& in,
                                              const std::filesystem::path& out,
                                              ConversionMode mode) {
    return convert_file(in, out, [mode](ordered_json& rec) { convert_box_json(rec, mode); });
}

}  // namespace pothole
