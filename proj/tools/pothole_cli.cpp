// Command-line front end: validation, dataset statistics, detection
// evaluation, curve export, NMS filtering, loss self-checks, pipeline replay,
// and coordinate-convention conversion. Machine-readable JSON goes to stdout
// (or --out), prose to stderr.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pothole/dataset.hpp"
#include "pothole/hazard.hpp"
#include "pothole/json_writer.hpp"
#include "pothole/kernels.hpp"
#include "pothole/losses.hpp"
#include "pothole/metrics.hpp"
#include "pothole/nms.hpp"
#include "pothole/stats.hpp"

namespace {

using namespace pothole;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// ---------------------------------------------------------------------------
// config files: key=value lines or a flat JSON object; keys are the long flag
// names without the leading dashes. CLI flags override config values.

class ConfigMap {
public:
    static ConfigMap load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config " + path.string());
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();

        ConfigMap cfg;
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '{') {
            const nlohmann::json j = nlohmann::json::parse(text);
            for (const auto& [key, val] : j.items()) {
                if (val.is_string()) {
                    cfg.kv_[key] = val.get<std::string>();
                } else if (val.is_array()) {
                    std::string joined;
                    for (const auto& item : val) {
                        if (!joined.empty()) joined += ',';
                        joined += item.dump();
                    }
                    cfg.kv_[key] = joined;
                } else {
                    cfg.kv_[key] = val.dump();
                }
            }
            return cfg;
        }

        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            if (!key.empty()) cfg.kv_[key] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    std::optional<std::string> get(const std::string& key) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<double> get_double(const std::string& key) const {
        const auto s = get(key);
        if (!s) return std::nullopt;
        return std::stod(*s);
    }

    std::optional<int> get_int(const std::string& key) const {
        const auto s = get(key);
        if (!s) return std::nullopt;
        return std::stoi(*s);
    }

    std::optional<std::vector<double>> get_doubles(const std::string& key) const {
        const auto s = get(key);
        if (!s) return std::nullopt;
        std::vector<double> out;
        std::istringstream parts(*s);
        std::string item;
        while (std::getline(parts, item, ',')) {
            if (!item.empty()) out.push_back(std::stod(item));
        }
        return out;
    }

private:
    std::map<std::string, std::string> kv_;
};

ConfigMap load_config_if_set(const std::optional<std::string>& path) {
    return path ? ConfigMap::load(*path) : ConfigMap();
}

double resolve(const std::optional<double>& cli, const ConfigMap& cfg, const std::string& key,
               double fallback) {
    if (cli) return *cli;
    if (const auto v = cfg.get_double(key)) return *v;
    return fallback;
}

int resolve(const std::optional<int>& cli, const ConfigMap& cfg, const std::string& key,
            int fallback) {
    if (cli) return *cli;
    if (const auto v = cfg.get_int(key)) return *v;
    return fallback;
}

// ---------------------------------------------------------------------------

void print_issues(const std::vector<LoadIssue>& issues, const char* label) {
    for (const LoadIssue& i : issues) {
        std::cerr << label << " line " << i.line;
        if (!i.image_id.empty()) std::cerr << " [" << i.image_id << "]";
        std::cerr << ": " << i.message << '\n';
    }
}

void append_issues(JsonWriter& w, const std::vector<LoadIssue>& issues) {
    w.begin_array();
    for (const LoadIssue& i : issues) {
        w.begin_object();
        w.key("line").value(static_cast<std::int64_t>(i.line));
        w.key("image_id").value(i.image_id);
        w.key("message").value(i.message);
        w.end_object();
    }
    w.end_array();
}

int emit(const std::string& json, const std::optional<std::string>& out_path) {
    if (out_path) {
        std::ofstream out(*out_path);
        if (!out) throw std::runtime_error("cannot open " + *out_path + " for writing");
        out << json << '\n';
    } else {
        std::cout << json << '\n';
    }
    return kExitOk;
}

// loads annotations and detections, reporting issues; returns false when
// validation errors should abort the command
struct LoadedInputs {
    Dataset dataset;
    std::vector<Detection> detections;
};

std::optional<LoadedInputs> load_inputs(const std::string& annotations_path,
                                        const std::string& detections_path) {
    AnnotationLoadResult ann = load_annotations(annotations_path);
    print_issues(ann.errors, "annotation");
    if (!ann.errors.empty()) return std::nullopt;
    DetectionLoadResult det = load_detections(detections_path, ann.dataset);
    print_issues(det.errors, "detection");
    print_issues(det.warnings, "detection warning");
    if (!det.errors.empty()) return std::nullopt;
    return LoadedInputs{std::move(ann.dataset), std::move(det.detections)};
}

// ---------------------------------------------------------------------------

struct ValidateOpts {
    std::string annotations;
    std::optional<std::string> detections;
    std::optional<std::string> out;
};

int cmd_validate(const ValidateOpts& o) {
    AnnotationLoadResult ann = load_annotations(o.annotations);
    print_issues(ann.errors, "annotation");

    std::optional<DetectionLoadResult> det;
    if (o.detections) {
        det = load_detections(*o.detections, ann.dataset);
        print_issues(det->errors, "detection");
        print_issues(det->warnings, "detection warning");
    }

    JsonWriter w;
    w.begin_object();
    w.key("images").value(ann.dataset.images().size());
    w.key("annotations").value(ann.dataset.annotations().size());
    if (det) w.key("detections").value(det->detections.size());
    const std::size_t error_count = ann.errors.size() + (det ? det->errors.size() : 0);
    w.key("errors").value(error_count);
    w.key("warnings").value(det ? det->warnings.size() : 0);
    w.key("error_list");
    std::vector<LoadIssue> all_errors = ann.errors;
    if (det) all_errors.insert(all_errors.end(), det->errors.begin(), det->errors.end());
    append_issues(w, all_errors);
    w.key("warning_list");
    append_issues(w, det ? det->warnings : std::vector<LoadIssue>{});
    w.end_object();
    emit(w.str(), o.out);

    std::cerr << "validate: " << ann.dataset.images().size() << " images, "
              << ann.dataset.annotations().size() << " annotations, " << error_count
              << " errors\n";
    return error_count == 0 ? kExitOk : kExitValidation;
}

// ---------------------------------------------------------------------------

struct StatsOpts {
    std::string annotations;
    std::vector<std::string> resolutions;
    std::optional<std::string> csv_out;
    std::optional<std::string> out;
    std::optional<std::string> config;
};

std::pair<int, int> parse_resolution(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw std::invalid_argument("resolution must look like 600x600");
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
}

void append_boxplot(JsonWriter& w, const BoxplotSummary& s) {
    w.begin_object();
    w.key("n").value(s.n);
    w.key("q1").value(s.q1);
    w.key("median").value(s.median);
    w.key("q3").value(s.q3);
    w.key("iqr").value(s.iqr);
    w.key("lower_limit").value(s.lower_limit);
    w.key("upper_limit").value(s.upper_limit);
    w.key("lower_whisker").value(s.lower_whisker);
    w.key("upper_whisker").value(s.upper_whisker);
    w.key("outliers");
    w.begin_array();
    for (double v : s.outliers) w.value(v);
    w.end_array();
    w.end_object();
}

int cmd_stats(const StatsOpts& o) {
    const ConfigMap cfg = load_config_if_set(o.config);
    AnnotationLoadResult ann = load_annotations(o.annotations);
    print_issues(ann.errors, "annotation");
    if (!ann.errors.empty()) return kExitValidation;
    const Dataset& ds = ann.dataset;
    if (ds.annotations().empty()) {
        std::cerr << "stats: dataset has no annotations\n";
        return kExitValidation;
    }

    std::vector<std::string> resolution_args = o.resolutions;
    if (resolution_args.empty()) {
        if (const auto v = cfg.get("resolution")) {
            std::istringstream parts(*v);
            std::string item;
            while (std::getline(parts, item, ',')) resolution_args.push_back(item);
        } else {
            resolution_args = {"600x600", "1024x800"};
        }
    }
    std::vector<std::pair<int, int>> resolutions;
    for (const std::string& r : resolution_args) resolutions.push_back(parse_resolution(r));

    const std::vector<double> ratios = aspect_ratios(ds);
    std::vector<double> areas, fractions;
    for (const Annotation& a : ds.annotations()) {
        const ImageRecord* img = ds.find_image(a.image_id);
        areas.push_back(a.box.area());
        fractions.push_back(a.box.area() / (img->width * img->height));
    }
    const BoxplotSummary ratio_bp = boxplot(ratios);
    const BoxplotSummary area_bp = boxplot(areas);
    const BoxplotSummary fraction_bp = boxplot(fractions);
    const TuningRecommendation rec = recommend_tuning(ds, resolutions);

    JsonWriter w;
    w.begin_object();
    w.key("annotations").value(ds.annotations().size());
    w.key("aspect_ratio");
    append_boxplot(w, ratio_bp);
    w.key("area_px");
    append_boxplot(w, area_bp);
    w.key("area_fraction");
    append_boxplot(w, fraction_bp);
    w.key("tuning");
    w.begin_object();
    w.key("aspect_ratio_set");
    w.begin_array();
    for (double r : rec.aspect_ratio_set) w.value(r);
    w.end_array();
    w.key("median_area_px").value(rec.median_area_px);
    w.key("median_area_fraction").value(rec.median_area_fraction);
    w.key("projected_area");
    w.begin_array();
    for (const auto& [res, area] : rec.projected_area_at) {
        w.begin_object();
        w.key("width").value(static_cast<std::int64_t>(res.first));
        w.key("height").value(static_cast<std::int64_t>(res.second));
        w.key("area_px").value(area);
        w.end_object();
    }
    w.end_array();
    w.end_object();
    w.end_object();
    emit(w.str(), o.out);

    if (o.csv_out) {
        std::ofstream csv(*o.csv_out);
        if (!csv) throw std::runtime_error("cannot open " + *o.csv_out + " for writing");
        csv << "distribution,n,q1,median,q3,iqr,lower_limit,upper_limit,lower_whisker,"
               "upper_whisker,outlier_count,outliers\n";
        auto row = [&](const char* name, const BoxplotSummary& s) {
            csv << name << ',' << s.n << ',' << JsonWriter::format_real(s.q1) << ','
                << JsonWriter::format_real(s.median) << ',' << JsonWriter::format_real(s.q3)
                << ',' << JsonWriter::format_real(s.iqr) << ','
                << JsonWriter::format_real(s.lower_limit) << ','
                << JsonWriter::format_real(s.upper_limit) << ','
                << JsonWriter::format_real(s.lower_whisker) << ','
                << JsonWriter::format_real(s.upper_whisker) << ',' << s.outliers.size() << ',';
            for (std::size_t i = 0; i < s.outliers.size(); ++i) {
                if (i) csv << ';';
                csv << JsonWriter::format_real(s.outliers[i]);
            }
            csv << '\n';
        };
        row("aspect_ratio", ratio_bp);
        row("area_px", area_bp);
        row("area_fraction", fraction_bp);
        csv << "metric,value\n";
        csv << "median_area_px," << JsonWriter::format_real(rec.median_area_px) << '\n';
        csv << "median_area_fraction," << JsonWriter::format_real(rec.median_area_fraction)
            << '\n';
        csv << "aspect_ratio_set,";
        for (std::size_t i = 0; i < rec.aspect_ratio_set.size(); ++i) {
            if (i) csv << ';';
            csv << JsonWriter::format_real(rec.aspect_ratio_set[i]);
        }
        csv << '\n';
        csv << "width,height,projected_median_area_px\n";
        for (const auto& [res, area] : rec.projected_area_at) {
            csv << res.first << ',' << res.second << ',' << JsonWriter::format_real(area) << '\n';
        }
    }

    std::cerr << "stats: " << ds.annotations().size() << " annotations analyzed\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalOpts {
    std::string annotations;
    std::string detections;
    std::string protocol = "pascal";
    std::vector<double> ious;
    std::optional<std::string> curve_out;
    std::optional<std::string> out;
    std::optional<std::string> config;
};

std::filesystem::path curve_path(const std::string& base, double threshold, bool single) {
    if (single) return base;
    std::filesystem::path p(base);
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%.2f", threshold);
    std::filesystem::path named = p.parent_path() / (p.stem().string() + buf);
    named += p.extension();
    return named;
}

int cmd_eval(const EvalOpts& o) {
    const ConfigMap cfg = load_config_if_set(o.config);
    const auto inputs = load_inputs(o.annotations, o.detections);
    if (!inputs) return kExitValidation;
    if (inputs->dataset.annotations().empty()) {
        std::cerr << "eval: dataset has no annotations (recall undefined)\n";
        return kExitValidation;
    }

    std::string protocol = o.protocol;
    if (protocol != "pascal" && protocol != "coco") {
        std::cerr << "eval: protocol must be pascal or coco\n";
        return kExitUsage;
    }

    std::vector<double> thresholds = o.ious;
    if (thresholds.empty()) {
        if (const auto v = cfg.get_doubles("iou")) thresholds = *v;
    }
    if (protocol == "coco") {
        const auto t = coco_thresholds();
        thresholds.assign(t.begin(), t.end());
    } else if (thresholds.empty()) {
        thresholds = {0.5, 0.4};  // the two reported operating variants
    }

    JsonWriter w;
    w.begin_object();
    w.key("protocol").value(protocol);
    w.key("annotations").value(inputs->dataset.annotations().size());
    w.key("detections").value(inputs->detections.size());
    w.key("results");
    w.begin_array();
    double ap_sum = 0.0;
    for (double t : thresholds) {
        const PRCurve curve = pr_curve(inputs->dataset, inputs->detections, t);
        const APResult ap = average_precision(curve);
        ap_sum += ap.ap;
        w.begin_object();
        w.key("iou_threshold").value(t);
        w.key("ap").value(ap.ap);
        w.key("protocol").value(ap.protocol);
        w.key("tp").value(curve.tp);
        w.key("fp").value(curve.fp);
        w.key("fn").value(curve.fn);
        if (const auto op = best_f1_point(curve)) {
            w.key("operating_point");
            w.begin_object();
            w.key("score_threshold").value(op->score_threshold);
            w.key("precision").value(op->precision);
            w.key("recall").value(op->recall);
            w.key("f1").value(op->f1);
            w.key("tp").value(op->tp);
            w.key("fp").value(op->fp);
            w.key("fn").value(op->fn);
            w.end_object();
        }
        w.end_object();
        if (o.curve_out) {
            export_curve(curve, curve_path(*o.curve_out, t, thresholds.size() == 1));
        }
    }
    w.end_array();
    if (protocol == "coco") {
        w.key("coco_map").value(ap_sum / static_cast<double>(thresholds.size()));
    }
    w.end_object();
    emit(w.str(), o.out);

    std::cerr << "eval: " << inputs->detections.size() << " detections against "
              << inputs->dataset.annotations().size() << " annotations\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct CurvesOpts {
    std::string annotations;
    std::string detections;
    std::optional<double> iou;
    std::string out;
    std::optional<std::string> config;
};

int cmd_curves(const CurvesOpts& o) {
    const ConfigMap cfg = load_config_if_set(o.config);
    const auto inputs = load_inputs(o.annotations, o.detections);
    if (!inputs) return kExitValidation;
    if (inputs->dataset.annotations().empty()) {
        std::cerr << "curves: dataset has no annotations\n";
        return kExitValidation;
    }
    const double threshold = resolve(o.iou, cfg, "iou", 0.5);
    const PRCurve curve = pr_curve(inputs->dataset, inputs->detections, threshold);
    export_curve(curve, o.out);

    JsonWriter w;
    w.begin_object();
    w.key("iou_threshold").value(threshold);
    w.key("points").value(curve.points.size());
    w.key("ap").value(average_precision(curve).ap);
    w.key("out").value(o.out);
    w.end_object();
    emit(w.str(), std::nullopt);
    std::cerr << "curves: wrote " << o.out << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct NmsOpts {
    std::string detections;
    std::optional<std::string> annotations;
    std::optional<double> iou_threshold;
    std::string out;
    std::optional<std::string> config;
};

// standalone detection reader used when no annotation file is supplied: no
// image registry, so only structural validity can be checked
DetectionLoadResult load_detections_standalone(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    DetectionLoadResult result;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("image_id") ||
            !rec["image_id"].is_string()) {
            result.errors.push_back({line_no, "", "malformed JSON object"});
            continue;
        }
        const std::string image_id = rec["image_id"].get<std::string>();
        auto num = [&](const char* key) -> std::optional<double> {
            if (!rec.contains(key) || !rec[key].is_number()) return std::nullopt;
            return rec[key].get<double>();
        };
        const auto x0 = num("x_min"), y0 = num("y_min"), x1 = num("x_max"), y1 = num("y_max"),
                   score = num("score");
        if (!x0 || !y0 || !x1 || !y1 || !score) {
            result.errors.push_back({line_no, image_id, "missing or non-numeric field"});
            continue;
        }
        if (!(*score >= 0.0 && *score <= 1.0)) {
            result.errors.push_back({line_no, image_id, "score outside [0, 1]"});
            continue;
        }
        const auto box = BoundingBox::make(*x0, *y0, *x1, *y1);
        if (!box) {
            result.errors.push_back({line_no, image_id, "degenerate or non-finite box"});
            continue;
        }
        result.detections.push_back({image_id, *box, *score});
    }
    return result;
}

int cmd_nms(const NmsOpts& o) {
    const ConfigMap cfg = load_config_if_set(o.config);
    DetectionLoadResult det;
    if (o.annotations) {
        AnnotationLoadResult ann = load_annotations(*o.annotations);
        print_issues(ann.errors, "annotation");
        if (!ann.errors.empty()) return kExitValidation;
        det = load_detections(o.detections, ann.dataset);
    } else {
        det = load_detections_standalone(o.detections);
    }
    print_issues(det.errors, "detection");
    print_issues(det.warnings, "detection warning");
    if (!det.errors.empty()) return kExitValidation;

    const double threshold = resolve(o.iou_threshold, cfg, "iou-threshold", 0.5);

    std::map<std::string, std::vector<ScoredBox>> by_image;
    for (const Detection& d : det.detections) {
        by_image[d.image_id].push_back({d.box, d.score});
    }
    std::vector<Detection> kept;
    for (const auto& [image_id, boxes] : by_image) {
        for (const ScoredBox& sb : nms(boxes, threshold)) {
            kept.push_back({image_id, sb.box, sb.score});
        }
    }
    save_detections(kept, o.out);

    JsonWriter w;
    w.begin_object();
    w.key("iou_threshold").value(threshold);
    w.key("input").value(det.detections.size());
    w.key("kept").value(kept.size());
    w.key("out").value(o.out);
    w.end_object();
    emit(w.str(), std::nullopt);
    std::cerr << "nms: kept " << kept.size() << " of " << det.detections.size()
              << " detections\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct LossCheckOpts {
    int trials = 100;
    std::uint64_t seed = 20240615;
    std::optional<std::string> out;
};

int cmd_loss_check(const LossCheckOpts& o) {
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> prob(0.05, 0.95);
    std::uniform_real_distribution<double> logit(-2.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // residuals clear of the smooth-L1 kink at |x| = 1
    auto safe_residual = [&]() {
        const double mag = rng() % 2 == 0 ? unit(rng) * 0.9 : 1.1 + unit(rng) * 1.9;
        return (rng() % 2 == 0 ? 1.0 : -1.0) * mag;
    };

    struct Check {
        std::string name;
        bool pass;
        double measured;
        double bound;
    };
    std::vector<Check> checks;
    auto add = [&](std::string name, double measured, double bound) {
        checks.push_back({std::move(name), measured <= bound, measured, bound});
    };

    // fixed-value fixtures
    add("smooth_l1(0) == 0", std::fabs(smooth_l1(0.0)), 0.0);
    add("smooth_l1(0.5) == 0.125", std::fabs(smooth_l1(0.5) - 0.125), 1e-15);
    add("smooth_l1(2) == 1.5", std::fabs(smooth_l1(2.0) - 1.5), 1e-15);
    add("smooth_l1 continuous at |x| = 1",
        std::fabs(smooth_l1(1.0) - (0.5 * 1.0)) + std::fabs(smooth_l1(-1.0) - 0.5), 1e-12);
    add("smooth_l1 derivative continuous at |x| = 1",
        std::fabs(smooth_l1_grad(std::nextafter(1.0, 0.0)) - smooth_l1_grad(1.0)),
        1e-12);

    {
        // encode/decode round trip
        std::uniform_real_distribution<double> coord(0.0, 900.0);
        std::uniform_real_distribution<double> size(1.0, 120.0);
        double max_err = 0.0;
        for (int i = 0; i < o.trials; ++i) {
            const BoundingBox anchor(coord(rng), coord(rng), coord(rng) + 901.0 + size(rng),
                                     coord(rng) + 901.0 + size(rng));
            const BoundingBox box(coord(rng), coord(rng), coord(rng) + 901.0 + size(rng),
                                  coord(rng) + 901.0 + size(rng));
            const BoundingBox back = decode_box(encode_box(box, anchor), anchor);
            max_err = std::max({max_err, std::fabs(back.x_min() - box.x_min()),
                                std::fabs(back.y_min() - box.y_min()),
                                std::fabs(back.x_max() - box.x_max()),
                                std::fabs(back.y_max() - box.y_max())});
        }
        add("encode/decode round trip", max_err, 1e-9);
    }

    {
        // worked single-anchor case: -ln 0.5 + 4 * smooth_l1(0.5)
        AnchorPrediction a{0.5, true, {0.5, 0.5, 0.5, 0.5}, {0.0, 0.0, 0.0, 0.0}};
        const double loss = rpn_loss({&a, 1}, 1.0, 1, 1);
        add("rpn_loss worked case", std::fabs(loss - (-std::log(0.5) + 0.5)), 1e-12);

        AnchorPrediction perfect{1.0, true, {0.2, 0.2, 0.2, 0.2}, {0.2, 0.2, 0.2, 0.2}};
        add("rpn_loss perfect batch ~ 0", rpn_loss({&perfect, 1}, 1.0, 1, 1), 1e-6);

        AnchorPrediction negative{0.0, false, {9.0, 9.0, 9.0, 9.0}, {0.0, 0.0, 0.0, 0.0}};
        add("rpn_loss negative anchor has no regression",
            std::fabs(rpn_loss({&negative, 1}, 1.0, 1, 1) -
                      rpn_loss({&negative, 1}, 100.0, 1, 1)),
            0.0);
    }

    {
        DefaultBoxPrediction even{{0.3, 0.3}, {1, 2, 3, 4}, {{1, 2, 3, 4}}};
        add("ssd_loss uniform logits == ln 2",
            std::fabs(ssd_loss({&even, 1}) - std::log(2.0)), 1e-12);

        DefaultBoxPrediction strong{{0.0, 20.0}, {1, 2, 3, 4}, {{1, 2, 3, 4}}};
        add("ssd_loss strong correct logits ~ 0", ssd_loss({&strong, 1}), 1e-6);

        DefaultBoxPrediction off{{0.0, 20.0}, {2, 2, 2, 2}, {{0, 0, 0, 0}}};
        add("ssd_loss four coordinates off by 2", std::fabs(ssd_loss({&off, 1}) - 6.0), 1e-6);
    }

    {
        // lambda linearity
        std::vector<AnchorPrediction> batch;
        for (int i = 0; i < 8; ++i) {
            AnchorPrediction a;
            a.objectness = prob(rng);
            a.is_positive = i % 2 == 0;
            for (int k = 0; k < 4; ++k) {
                a.loc[k] = safe_residual();
                a.target[k] = 0.0;
            }
            batch.push_back(a);
        }
        const RpnLossTerms terms = rpn_loss_terms(batch, 4, 8);
        const double l1 = rpn_loss(batch, 1.0, 4, 8);
        const double l2 = rpn_loss(batch, 2.0, 4, 8);
        add("rpn_loss linear in lambda",
            std::fabs((l2 - l1) - terms.regression), 1e-12);
    }

    {
        // gradient checks on random non-kink points
        double worst = 0.0;
        std::uniform_real_distribution<double> x_dist(-3.0, 3.0);
        for (int i = 0; i < o.trials; ++i) {
            double x = x_dist(rng);
            if (std::fabs(std::fabs(x) - 1.0) < 0.05) x += 0.1;
            worst = std::max(worst, check_smooth_l1_gradient(x, 1e-5).max_rel_error);
        }
        add("smooth_l1 gradient vs finite differences", worst, 1e-4);

        worst = 0.0;
        for (int i = 0; i < o.trials; ++i) {
            std::vector<AnchorPrediction> batch(4);
            for (AnchorPrediction& a : batch) {
                a.objectness = prob(rng);
                a.is_positive = rng() % 2 == 0;
                for (int k = 0; k < 4; ++k) {
                    a.loc[k] = safe_residual();
                    a.target[k] = 0.0;
                }
            }
            worst = std::max(worst,
                             check_rpn_gradients(batch, 1.5, 2, 4, 1e-5).max_rel_error);
        }
        add("rpn_loss gradients vs finite differences", worst, 1e-4);

        worst = 0.0;
        for (int i = 0; i < o.trials; ++i) {
            std::vector<DefaultBoxPrediction> batch(4);
            for (std::size_t j = 0; j < batch.size(); ++j) {
                batch[j].class_logits = {logit(rng), logit(rng)};
                if (j == 0 || rng() % 2 == 0) {  // j == 0 keeps N >= 1
                    for (int k = 0; k < 4; ++k) batch[j].loc[k] = safe_residual();
                    batch[j].target_loc = std::array<double, 4>{};
                }
            }
            worst = std::max(worst, check_ssd_gradients(batch, 1e-5).max_rel_error);
        }
        add("ssd_loss gradients vs finite differences", worst, 1e-4);
    }

    bool all_pass = true;
    for (const Check& c : checks) {
        all_pass = all_pass && c.pass;
        std::cerr << (c.pass ? "PASS  " : "FAIL  ") << c.name << " (measured "
                  << c.measured << ", bound " << c.bound << ")\n";
    }

    JsonWriter w;
    w.begin_object();
    w.key("trials").value(o.trials);
    w.key("checks");
    w.begin_array();
    for (const Check& c : checks) {
        w.begin_object();
        w.key("name").value(c.name);
        w.key("pass").value(c.pass);
        w.key("measured").value(c.measured);
        w.key("bound").value(c.bound);
        w.end_object();
    }
    w.end_array();
    w.key("all_pass").value(all_pass);
    w.end_object();
    emit(w.str(), o.out);
    return all_pass ? kExitOk : kExitValidation;
}

// ---------------------------------------------------------------------------

struct SimulateOpts {
    std::string events;
    std::optional<double> cell_size;
    std::optional<int> threshold;
    std::optional<double> half_life_hours;
    std::optional<double> debounce_seconds;
    std::optional<std::string> out;
    std::optional<std::string> report_out;
    std::optional<std::string> config;
};

int cmd_simulate(const SimulateOpts& o) {
    const ConfigMap cfg = load_config_if_set(o.config);
    HazardConfig hc;
    hc.cell_size_m = resolve(o.cell_size, cfg, "cell-size", hc.cell_size_m);
    hc.report_threshold = resolve(o.threshold, cfg, "threshold", hc.report_threshold);
    hc.half_life_hours = resolve(o.half_life_hours, cfg, "half-life-hours", hc.half_life_hours);
    hc.debounce_seconds =
        resolve(o.debounce_seconds, cfg, "debounce-seconds", hc.debounce_seconds);

    const ReplayResult result = replay(o.events, hc);
    print_issues(result.issues, "event");

    if (o.out) save_warnings(result.warnings, *o.out);

    JsonWriter w;
    w.begin_object();
    w.key("config");
    w.begin_object();
    w.key("cell_size_m").value(hc.cell_size_m);
    w.key("report_threshold").value(hc.report_threshold);
    w.key("half_life_hours").value(hc.half_life_hours);
    w.key("debounce_seconds").value(hc.debounce_seconds);
    w.end_object();
    w.key("events").value(result.summary.events_ingested);
    w.key("malformed").value(result.summary.malformed_lines);
    w.key("cells").value(result.summary.cells_touched);
    w.key("warnings_emitted").value(result.summary.warnings_emitted);
    w.key("warnings");
    w.begin_array();
    for (const WarningMessage& m : result.warnings) {
        w.begin_object();
        w.key("cell");
        w.begin_array();
        w.value(m.cell.lat_index).value(m.cell.lon_index);
        w.end_array();
        w.key("lat").value(m.latitude);
        w.key("lon").value(m.longitude);
        w.key("confidence").value(m.confidence);
        w.key("distinct_reports").value(m.distinct_reports);
        w.key("issued_at").value(m.issued_at_ms);
        w.end_object();
    }
    w.end_array();
    w.key("cells_detail");
    w.begin_array();
    for (const CellState& c : result.cells) {
        w.begin_object();
        w.key("cell");
        w.begin_array();
        w.value(c.id.lat_index).value(c.id.lon_index);
        w.end_array();
        w.key("confidence").value(c.confidence);
        w.key("distinct_reports").value(c.distinct_reports);
        w.key("last_update").value(c.last_update_ms);
        w.key("warned").value(c.warned);
        w.end_object();
    }
    w.end_array();
    w.end_object();
    emit(w.str(), o.report_out);

    std::cerr << "simulate: " << result.summary.events_ingested << " events, "
              << result.summary.warnings_emitted << " warnings\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct ConvertOpts {
    std::string in;
    std::string out;
    std::string mode;
    std::string kind = "annotations";
};

int cmd_convert(const ConvertOpts& o) {
    ConversionMode mode;
    if (o.mode == "inclusive-to-halfopen") {
        mode = ConversionMode::kInclusiveToHalfOpen;
    } else if (o.mode == "halfopen-to-inclusive") {
        mode = ConversionMode::kHalfOpenToInclusive;
    } else {
        std::cerr << "convert: mode must be inclusive-to-halfopen or halfopen-to-inclusive\n";
        return kExitUsage;
    }
    std::vector<LoadIssue> issues;
    if (o.kind == "annotations") {
        issues = convert_annotation_file(o.in, o.out, mode);
    } else if (o.kind == "detections") {
        issues = convert_detection_file(o.in, o.out, mode);
    } else {
        std::cerr << "convert: kind must be annotations or detections\n";
        return kExitUsage;
    }
    print_issues(issues, "convert");

    JsonWriter w;
    w.begin_object();
    w.key("mode").value(o.mode);
    w.key("kind").value(o.kind);
    w.key("issues").value(issues.size());
    w.key("out").value(o.out);
    w.end_object();
    emit(w.str(), std::nullopt);
    return issues.empty() ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pothole detection evaluation and hazard-reporting toolkit"};
    app.require_subcommand(1);

    ValidateOpts validate_opts;
    auto* validate = app.add_subcommand("validate", "validate annotation/detection files");
    validate->add_option("--annotations", validate_opts.annotations, "annotation JSONL file")
        ->required();
    validate->add_option("--detections", validate_opts.detections, "detection JSONL file");
    validate->add_option("--out", validate_opts.out, "write the JSON report here");

    StatsOpts stats_opts;
    auto* stats = app.add_subcommand("stats", "dataset distribution statistics");
    stats->add_option("--annotations", stats_opts.annotations, "annotation JSONL file")
        ->required();
    stats->add_option("--resolution", stats_opts.resolutions,
                      "candidate input resolution WxH (repeatable)");
    stats->add_option("--csv-out", stats_opts.csv_out, "also write plot-ready CSV here");
    stats->add_option("--out", stats_opts.out, "write the JSON report here");
    stats->add_option("--config", stats_opts.config, "config file (key=value or JSON)");

    EvalOpts eval_opts;
    auto* eval = app.add_subcommand("eval", "match detections and compute AP/mAP");
    eval->add_option("--annotations", eval_opts.annotations, "annotation JSONL file")
        ->required();
    eval->add_option("--detections", eval_opts.detections, "detection JSONL file")->required();
    eval->add_option("--protocol", eval_opts.protocol, "pascal or coco (default pascal)");
    eval->add_option("--iou", eval_opts.ious,
                     "IoU threshold (repeatable; pascal default 0.5 and 0.4)");
    eval->add_option("--curve-out", eval_opts.curve_out, "export PR curve CSV here");
    eval->add_option("--out", eval_opts.out, "write the JSON report here");
    eval->add_option("--config", eval_opts.config, "config file (key=value or JSON)");

    CurvesOpts curves_opts;
    auto* curves = app.add_subcommand("curves", "export a precision-recall curve as CSV");
    curves->add_option("--annotations", curves_opts.annotations, "annotation JSONL file")
        ->required();
    curves->add_option("--detections", curves_opts.detections, "detection JSONL file")
        ->required();
    curves->add_option("--iou", curves_opts.iou, "IoU threshold (default 0.5)");
    curves->add_option("--out", curves_opts.out, "CSV output path")->required();
    curves->add_option("--config", curves_opts.config, "config file (key=value or JSON)");

    NmsOpts nms_opts;
    auto* nms_cmd = app.add_subcommand("nms", "greedy non-maximum suppression per image");
    nms_cmd->add_option("--detections", nms_opts.detections, "detection JSONL file")->required();
    nms_cmd->add_option("--annotations", nms_opts.annotations,
                        "optional annotation file for bounds validation");
    nms_cmd->add_option("--iou-threshold", nms_opts.iou_threshold,
                        "suppression threshold (default 0.5)");
    nms_cmd->add_option("--out", nms_opts.out, "filtered detection JSONL path")->required();
    nms_cmd->add_option("--config", nms_opts.config, "config file (key=value or JSON)");

    LossCheckOpts loss_opts;
    auto* loss_check = app.add_subcommand("loss-check", "loss fixtures and gradient checks");
    loss_check->add_option("--trials", loss_opts.trials, "random points per check (default 100)");
    loss_check->add_option("--seed", loss_opts.seed, "RNG seed");
    loss_check->add_option("--out", loss_opts.out, "write the JSON report here");

    SimulateOpts sim_opts;
    auto* simulate = app.add_subcommand("simulate", "replay a hazard event log");
    simulate->add_option("--events", sim_opts.events, "event JSONL file")->required();
    simulate->add_option("--cell-size", sim_opts.cell_size, "map cell size in meters (default 10)");
    simulate->add_option("--threshold", sim_opts.threshold,
                         "distinct reports required for a warning (default 3)");
    simulate->add_option("--half-life-hours", sim_opts.half_life_hours,
                         "confidence decay half-life (default 24)");
    simulate->add_option("--debounce-seconds", sim_opts.debounce_seconds,
                         "per-device debounce window (default 5)");
    simulate->add_option("--out", sim_opts.out, "write warnings JSONL here");
    simulate->add_option("--report-out", sim_opts.report_out, "write the JSON report here");
    simulate->add_option("--config", sim_opts.config, "config file (key=value or JSON)");

    ConvertOpts convert_opts;
    auto* convert = app.add_subcommand("convert", "convert box coordinate conventions");
    convert->add_option("--in", convert_opts.in, "input JSONL file")->required();
    convert->add_option("--out", convert_opts.out, "output JSONL file")->required();
    convert->add_option("--mode", convert_opts.mode,
                        "inclusive-to-halfopen or halfopen-to-inclusive")
        ->required();
    convert->add_option("--kind", convert_opts.kind, "annotations (default) or detections");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (validate->parsed()) return cmd_validate(validate_opts);
        if (stats->parsed()) return cmd_stats(stats_opts);
        if (eval->parsed()) return cmd_eval(eval_opts);
        if (curves->parsed()) return cmd_curves(curves_opts);
        if (nms_cmd->parsed()) return cmd_nms(nms_opts);
        if (loss_check->parsed()) return cmd_loss_check(loss_opts);
        if (simulate->parsed()) return cmd_simulate(sim_opts);
        if (convert->parsed()) return cmd_convert(convert_opts);
    } catch (const UnsortedLogError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
