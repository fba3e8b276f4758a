#include "scaleforge/annot.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace scaleforge {

using nlohmann::json;

namespace {

std::string box_tag(std::size_t index) { return "box[" + std::to_string(index) + "]"; }

BoxAnnotation box_from_json(const json& j) {
    BoxAnnotation box{j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
                      j.at("h").get<double>()};
    if (auto it = j.find("synthetic_box"); it != j.end()) box.synthetic = it->get<bool>();
    return box;
}

json box_to_json(const BoxAnnotation& box) {
    json j{{"x", box.x}, {"y", box.y}, {"w", box.w}, {"h", box.h}};
    if (box.synthetic) j["synthetic_box"] = true;
    return j;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double to_number(const std::string& s, std::size_t line, const std::string& column) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line) + ": column '" + column +
                             "' is not a number: '" + s + "'",
                         line);
    }
}

Ingested parse_native(std::istream& in, const std::string& fallback_name) {
    Ingested result;
    result.bundle.name = fallback_name;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what(), lineno);
        }
        try {
            if (!header_seen) {
                if (!j.contains("schema_version")) {
                    throw ParseError("line " + std::to_string(lineno) +
                                         ": missing header record with schema_version",
                                     lineno);
                }
                const int version = j.at("schema_version").get<int>();
                if (version != kDatasetSchemaVersion) {
                    throw ParseError("line " + std::to_string(lineno) +
                                         ": unsupported schema_version " + std::to_string(version),
                                     lineno);
                }
                if (j.contains("name")) result.bundle.name = j.at("name").get<std::string>();
                header_seen = true;
                continue;
            }
            ImageRecord image;
            image.id = j.at("id").get<std::string>();
            image.width = j.at("width").get<int>();
            image.height = j.at("height").get<int>();
            for (const auto& b : j.at("boxes")) image.boxes.push_back(box_from_json(b));
            if (j.contains("meta")) {
                image.meta = j.at("meta").get<std::map<std::string, std::string>>();
            }
            result.bundle.images.push_back(std::move(image));
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what(), lineno);
        }
    }
    if (!header_seen) throw ParseError("empty dataset file (no header record)", 0);
    return result;
}

// Columns: id,width,height,x,y,w,h plus optional meta columns. Empty x/y means an image
// without objects; empty w/h means a point label.
Ingested parse_csv(std::istream& in, const std::string& name, const ParseOptions& options) {
    Ingested result;
    result.bundle.name = name;
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    std::map<std::string, std::size_t> index_of;
    std::map<std::string, std::size_t> image_of;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split_csv(line);
        if (header.empty()) {
            header = cells;
            for (std::size_t i = 0; i < header.size(); ++i) index_of[header[i]] = i;
            for (const char* required : {"id", "width", "height", "x", "y"}) {
                if (!index_of.contains(required)) {
                    throw ParseError("line " + std::to_string(lineno) + ": header lacks column '" +
                                         required + "'",
                                     lineno);
                }
            }
            continue;
        }
        if (cells.size() != header.size()) {
            throw ParseError("line " + std::to_string(lineno) + ": expected " +
                                 std::to_string(header.size()) + " cells, got " +
                                 std::to_string(cells.size()),
                             lineno);
        }
        auto cell = [&](const std::string& col) -> const std::string& {
            static const std::string empty;
            auto it = index_of.find(col);
            return it == index_of.end() ? empty : cells[it->second];
        };
        const std::string& id = cell("id");
        if (id.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty id", lineno);

        auto& images = result.bundle.images;
        auto found = image_of.find(id);
        if (found == image_of.end()) {
            ImageRecord image;
            image.id = id;
            image.width = static_cast<int>(to_number(cell("width"), lineno, "width"));
            image.height = static_cast<int>(to_number(cell("height"), lineno, "height"));
            for (std::size_t i = 0; i < header.size(); ++i) {
                const auto& col = header[i];
                if (col == "id" || col == "width" || col == "height" || col == "x" || col == "y" ||
                    col == "w" || col == "h")
                    continue;
                if (!cells[i].empty()) image.meta[col] = cells[i];
            }
            found = image_of.emplace(id, images.size()).first;
            images.push_back(std::move(image));
        }
        ImageRecord* const record = &images[found->second];
        if (cell("x").empty() && cell("y").empty()) continue;
        const double x = to_number(cell("x"), lineno, "x");
        const double y = to_number(cell("y"), lineno, "y");
        if (cell("w").empty() && cell("h").empty()) {
            const double side = options.point_box_side;
            record->boxes.push_back({x - 0.5 * side, y - 0.5 * side, side, side, true});
            ++result.synthetic_boxes;
        } else {
            record->boxes.push_back(
                {x, y, to_number(cell("w"), lineno, "w"), to_number(cell("h"), lineno, "h"), false});
        }
    }
    if (header.empty()) throw ParseError("empty csv file (no header)", 0);
    return result;
}

}  // namespace

std::size_t clamp_to_image(ImageRecord& image) {
    std::size_t changed = 0;
    const double W = image.width;
    const double H = image.height;
    for (auto& b : image.boxes) {
        if (!(b.w > 0 && b.h > 0) || !std::isfinite(b.x) || !std::isfinite(b.y)) continue;
        const BoxAnnotation before = b;
        if (b.x < 0) { b.w += b.x; b.x = 0; }
        if (b.y < 0) { b.h += b.y; b.y = 0; }
        if (b.x + b.w > W) b.w = W - b.x;
        if (b.y + b.h > H) b.h = H - b.y;
        if (!(b == before)) ++changed;
    }
    return changed;
}

std::vector<Violation> find_violations(const DatasetBundle& bundle) {
    std::vector<Violation> out;
    if (bundle.images.empty()) out.push_back({"", "bundle must contain at least one image"});
    std::unordered_set<std::string> seen;
    for (const auto& image : bundle.images) {
        if (!seen.insert(image.id).second) out.push_back({image.id, "duplicate image id"});
        if (image.width <= 0) out.push_back({image.id, "width must be > 0"});
        if (image.height <= 0) out.push_back({image.id, "height must be > 0"});
        for (std::size_t i = 0; i < image.boxes.size(); ++i) {
            const auto& b = image.boxes[i];
            if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) ||
                !std::isfinite(b.h)) {
                out.push_back({image.id, box_tag(i) + ": non-finite coordinate"});
                continue;
            }
            if (!(b.w > 0)) out.push_back({image.id, box_tag(i) + ": w must be > 0"});
            if (!(b.h > 0)) out.push_back({image.id, box_tag(i) + ": h must be > 0"});
            if (b.w > 0 && b.h > 0 &&
                (b.x < 0 || b.y < 0 || b.x + b.w > image.width || b.y + b.h > image.height)) {
                out.push_back({image.id, box_tag(i) + ": box lies outside the image"});
            }
        }
    }
    return out;
}

void validate(const DatasetBundle& bundle) {
    auto violations = find_violations(bundle);
    if (!violations.empty()) throw ValidationError(std::move(violations));
}

Ingested ingest_dataset(std::istream& in, DatasetFormat format, const std::string& name,
                        const ParseOptions& options) {
    Ingested result = format == DatasetFormat::NativeJson ? parse_native(in, name)
                                                           : parse_csv(in, name, options);
    for (auto& image : result.bundle.images) {
        if (image.width <= 0 || image.height <= 0) continue;
        const std::size_t n = clamp_to_image(image);
        if (n > 0) spdlog::warn("image {}: clamped {} box(es) to the image border", image.id, n);
        result.clamped_boxes += n;
    }
    validate(result.bundle);
    return result;
}

Ingested ingest_dataset(const std::filesystem::path& path, DatasetFormat format,
                        const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    return ingest_dataset(in, format, path.stem().string(), options);
}

DatasetBundle parse_dataset(const std::filesystem::path& path, DatasetFormat format,
                            const ParseOptions& options) {
    return ingest_dataset(path, format, options).bundle;
}

void write_dataset(std::ostream& out, const DatasetBundle& bundle) {
    out << json{{"schema", "scaleforge.dataset"},
                {"schema_version", kDatasetSchemaVersion},
                {"name", bundle.name}}
               .dump()
        << '\n';
    for (const auto& image : bundle.images) {
        json boxes = json::array();
        for (const auto& b : image.boxes) boxes.push_back(box_to_json(b));
        json record{{"id", image.id},
                    {"width", image.width},
                    {"height", image.height},
                    {"boxes", std::move(boxes)},
                    {"meta", image.meta}};
        out << record.dump() << '\n';
    }
}

void write_dataset(const std::filesystem::path& path, const DatasetBundle& bundle) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_dataset(out, bundle);
}

PredictionSet parse_predictions(std::istream& in) {
    PredictionSet out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            auto& points = out[j.at("id").get<std::string>()];
            for (const auto& p : j.at("points")) {
                points.push_back(
                    {p.at("x").get<double>(), p.at("y").get<double>(), p.at("conf").get<double>()});
            }
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what(), lineno);
        }
    }
    return out;
}

PredictionSet parse_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    return parse_predictions(in);
}

void write_predictions(std::ostream& out, const PredictionSet& predictions) {
    for (const auto& [id, points] : predictions) {
        json arr = json::array();
        for (const auto& p : points) arr.push_back({{"x", p.x}, {"y", p.y}, {"conf", p.confidence}});
        out << json{{"id", id}, {"points", std::move(arr)}}.dump() << '\n';
    }
}

void validate_predictions(const PredictionSet& predictions, const std::set<std::string>& known_ids) {
    std::vector<Violation> out;
    for (const auto& [id, points] : predictions) {
        if (!known_ids.contains(id)) out.push_back({id, "prediction references unknown image id"});
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double c = points[i].confidence;
            if (!(c >= 0.0 && c <= 1.0)) {
                out.push_back({id, "point[" + std::to_string(i) + "]: confidence outside [0,1]"});
            }
        }
    }
    if (!out.empty()) throw ValidationError(std::move(out));
}

}  // namespace scaleforge
