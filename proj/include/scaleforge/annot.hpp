#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "scaleforge/error.hpp"

namespace scaleforge {

/// Axis-aligned head box in image pixels. (x, y) is the top-left corner.
struct BoxAnnotation {
    double x = 0;
    double y = 0;
    double w = 0;
    double h = 0;
    /// Pseudo-box built around a point-only label; excluded from scale statistics.
    bool synthetic = false;

    double center_x() const noexcept { return x + 0.5 * w; }
    double center_y() const noexcept { return y + 0.5 * h; }

    bool operator==(const BoxAnnotation&) const = default;
};

/// Object scale: pixel count occupied by the head box.
inline double scale_of(const BoxAnnotation& box) noexcept { return box.w * box.h; }

/// Box diagonal, the localization matching radius.
inline double diagonal_of(const BoxAnnotation& box) noexcept { return std::hypot(box.w, box.h); }

struct ImageRecord {
    std::string id;
    int width = 0;
    int height = 0;
    std::vector<BoxAnnotation> boxes;
    std::map<std::string, std::string> meta;

    bool operator==(const ImageRecord&) const = default;
};

struct DatasetBundle {
    std::string name;
    std::vector<ImageRecord> images;

    bool operator==(const DatasetBundle&) const = default;
};

struct PredictedPoint {
    double x = 0;
    double y = 0;
    double confidence = 0;

    bool operator==(const PredictedPoint&) const = default;
};

/// Image id -> predicted head points.
using PredictionSet = std::map<std::string, std::vector<PredictedPoint>>;

enum class DatasetFormat { NativeJson, CsvPointsBoxes };

struct ParseOptions {
    /// Side of the square pseudo-box given to point-only labels.
    double point_box_side = 16.0;
};

struct Ingested {
    DatasetBundle bundle;
    std::size_t clamped_boxes = 0;
    std::size_t synthetic_boxes = 0;
};

inline constexpr int kDatasetSchemaVersion = 1;

/// Parses and validates. Throws ParseError (with line) on malformed input and
/// ValidationError listing every violated invariant.
Ingested ingest_dataset(std::istream& in, DatasetFormat format, const std::string& name,
                        const ParseOptions& options = {});
Ingested ingest_dataset(const std::filesystem::path& path, DatasetFormat format,
                        const ParseOptions& options = {});

DatasetBundle parse_dataset(const std::filesystem::path& path, DatasetFormat format,
                            const ParseOptions& options = {});

void write_dataset(std::ostream& out, const DatasetBundle& bundle);
void write_dataset(const std::filesystem::path& path, const DatasetBundle& bundle);

/// Clamps boxes straddling the image border. Returns the number of boxes changed.
std::size_t clamp_to_image(ImageRecord& image);

/// Every invariant violation in the bundle, in record order.
std::vector<Violation> find_violations(const DatasetBundle& bundle);

/// Throws ValidationError when find_violations is non-empty.
void validate(const DatasetBundle& bundle);

PredictionSet parse_predictions(std::istream& in);
PredictionSet parse_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, const PredictionSet& predictions);

/// Confidence range and id membership against a set of known ids.
void validate_predictions(const PredictionSet& predictions, const std::set<std::string>& known_ids);

}  // namespace scaleforge
