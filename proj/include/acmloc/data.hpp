#pragma once
// Precomputed snippet features, annotations, and resampling to a fixed T.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "acmloc/core.hpp"
#include "acmloc/tensor.hpp"

namespace acmloc {

// L x 2D matrix: the first D columns come from the RGB stream, the last D from
// the flow stream.
struct SnippetFeatureSequence {
    std::string video_id;
    MatF features;

    int native_length() const { return static_cast<int>(features.rows()); }
    int feature_dim() const { return static_cast<int>(features.cols()); }
    void validate() const;
};

struct VideoRecord {
    std::string video_id;
    double duration_s = 0.0;
    double fps = 25.0;
    int snippet_frames = 16;
    std::string subset;  // "train", "test", or empty
    VideoLabel label;
    std::vector<ActionInstance> instances;

    double snippet_seconds() const { return acmloc::snippet_seconds(fps, snippet_frames); }
    void validate() const;
};

struct Annotations {
    std::vector<std::string> class_names;
    std::vector<VideoRecord> videos;  // ordered by video id

    int num_classes() const { return static_cast<int>(class_names.size()); }
    int class_id(const std::string& name) const;
};

struct Dataset {
    std::vector<std::string> class_names;
    std::vector<SnippetFeatureSequence> features;
    std::vector<VideoRecord> records;

    std::size_t size() const { return records.size(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }
    int feature_dim() const { return features.empty() ? 0 : features.front().feature_dim(); }
    // Index of the video or nullopt.
    std::optional<std::size_t> find(const std::string& video_id) const;
    Dataset subset(const std::string& name) const;
};

// Binary feature file: "ACMF", u32 version=1, u32 L, u32 twoD, then L*twoD
// little-endian float32 row-major.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

void write_features(const std::filesystem::path& path, const MatF& features);
MatF read_features(const std::filesystem::path& path);
std::filesystem::path feature_path(const std::filesystem::path& feature_dir, const std::string& video_id);

Annotations annotations_from_json(const nlohmann::json& doc);
nlohmann::json annotations_to_json(const Annotations& ann);
Annotations read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const Annotations& ann);

// Loads every annotated video (optionally only one subset). expected_dim = 0
// accepts whatever dimension the first file carries.
Dataset load_dataset(const std::filesystem::path& feature_dir, const std::filesystem::path& annotation_file,
                     int expected_dim = 0, const std::string& subset = "");

enum class ResampleMode { linear, nearest };

// Samples T uniformly spaced points over [0, L-1] of every column.
MatF resample_to_T(const MatF& features, int T, ResampleMode mode = ResampleMode::linear);

// Maps a snippet range [start_idx, end_idx) on the resampled grid back to
// seconds of the original video.
struct TimeMap {
    int T = 1;
    int native_length = 1;
    double snippet_seconds = 0.64;
    double duration_s = 0.0;

    Segment to_seconds(int start_idx, int end_idx) const;
};

TimeMap time_map_for(const VideoRecord& record, int native_length, int T);

}  // namespace acmloc
