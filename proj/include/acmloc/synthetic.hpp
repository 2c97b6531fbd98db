#pragma once
// Desk-scale synthetic benchmark with exact ground truth.
//
// Each video is a sequence of snippet features. Instance snippets sit at
// separation * u_c (u_c a unit class direction), their context flanks at
// separation / 2 * u_c, background at the origin; every entry receives
// independent Gaussian noise of the given scale. The first class of video i
// is i mod C (counted within its split), so classes are balanced.

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "acmloc/data.hpp"

namespace acmloc {

struct SyntheticSpec {
    int num_videos = 80;
    int num_test_videos = 20;  // the last ones are tagged "test"
    int num_classes = 5;
    int half_dim = 32;  // D; features carry 2D channels
    int min_length = 80;
    int max_length = 100;
    int min_instances = 1;
    int max_instances = 2;
    int min_instance_length = 12;
    int max_instance_length = 20;
    int min_context = 4;
    int max_context = 8;
    int max_classes_per_video = 1;
    double separation = 2.0;
    double noise = 0.5;
    double fps = 25.0;
    int snippet_frames = 16;
    std::uint64_t seed = 0;

    void validate() const;
};

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);

struct SyntheticDataset {
    Annotations annotations;
    Dataset dataset;
    MatF class_directions;  // C x 2D, unit rows
    // Per video, per native snippet: 0 background, 1 context, 2 instance.
    std::vector<std::vector<int>> snippet_roles;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// Writes <out>/annotations.json and <out>/features/<id>.acmf.
void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& out_dir);

}  // namespace acmloc
