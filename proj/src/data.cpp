#include "acmloc/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace acmloc {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

namespace {

constexpr char kFeatureMagic[4] = {'A', 'C', 'M', 'F'};

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

template <class T>
T field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw ParseError("annotations: missing field '" + std::string(key) + "' at " + where);
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError("annotations: bad field '" + std::string(key) + "' at " + where + ": " + e.what());
    }
}

}  // namespace

void SnippetFeatureSequence::validate() const {
    if (features.rows() < 1) throw ValidationError("features for '" + video_id + "' have no snippets");
    if (features.cols() < 1) throw ValidationError("features for '" + video_id + "' have no channels");
    if (!features.allFinite()) throw ValidationError("features for '" + video_id + "' contain non-finite values");
}

void VideoRecord::validate() const {
    if (!(duration_s > 0)) throw ValidationError("video '" + video_id + "': duration must be > 0");
    label.validate(false);
    for (const auto& inst : instances) {
        if (!(inst.end_s > inst.start_s)) throw ValidationError("video '" + video_id + "': instance with end <= start");
        if (inst.start_s < 0 || inst.end_s > duration_s + 1e-9)
            throw ValidationError("video '" + video_id + "': instance outside [0, duration]");
        if (inst.class_id < 0 || inst.class_id >= label.num_classes)
            throw ValidationError("video '" + video_id + "': instance class out of range");
    }
}

int Annotations::class_id(const std::string& name) const {
    auto it = std::find(class_names.begin(), class_names.end(), name);
    if (it == class_names.end()) throw ValidationError("unknown class name '" + name + "'");
    return static_cast<int>(it - class_names.begin());
}

std::optional<std::size_t> Dataset::find(const std::string& video_id) const {
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].video_id == video_id) return i;
    return std::nullopt;
}

Dataset Dataset::subset(const std::string& name) const {
    Dataset out;
    out.class_names = class_names;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].subset == name) {
            out.records.push_back(records[i]);
            out.features.push_back(features[i]);
        }
    }
    return out;
}

void write_features(const fs::path& path, const MatF& features) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot open '" + path.string() + "' for writing");
    out.write(kFeatureMagic, 4);
    put_u32(out, kFeatureFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(features.rows()));
    put_u32(out, static_cast<std::uint32_t>(features.cols()));
    out.write(reinterpret_cast<const char*>(features.data()),
              static_cast<std::streamsize>(features.size() * sizeof(float)));
    if (!out) throw LoadError("write failed for '" + path.string() + "'");
}

MatF read_features(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open feature file '" + path.string() + "'");
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0) throw LoadError("'" + path.string() + "' is not an ACMF file");
    const auto version = get_u32(in);
    if (version != kFeatureFormatVersion)
        throw LoadError("'" + path.string() + "': unsupported version " + std::to_string(version));
    const auto rows = get_u32(in);
    const auto cols = get_u32(in);
    if (!in || rows == 0 || cols == 0) throw LoadError("'" + path.string() + "': bad header");
    MatF m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
    if (!in) throw LoadError("'" + path.string() + "': truncated payload");
    return m;
}

fs::path feature_path(const fs::path& feature_dir, const std::string& video_id) {
    return feature_dir / (video_id + ".acmf");
}

Annotations annotations_from_json(const json& doc) {
    Annotations ann;
    ann.class_names = field<std::vector<std::string>>(doc, "classes", "<root>");
    if (ann.class_names.empty()) throw ParseError("annotations: empty class list");
    std::map<std::string, int> ids;
    for (std::size_t i = 0; i < ann.class_names.size(); ++i) {
        if (!ids.emplace(ann.class_names[i], static_cast<int>(i)).second)
            throw ParseError("annotations: duplicate class name '" + ann.class_names[i] + "'");
    }
    auto lookup = [&](const std::string& name, const std::string& where) {
        auto it = ids.find(name);
        if (it == ids.end()) throw ParseError("annotations: unknown class '" + name + "' at " + where);
        return it->second;
    };

    if (!doc.contains("videos") || !doc.at("videos").is_object()) throw ParseError("annotations: missing 'videos' object");
    for (const auto& [vid, entry] : doc.at("videos").items()) {
        const std::string where = "videos." + vid;
        VideoRecord rec;
        rec.video_id = vid;
        rec.duration_s = field<double>(entry, "duration_s", where);
        rec.fps = entry.contains("fps") ? field<double>(entry, "fps", where) : 25.0;
        rec.snippet_frames = entry.contains("snippet_frames") ? field<int>(entry, "snippet_frames", where) : 16;
        rec.subset = entry.contains("subset") ? field<std::string>(entry, "subset", where) : "";

        std::vector<int> label_ids;
        if (entry.contains("labels")) {
            for (const auto& name : field<std::vector<std::string>>(entry, "labels", where))
                label_ids.push_back(lookup(name, where + ".labels"));
        }
        if (entry.contains("instances")) {
            const auto& list = entry.at("instances");
            if (!list.is_array()) throw ParseError("annotations: 'instances' must be an array at " + where);
            for (std::size_t i = 0; i < list.size(); ++i) {
                const auto& item = list[i];
                const std::string iw = where + ".instances[" + std::to_string(i) + "]";
                if (!item.is_array() || item.size() != 3 || !item[0].is_number() || !item[1].is_number() ||
                    !item[2].is_string())
                    throw ParseError("annotations: expected [start_s, end_s, class] at " + iw);
                ActionInstance inst{item[0].get<double>(), item[1].get<double>(),
                                    lookup(item[2].get<std::string>(), iw)};
                rec.instances.push_back(inst);
            }
            if (!entry.contains("labels"))
                for (const auto& inst : rec.instances) label_ids.push_back(inst.class_id);
        }
        rec.label = make_label(std::move(label_ids), ann.num_classes());
        try {
            rec.validate();
        } catch (const ValidationError& e) {
            throw ParseError(std::string("annotations: ") + e.what());
        }
        ann.videos.push_back(std::move(rec));
    }
    return ann;
}

json annotations_to_json(const Annotations& ann) {
    json videos = json::object();
    for (const auto& rec : ann.videos) {
        json labels = json::array();
        for (int c : rec.label.class_ids) labels.push_back(ann.class_names.at(c));
        json instances = json::array();
        for (const auto& inst : rec.instances)
            instances.push_back(json::array({inst.start_s, inst.end_s, ann.class_names.at(inst.class_id)}));
        json entry = {{"duration_s", rec.duration_s},
                      {"fps", rec.fps},
                      {"snippet_frames", rec.snippet_frames},
                      {"labels", labels},
                      {"instances", instances}};
        if (!rec.subset.empty()) entry["subset"] = rec.subset;
        videos[rec.video_id] = entry;
    }
    return {{"classes", ann.class_names}, {"videos", videos}};
}

Annotations read_annotations(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open annotation file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("annotation file '" + path.string() + "': " + e.what());
    }
    return annotations_from_json(doc);
}

void write_annotations(const fs::path& path, const Annotations& ann) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot open '" + path.string() + "' for writing");
    out << annotations_to_json(ann).dump(2) << '\n';
}

Dataset load_dataset(const fs::path& feature_dir, const fs::path& annotation_file, int expected_dim,
                     const std::string& subset) {
    const Annotations ann = read_annotations(annotation_file);
    Dataset ds;
    ds.class_names = ann.class_names;
    int dim = expected_dim;
    for (const auto& rec : ann.videos) {
        if (!subset.empty() && rec.subset != subset) continue;
        const auto path = feature_path(feature_dir, rec.video_id);
        if (!fs::exists(path)) throw LoadError("missing feature file for video '" + rec.video_id + "': " + path.string());
        SnippetFeatureSequence seq{rec.video_id, read_features(path)};
        seq.validate();
        if (dim == 0) dim = seq.feature_dim();
        if (seq.feature_dim() != dim) {
            std::ostringstream msg;
            msg << "feature dimension mismatch for video '" << rec.video_id << "': file has " << seq.feature_dim()
                << ", expected " << dim;
            throw LoadError(msg.str());
        }
        ds.features.push_back(std::move(seq));
        ds.records.push_back(rec);
    }
    return ds;
}

MatF resample_to_T(const MatF& features, int T, ResampleMode mode) {
    const auto L = static_cast<int>(features.rows());
    if (L < 1 || T < 1) throw ValidationError("resample_to_T: need L >= 1 and T >= 1");
    if (L == T) return features;
    MatF out(T, features.cols());
    for (int j = 0; j < T; ++j) {
        const double pos = T == 1 ? (L - 1) / 2.0 : static_cast<double>(j) * (L - 1) / (T - 1);
        if (mode == ResampleMode::nearest) {
            const int i = std::min(L - 1, static_cast<int>(std::floor(pos + 0.5)));
            out.row(j) = features.row(i);
            continue;
        }
        const int i0 = std::min(L - 1, static_cast<int>(std::floor(pos)));
        const int i1 = std::min(L - 1, i0 + 1);
        const double frac = pos - i0;
        if (frac == 0.0 || i0 == i1) {
            out.row(j) = features.row(i0);
            continue;
        }
        for (Eigen::Index c = 0; c < features.cols(); ++c) {
            const double a = features(i0, c);
            const double b = features(i1, c);
            const double v = std::clamp(a + frac * (b - a), std::min(a, b), std::max(a, b));
            out(j, c) = static_cast<float>(v);
        }
    }
    return out;
}

Segment TimeMap::to_seconds(int start_idx, int end_idx) const {
    if (start_idx < 0 || end_idx > T || end_idx <= start_idx) throw ValidationError("TimeMap: bad snippet range");
    const double L = native_length;
    double lo = 0.0;
    double hi = 0.0;
    if (native_length == 1) {
        lo = static_cast<double>(start_idx) / T;
        hi = static_cast<double>(end_idx) / T;
    } else {
        // Resampled snippet j sits at native position j*step; native snippet i
        // spans [i, i+1), so its center is i + 0.5.
        const double step = T == 1 ? L : (L - 1) / (T - 1);
        const double c0 = (T == 1 ? (L - 1) / 2.0 : start_idx * step) + 0.5;
        const double c1 = (T == 1 ? (L - 1) / 2.0 : (end_idx - 1) * step) + 0.5;
        lo = c0 - step / 2.0;
        hi = c1 + step / 2.0;
    }
    lo = std::clamp(lo, 0.0, L) * snippet_seconds;
    hi = std::clamp(hi, 0.0, L) * snippet_seconds;
    return {std::clamp(lo, 0.0, duration_s), std::clamp(hi, 0.0, duration_s)};
}

TimeMap time_map_for(const VideoRecord& record, int native_length, int T) {
    return TimeMap{T, native_length, record.snippet_seconds(), record.duration_s};
}

}  // namespace acmloc
