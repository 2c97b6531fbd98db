#include "acmloc/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

namespace acmloc {

using nlohmann::json;

void SyntheticSpec::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("synthetic spec: " + what); };
    if (num_videos < 1) fail("num_videos must be >= 1");
    if (num_test_videos < 0 || num_test_videos > num_videos) fail("num_test_videos must lie in [0, num_videos]");
    if (num_classes < 1) fail("num_classes must be >= 1");
    if (half_dim < 1) fail("half_dim must be >= 1");
    if (min_length < 1 || max_length < min_length) fail("bad native length range");
    if (min_instances < 1 || max_instances < min_instances) fail("bad instances-per-video range");
    if (min_instance_length < 1 || max_instance_length < min_instance_length) fail("bad instance length range");
    if (min_context < 0 || max_context < min_context) fail("bad context flank range");
    if (max_classes_per_video < 1) fail("max_classes_per_video must be >= 1");
    if (!(separation > 0)) fail("separation must be > 0");
    if (!(noise >= 0)) fail("noise must be >= 0");
    if (!(fps > 0) || snippet_frames < 1) fail("fps and snippet_frames must be positive");
    const int worst = max_instances * (max_instance_length + 2 * max_context);
    if (worst > min_length) fail("instances with flanks may not fit in the shortest video");
}

SyntheticSpec synthetic_spec_from_json(const json& doc) {
    SyntheticSpec s;
    auto get = [&](const char* key, auto& dst) {
        if (doc.contains(key)) dst = doc.at(key).get<std::remove_reference_t<decltype(dst)>>();
    };
    try {
        get("num_videos", s.num_videos);
        get("num_test_videos", s.num_test_videos);
        get("num_classes", s.num_classes);
        get("half_dim", s.half_dim);
        get("min_length", s.min_length);
        get("max_length", s.max_length);
        get("min_instances", s.min_instances);
        get("max_instances", s.max_instances);
        get("min_instance_length", s.min_instance_length);
        get("max_instance_length", s.max_instance_length);
        get("min_context", s.min_context);
        get("max_context", s.max_context);
        get("max_classes_per_video", s.max_classes_per_video);
        get("separation", s.separation);
        get("noise", s.noise);
        get("fps", s.fps);
        get("snippet_frames", s.snippet_frames);
        get("seed", s.seed);
    } catch (const json::exception& e) {
        throw ParseError(std::string("synthetic spec: ") + e.what());
    }
    s.validate();
    return s;
}

json synthetic_spec_to_json(const SyntheticSpec& s) {
    return {{"num_videos", s.num_videos},
            {"num_test_videos", s.num_test_videos},
            {"num_classes", s.num_classes},
            {"half_dim", s.half_dim},
            {"min_length", s.min_length},
            {"max_length", s.max_length},
            {"min_instances", s.min_instances},
            {"max_instances", s.max_instances},
            {"min_instance_length", s.min_instance_length},
            {"max_instance_length", s.max_instance_length},
            {"min_context", s.min_context},
            {"max_context", s.max_context},
            {"max_classes_per_video", s.max_classes_per_video},
            {"separation", s.separation},
            {"noise", s.noise},
            {"fps", s.fps},
            {"snippet_frames", s.snippet_frames},
            {"seed", s.seed}};
}

namespace {

struct Block {
    int context_left;
    int length;
    int context_right;
    int class_id;
    int total() const { return context_left + length + context_right; }
};

int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int dim = 2 * spec.half_dim;

    SyntheticDataset out;
    out.class_directions.resize(spec.num_classes, dim);
    for (int c = 0; c < spec.num_classes; ++c) {
        Vec<double> u(dim);
        for (int j = 0; j < dim; ++j) u(j) = gauss(rng);
        u.normalize();
        out.class_directions.row(c) = u.cast<float>().transpose();
    }

    Annotations& ann = out.annotations;
    for (int c = 0; c < spec.num_classes; ++c) ann.class_names.push_back("action_" + std::to_string(c));
    out.dataset.class_names = ann.class_names;

    const double ss = snippet_seconds(spec.fps, spec.snippet_frames);
    for (int v = 0; v < spec.num_videos; ++v) {
        const int L = uniform(rng, spec.min_length, spec.max_length);
        const int n_inst = uniform(rng, spec.min_instances, spec.max_instances);

        std::vector<int> classes(spec.num_classes);
        for (int c = 0; c < spec.num_classes; ++c) classes[c] = c;
        std::shuffle(classes.begin(), classes.end(), rng);
        // Cycle the leading class within each split so every class is seen.
        const int n_train = spec.num_videos - spec.num_test_videos;
        const int lead = (v < n_train ? v : v - n_train) % spec.num_classes;
        std::iter_swap(classes.begin(), std::find(classes.begin(), classes.end(), lead));
        const int n_cls = uniform(rng, 1, std::min({spec.max_classes_per_video, spec.num_classes, n_inst}));
        classes.resize(n_cls);

        std::vector<Block> blocks;
        int used = 0;
        for (int i = 0; i < n_inst; ++i) {
            Block b{uniform(rng, spec.min_context, spec.max_context),
                    uniform(rng, spec.min_instance_length, spec.max_instance_length),
                    uniform(rng, spec.min_context, spec.max_context),
                    classes[i < n_cls ? i : uniform(rng, 0, n_cls - 1)]};
            blocks.push_back(b);
            used += b.total();
        }
        // validate() guarantees used <= L; spread the slack over n_inst + 1 gaps.
        const int slack = L - used;
        std::vector<int> cuts(n_inst);
        for (auto& cut : cuts) cut = uniform(rng, 0, slack);
        std::sort(cuts.begin(), cuts.end());

        VideoRecord rec;
        char id[32];
        std::snprintf(id, sizeof id, "video_%04d", v);
        rec.video_id = id;
        rec.duration_s = L * ss;
        rec.fps = spec.fps;
        rec.snippet_frames = spec.snippet_frames;
        rec.subset = v < spec.num_videos - spec.num_test_videos ? "train" : "test";

        std::vector<int> roles(L, 0);
        std::vector<int> role_class(L, -1);
        std::vector<int> label_ids;
        int cursor = 0;
        int prev_cut = 0;
        for (int i = 0; i < n_inst; ++i) {
            cursor += cuts[i] - prev_cut;
            prev_cut = cuts[i];
            const Block& b = blocks[i];
            for (int t = 0; t < b.total(); ++t) {
                const int idx = cursor + t;
                const bool inside = t >= b.context_left && t < b.context_left + b.length;
                roles[idx] = inside ? 2 : 1;
                role_class[idx] = b.class_id;
            }
            const int s = cursor + b.context_left;
            rec.instances.push_back({s * ss, (s + b.length) * ss, b.class_id});
            label_ids.push_back(b.class_id);
            cursor += b.total();
        }
        rec.label = make_label(std::move(label_ids), spec.num_classes);

        MatF feats(L, dim);
        for (int t = 0; t < L; ++t) {
            double scale = 0.0;
            if (roles[t] == 2) scale = spec.separation;
            if (roles[t] == 1) scale = spec.separation / 2.0;
            for (int j = 0; j < dim; ++j) {
                double x = spec.noise * gauss(rng);
                if (scale != 0.0) x += scale * static_cast<double>(out.class_directions(role_class[t], j));
                feats(t, j) = static_cast<float>(x);
            }
        }

        out.dataset.features.push_back({rec.video_id, std::move(feats)});
        out.dataset.records.push_back(rec);
        out.snippet_roles.push_back(std::move(roles));
        ann.videos.push_back(std::move(rec));
    }
    return out;
}

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "features");
    for (const auto& seq : data.dataset.features) write_features(feature_path(out_dir / "features", seq.video_id), seq.features);
    write_annotations(out_dir / "annotations.json", data.annotations);
}

}  // namespace acmloc
