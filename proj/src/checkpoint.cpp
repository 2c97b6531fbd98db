#include "acmloc/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "acmloc/core.hpp"

namespace acmloc {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'A', 'C', 'M', 'C'};

json arch_to_json(const ArchConfig& a) {
    return {{"embed_kernel", a.embed_kernel},
            {"hidden_kernel", a.hidden_kernel},
            {"hidden_width", a.hidden_width},
            {"dropout", a.dropout},
            {"padding", a.padding == Padding::zero ? "zero" : "circular"}};
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig a;
    a.embed_kernel = j.at("embed_kernel").get<int>();
    a.hidden_kernel = j.at("hidden_kernel").get<int>();
    a.hidden_width = j.at("hidden_width").get<int>();
    a.dropout = j.at("dropout").get<double>();
    a.padding = j.at("padding").get<std::string>() == "circular" ? Padding::circular : Padding::zero;
    return a;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto& net = ckpt.network;
    json tensors = json::array();
    const auto params = net.params().tensors();
    for (std::size_t i = 0; i < params.size(); ++i)
        tensors.push_back({{"name", NetworkParams<float>::names[i]}, {"rows", params[i]->rows()}, {"cols", params[i]->cols()}});
    const json header = {{"feature_dim", net.feature_dim()},
                         {"num_classes", net.num_classes()},
                         {"arch", arch_to_json(net.arch())},
                         {"step", ckpt.step},
                         {"tensors", tensors},
                         {"config", ckpt.config}};
    const std::string text = header.dump();

    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw LoadError("cannot open '" + tmp + "' for writing");
        out.write(kMagic, 4);
        const std::uint32_t version = kCheckpointVersion;
        const auto len = static_cast<std::uint32_t>(text.size());
        out.write(reinterpret_cast<const char*>(&version), 4);
        out.write(reinterpret_cast<const char*>(&len), 4);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto* t : params)
            out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(float)));
        if (!out) throw LoadError("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw LoadError("'" + path.string() + "' is not a checkpoint");
    std::uint32_t version = 0, len = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&len), 4);
    if (!in || version != kCheckpointVersion)
        throw LoadError("'" + path.string() + "': unsupported checkpoint version " + std::to_string(version));
    std::string text(len, '\0');
    in.read(text.data(), len);
    if (!in) throw LoadError("'" + path.string() + "': truncated header");

    try {
        const json header = json::parse(text);
        const int dim = header.at("feature_dim").get<int>();
        const int classes = header.at("num_classes").get<int>();
        const ArchConfig arch = arch_from_json(header.at("arch"));
        NetworkParams<float> params;
        const auto slots = params.tensors();
        const auto& tensors = header.at("tensors");
        if (tensors.size() != slots.size()) throw LoadError("'" + path.string() + "': wrong tensor count");
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (tensors[i].at("name").get<std::string>() != NetworkParams<float>::names[i])
                throw LoadError("'" + path.string() + "': unexpected tensor order");
            slots[i]->resize(tensors[i].at("rows").get<Eigen::Index>(), tensors[i].at("cols").get<Eigen::Index>());
            in.read(reinterpret_cast<char*>(slots[i]->data()),
                    static_cast<std::streamsize>(slots[i]->size() * sizeof(float)));
            if (!in) throw LoadError("'" + path.string() + "': truncated tensor data");
        }
        if (in.peek() != std::ifstream::traits_type::eof()) throw LoadError("'" + path.string() + "': trailing bytes");
        Checkpoint ckpt{Network<float>(dim, classes, arch, std::move(params)), header.at("step").get<std::int64_t>(),
                        header.value("config", json())};
        return ckpt;
    } catch (const json::exception& e) {
        throw LoadError("'" + path.string() + "': bad header: " + e.what());
    } catch (const ValidationError& e) {
        throw LoadError("'" + path.string() + "': " + e.what());
    }
}

}  // namespace acmloc
