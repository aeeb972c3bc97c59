#include "tea/checkpoint.hpp"

#include "tea/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace tea {
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'T', 'E', 'A', 'C', 'K', 'P', 'T', '1'};

json backbone_json(const BackboneConfig& b) {
  return {{"image_height", b.image_height}, {"image_width", b.image_width}, {"channels", b.channels},
          {"patch_height", b.patch_height}, {"patch_width", b.patch_width},   {"dim", b.dim},
          {"temporal_depth", b.temporal_depth}, {"spatial_depth", b.spatial_depth}, {"heads", b.heads},
          {"mlp_dim", b.mlp_dim}, {"num_classes", b.num_classes}, {"max_day_offset", b.max_day_offset}};
}

json config_json(const ModelConfig& c) {
  return {{"backbone", backbone_json(c.backbone)},
          {"prototype_slots", c.prototype_slots},
          {"slot_span", c.slot_span},
          {"use_prototypes", c.use_prototypes},
          {"recon_hidden", c.recon_hidden}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  const json& b = j.at("backbone");
  auto& bb = c.backbone;
  bb.image_height = b.at("image_height").get<int>();
  bb.image_width = b.at("image_width").get<int>();
  bb.channels = b.at("channels").get<int>();
  bb.patch_height = b.at("patch_height").get<int>();
  bb.patch_width = b.at("patch_width").get<int>();
  bb.dim = b.at("dim").get<int>();
  bb.temporal_depth = b.at("temporal_depth").get<int>();
  bb.spatial_depth = b.at("spatial_depth").get<int>();
  bb.heads = b.at("heads").get<int>();
  bb.mlp_dim = b.at("mlp_dim").get<int>();
  bb.num_classes = b.at("num_classes").get<int>();
  bb.max_day_offset = b.at("max_day_offset").get<int>();
  c.prototype_slots = j.at("prototype_slots").get<int>();
  c.slot_span = j.at("slot_span").get<int>();
  c.use_prototypes = j.at("use_prototypes").get<bool>();
  c.recon_hidden = j.at("recon_hidden").get<std::vector<int>>();
  c.validate();
  return c;
}

json tensor_list(const TeaModel<float>& model, const std::string& owner) {
  json list = json::array();
  model.visit([&](const std::string& name, const ad::Var<float>& v) {
    list.push_back({{"owner", owner}, {"name", name}, {"rows", v.rows()}, {"cols", v.cols()}});
  });
  return list;
}

void write_tensors(std::ofstream& out, const TeaModel<float>& model) {
  model.visit([&](const std::string&, const ad::Var<float>& v) {
    out.write(reinterpret_cast<const char*>(v.value().data()), static_cast<std::streamsize>(v.value().size() * sizeof(float)));
  });
}

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw ParseError(path + ": truncated checkpoint");
  return value;
}

void read_tensors(std::ifstream& in, const TeaModel<float>& model, const json& list, std::size_t& cursor,
                  const std::string& owner, const std::string& path) {
  model.visit([&](const std::string& name, const ad::Var<float>& v) {
    if (cursor >= list.size()) throw ParseError(path + ": tensor list shorter than the model");
    const json& e = list[cursor++];
    if (e.at("owner").get<std::string>() != owner || e.at("name").get<std::string>() != name ||
        e.at("rows").get<Index>() != v.rows() || e.at("cols").get<Index>() != v.cols())
      throw ParseError(path + ": tensor " + owner + "/" + name + " does not match the model schema");
    Matrix<float>& m = v.mutable_value();
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float))))
      throw ParseError(path + ": truncated tensor data at " + name);
  });
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) { return config_json(config).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const CheckpointMeta& meta, const TeaModel<float>& student,
                     const TeaModel<float>* teacher) {
  if (teacher) TeaModel<float>::check_same_schema(teacher->named_parameters(), student.named_parameters());
  json header;
  header["model"] = config_json(student.config());
  header["meta"] = {{"config_hash", meta.config_hash},
                    {"run_config", meta.run_config},
                    {"step", meta.step},
                    {"teacher_step", meta.teacher_step},
                    {"best_ldiou", meta.best_ldiou}};
  header["has_teacher"] = teacher != nullptr;
  json tensors = tensor_list(student, "student");
  if (teacher)
    for (auto& e : tensor_list(*teacher, "teacher")) tensors.push_back(e);
  header["tensors"] = tensors;
  const std::string text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(path + ": cannot write checkpoint");
    out.write(kMagic, sizeof kMagic);
    write_pod<std::uint32_t>(out, kCheckpointVersion);
    write_pod<std::uint32_t>(out, sizeof(float));
    write_pod<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_tensors(out, student);
    if (teacher) write_tensors(out, *teacher);
    if (!out) throw Error(path + ": write failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error(path + ": cannot move checkpoint into place");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open checkpoint");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw ParseError(path + ": not a checkpoint file");
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  if (read_pod<std::uint32_t>(in, path) != sizeof(float)) throw ParseError(path + ": unsupported scalar width");
  const auto header_size = read_pod<std::uint64_t>(in, path);
  std::string text(header_size, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_size))) throw ParseError(path + ": truncated header");

  try {
    const json header = json::parse(text);
    Checkpoint ck;
    ck.config = config_from(header.at("model"));
    const json& m = header.at("meta");
    ck.meta.config_hash = m.at("config_hash").get<std::string>();
    ck.meta.run_config = m.at("run_config").get<std::string>();
    ck.meta.step = m.at("step").get<long long>();
    ck.meta.teacher_step = m.at("teacher_step").get<long long>();
    ck.meta.best_ldiou = m.at("best_ldiou").get<double>();
    ck.student = TeaModel<float>(ck.config, 0);
    const json& list = header.at("tensors");
    std::size_t cursor = 0;
    read_tensors(in, ck.student, list, cursor, "student", path);
    if (header.at("has_teacher").get<bool>()) {
      ck.teacher = TeaModel<float>(ck.config, 0);
      read_tensors(in, *ck.teacher, list, cursor, "teacher", path);
    }
    if (cursor != list.size()) throw ParseError(path + ": tensor list longer than the model");
    return ck;
  } catch (const json::exception& e) {
    throw ParseError(path + ": bad checkpoint header: " + e.what());
  }
}

}  // namespace tea
