#include "evsr/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "evsr/common.hpp"

namespace evsr {

namespace {

constexpr char kMagic[4] = {'E', '2', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kArchName = "arch";
constexpr int kArchFields = 8;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw IoError(path + ": truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

float get_f32(std::istream& in, const std::string& path) {
    const std::uint32_t bits = get_u32(in, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor<float>& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.shape.nd));
    for (int i = 0; i < t.shape.nd; ++i) put_u32(out, static_cast<std::uint32_t>(t.shape.d[i]));
    for (float v : t.data) put_f32(out, v);
}

Tensor<float> arch_tensor(const ArchConfig& a) {
    Tensor<float> t = Tensor<float>::zeros(Shape{kArchFields});
    const int fields[kArchFields] = {a.stack_channels, a.scale,          a.filters,
                                     a.efr_filters,    a.rnet_c_blocks,  a.rnet_abd_blocks,
                                     a.mixer_filters,  a.sequence_length};
    for (int i = 0; i < kArchFields; ++i) t.data[i] = static_cast<float>(fields[i]);
    return t;
}

ArchConfig arch_from_tensor(const Tensor<float>& t, const std::string& path) {
    if (t.shape.nd != 1 || t.shape.d[0] != kArchFields)
        throw IoError(path + ": malformed architecture descriptor");
    ArchConfig a;
    int fields[kArchFields];
    for (int i = 0; i < kArchFields; ++i) fields[i] = static_cast<int>(t.data[i]);
    a.stack_channels = fields[0];
    a.scale = fields[1];
    a.filters = fields[2];
    a.efr_filters = fields[3];
    a.rnet_c_blocks = fields[4];
    a.rnet_abd_blocks = fields[5];
    a.mixer_filters = fields[6];
    a.sequence_length = fields[7];
    return a;
}

} // namespace

void save_checkpoint(const std::string& path, const ArchConfig& arch,
                     const std::vector<std::pair<std::string, Tensor<float>>>& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path + ": cannot open for writing");
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size() + 1));
    write_tensor(out, kArchName, arch_tensor(arch));
    for (const auto& [name, t] : tensors) write_tensor(out, name, t);
    if (!out) throw IoError(path + ": write failed");
}

void save_checkpoint(const std::string& path, const SRNet<float>& model) {
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
    tensors.reserve(model.params.size());
    for (const auto& [name, var] : model.params.entries()) tensors.emplace_back(name, var->value);
    save_checkpoint(path, model.arch, tensors);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path + ": bad checkpoint magic");
    const std::uint32_t version = get_u32(in, path);
    if (version != kVersion)
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = get_u32(in, path);

    Checkpoint ck;
    bool have_arch = false;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(in, path);
        if (name_len > 4096) throw IoError(path + ": implausible tensor name length");
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw IoError(path + ": truncated checkpoint");
        const std::uint32_t ndim = get_u32(in, path);
        if (ndim < 1 || ndim > 4) throw IoError(path + ": tensor rank out of range");
        Shape shape;
        shape.nd = static_cast<int>(ndim);
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            shape.d[d] = static_cast<int>(get_u32(in, path));
            if (shape.d[d] <= 0) throw IoError(path + ": non-positive tensor dimension");
            total *= static_cast<std::size_t>(shape.d[d]);
        }
        Tensor<float> t(shape);
        for (std::size_t k = 0; k < total; ++k) t.data[k] = get_f32(in, path);
        if (name == kArchName) {
            ck.arch = arch_from_tensor(t, path);
            have_arch = true;
        } else {
            ck.tensors.emplace_back(std::move(name), std::move(t));
        }
    }
    if (!have_arch) throw IoError(path + ": missing architecture descriptor");
    return ck;
}

void load_into(const Checkpoint& checkpoint, SRNet<float>& model) {
    if (!(checkpoint.arch == model.arch))
        throw Error("checkpoint architecture does not match the model");
    for (const auto& [name, var] : model.params.entries()) {
        const Tensor<float>* found = nullptr;
        for (const auto& [n, t] : checkpoint.tensors)
            if (n == name) {
                found = &t;
                break;
            }
        if (!found) throw Error("checkpoint is missing parameter: " + name);
        if (!(found->shape == var->value.shape))
            throw Error("checkpoint shape mismatch for " + name + ": " + found->shape.str() +
                        " vs " + var->value.shape.str());
        var->value = *found;
    }
}

SRNet<float> model_from_checkpoint(const Checkpoint& checkpoint) {
    SRNet<float> model(checkpoint.arch);
    load_into(checkpoint, model);
    return model;
}

} // namespace evsr
