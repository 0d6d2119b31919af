#include "fedlad/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace fedlad {

namespace {

constexpr char kMagic[4] = {'F', 'L', 'A', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

std::uint32_t kind_code(ModelKind kind) {
    return kind == ModelKind::kLogisticCounts ? 0u : 1u;
}

ModelKind kind_from_code(std::uint32_t code) {
    if (code == 0) return ModelKind::kLogisticCounts;
    if (code == 1) return ModelKind::kSeqMlp;
    throw std::runtime_error("checkpoint: unknown model kind code " + std::to_string(code));
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelSpec& spec, const ParamVector& params) {
    if (params.size() != spec.param_count()) {
        throw std::invalid_argument("checkpoint: parameter count does not match model spec");
    }
    std::string buf;
    buf.reserve(32 + params.size() * 8);
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    put_u32(buf, kind_code(spec.kind));
    put_u32(buf, static_cast<std::uint32_t>(spec.vocab_size));
    put_u32(buf, static_cast<std::uint32_t>(spec.hidden_dim));
    put_u32(buf, static_cast<std::uint32_t>(spec.window_size));
    put_u64(buf, static_cast<std::uint64_t>(params.size()));
    for (double d : params) put_u64(buf, std::bit_cast<std::uint64_t>(d));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.close();
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);

    nlohmann::ordered_json twin;
    twin["model"] = model_kind_name(spec.kind);
    twin["vocab_size"] = spec.vocab_size;
    twin["hidden_dim"] = spec.hidden_dim;
    twin["window_size"] = spec.window_size;
    twin["param_count"] = params.size();
    twin["params"] = params;
    std::filesystem::path twin_path(path);
    twin_path.replace_extension(".json");
    std::ofstream jout(twin_path, std::ios::trunc);
    if (!jout) throw std::runtime_error("checkpoint: cannot open " + twin_path.string() + " for writing");
    jout << twin.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 32) throw std::runtime_error("checkpoint: file truncated: " + path);
    if (std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    const std::uint32_t version = get_u32(buf.data() + 4);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.spec.kind = kind_from_code(get_u32(buf.data() + 8));
    ckpt.spec.vocab_size = static_cast<int>(get_u32(buf.data() + 12));
    ckpt.spec.hidden_dim = static_cast<int>(get_u32(buf.data() + 16));
    ckpt.spec.window_size = static_cast<int>(get_u32(buf.data() + 20));
    const std::uint64_t count = get_u64(buf.data() + 24);
    if (buf.size() != 32 + count * 8) {
        throw std::runtime_error("checkpoint: size mismatch in " + path);
    }
    if (count != ckpt.spec.param_count()) {
        throw std::runtime_error("checkpoint: parameter count does not match model header in " + path);
    }
    ckpt.params.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        ckpt.params[i] = std::bit_cast<double>(get_u64(buf.data() + 32 + i * 8));
    }
    return ckpt;
}

}  // namespace fedlad
