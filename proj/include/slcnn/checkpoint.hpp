#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "slcnn/model.hpp"
#include "slcnn/tensor.hpp"

namespace slcnn {

// SLCNNCK1 container: 8-byte magic, u32 little-endian header byte length,
// UTF-8 text header (key=value lines, then one "tensor\t<name>\t<d0>\t<d1>
// \t<d2>\t<offset>" line per tensor), then raw little-endian float32 data
// in header order. Offsets are byte offsets from the start of the data
// section. DCNN and classifier checkpoints share the container and differ
// in the "kind" key and spec block.

inline constexpr char kCheckpointMagic[9] = "SLCNNCK1";
inline constexpr int kCheckpointVersion = 1;

struct ContainerEntry {
    std::string name;
    long d0 = 0, d1 = 0, d2 = 0;
    uint64_t offset = 0;
    long size() const { return d0 * d1 * d2; }
};

struct Container {
    std::vector<std::pair<std::string, std::string>> kv;
    std::vector<ContainerEntry> entries;
    std::vector<float> data;

    bool has(const std::string& key) const;
    std::string get(const std::string& key) const;
    long get_long(const std::string& key) const;
    const ContainerEntry* find_entry(const std::string& name) const;
    Tensor<float> tensor(const std::string& name) const;
};

void save_container(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& kv,
                    const std::vector<std::pair<std::string, const Tensor<float>*>>& tensors);

Container load_container(const std::filesystem::path& path);

// DCNN checkpoints.
void save_checkpoint(Model<float>& model, const std::filesystem::path& path, long sample_rate);

struct LoadedModel {
    Model<float> model;
    long sample_rate = 0;
};
LoadedModel load_checkpoint(const std::filesystem::path& path);

} // namespace slcnn
