#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "vcqe/nn.hpp"
#include "vcqe/tensor.hpp"
#include "vcqe/util.hpp"

namespace vcqe {

// Single-file archive: magic, JSON header (metadata + blob directory), then
// raw little-endian 32-bit float blobs in directory order. Weights, batch
// norm buffers, optimizer moments and the rng state all live here so a
// training run resumes bit-compatibly.
class Checkpoint {
public:
    static constexpr char kMagic[9] = "VCQECKP1";

    nlohmann::json meta;

    void set_blob(const std::string& name, const std::vector<int>& dims,
                  std::vector<float> data) {
        std::int64_t n = 1;
        for (int d : dims) n *= d;
        check(static_cast<std::int64_t>(data.size()) == n,
              "checkpoint: blob " + name + " size does not match dims");
        if (blobs_.find(name) == blobs_.end()) order_.push_back(name);
        blobs_[name] = {dims, std::move(data)};
    }

    template <typename T>
    void set_blob(const std::string& name, const Tensor<T>& t) {
        std::vector<float> data(static_cast<std::size_t>(t.numel()));
        for (std::int64_t i = 0; i < t.numel(); ++i) data[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
        set_blob(name, t.dims(), std::move(data));
    }

    bool has_blob(const std::string& name) const { return blobs_.count(name) > 0; }

    template <typename T>
    Tensor<T> get_blob(const std::string& name) const {
        auto it = blobs_.find(name);
        check(it != blobs_.end(), "checkpoint: missing blob " + name);
        Tensor<T> t(it->second.dims);
        for (std::int64_t i = 0; i < t.numel(); ++i)
            t[i] = static_cast<T>(it->second.data[static_cast<std::size_t>(i)]);
        return t;
    }

    std::vector<std::string> blob_names() const { return order_; }

    void save(const std::string& path) const {
        nlohmann::json header;
        header["format_version"] = 1;
        header["meta"] = meta;
        nlohmann::json dir = nlohmann::json::array();
        for (const auto& name : order_) {
            const auto& b = blobs_.at(name);
            dir.push_back({{"name", name}, {"dims", b.dims}});
        }
        header["blobs"] = dir;
        const std::string hjson = header.dump();

        std::string out;
        out.append(kMagic, 8);
        std::uint64_t hsize = hjson.size();
        char sz[8];
        for (int i = 0; i < 8; ++i) sz[i] = static_cast<char>((hsize >> (8 * i)) & 0xff);
        out.append(sz, 8);
        out.append(hjson);
        for (const auto& name : order_) {
            const auto& b = blobs_.at(name);
            static_assert(sizeof(float) == 4);
            const char* p = reinterpret_cast<const char*>(b.data.data());
            out.append(p, b.data.size() * 4);
        }
        atomic_write_file(path, out);
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        check(is.good(), "checkpoint: cannot open " + path);
        char magic[8];
        is.read(magic, 8);
        check(is.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0,
              "checkpoint: bad magic in " + path);
        char sz[8];
        is.read(sz, 8);
        check(is.gcount() == 8, "checkpoint: truncated header size");
        std::uint64_t hsize = 0;
        for (int i = 0; i < 8; ++i) hsize |= static_cast<std::uint64_t>(static_cast<unsigned char>(sz[i])) << (8 * i);
        std::string hjson(hsize, '\0');
        is.read(hjson.data(), static_cast<std::streamsize>(hsize));
        check(is.gcount() == static_cast<std::streamsize>(hsize), "checkpoint: truncated header");
        nlohmann::json header = nlohmann::json::parse(hjson);
        check(header.value("format_version", 0) == 1, "checkpoint: unsupported format version");

        Checkpoint ck;
        ck.meta = header.value("meta", nlohmann::json::object());
        for (const auto& entry : header["blobs"]) {
            const std::string name = entry["name"];
            std::vector<int> dims = entry["dims"].get<std::vector<int>>();
            std::int64_t n = 1;
            for (int d : dims) n *= d;
            std::vector<float> data(static_cast<std::size_t>(n));
            is.read(reinterpret_cast<char*>(data.data()), n * 4);
            check(is.gcount() == static_cast<std::streamsize>(n * 4),
                  "checkpoint: truncated blob " + name);
            ck.set_blob(name, dims, std::move(data));
        }
        return ck;
    }

private:
    struct Blob {
        std::vector<int> dims;
        std::vector<float> data;
    };
    std::map<std::string, Blob> blobs_;
    std::vector<std::string> order_;
};

// Stores every parameter and buffer of a network under a name prefix.
template <typename Net, typename T = float>
void checkpoint_store_net(Checkpoint& ck, const std::string& prefix, Net& net) {
    for (auto& p : net.named_parameters()) ck.set_blob(prefix + "." + p.name, p.var.value());
    for (auto& b : net.named_buffers()) ck.set_blob(prefix + "." + b.name, *b.tensor);
}

// Loads parameters and buffers in place; dims must match exactly.
template <typename Net, typename T = float>
void checkpoint_load_net(const Checkpoint& ck, const std::string& prefix, Net& net) {
    for (auto& p : net.named_parameters()) {
        Tensor<T> t = ck.get_blob<T>(prefix + "." + p.name);
        check(t.same_dims(p.var.value()), "checkpoint: dims mismatch for " + prefix + "." + p.name +
                                              " (stored " + t.dims_str() + ", model " +
                                              p.var.value().dims_str() + ")");
        p.var.mutable_value() = std::move(t);
    }
    for (auto& b : net.named_buffers()) {
        Tensor<T> t = ck.get_blob<T>(prefix + "." + b.name);
        check(t.same_dims(*b.tensor), "checkpoint: dims mismatch for buffer " + prefix + "." + b.name);
        *b.tensor = std::move(t);
    }
}

}  // namespace vcqe
