// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tensor archive container used by checkpoints and extractor weight files:
//   magic | u64 payload size | payload | u64 fnv1a(payload)
// Payload: u32 meta length + bytes, u32 entry count, then per entry
// u32 name length + bytes, 4x i64 dims, raw little-endian f32 data.

#include <cstring>
#include <fstream>

#include "rst/serialize.hpp"

namespace rst {

namespace {

constexpr char kMagic[8] = {'R', 'S', 'T', 'A', 'R', '0', '1', '\n'};

void put_u32(std::string& buf, std::uint32_t v) { buf.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& buf, std::uint64_t v) { buf.append(reinterpret_cast<const char*>(&v), 8); }
void put_i64(std::string& buf, std::int64_t v) { buf.append(reinterpret_cast<const char*>(&v), 8); }

class Reader {
public:
    Reader(const std::string& data, const std::string& context)
        : data_(data), context_(context) {}

    std::uint32_t u32() { return read<std::uint32_t>(); }
    std::uint64_t u64() { return read<std::uint64_t>(); }
    std::int64_t i64() { return read<std::int64_t>(); }

    std::string bytes(std::size_t n) {
        check(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void floats(float* dst, std::size_t count) {
        check(count * 4);
        std::memcpy(dst, data_.data() + pos_, count * 4);
        pos_ += count * 4;
    }

    bool exhausted() const { return pos_ == data_.size(); }

private:
    template <typename T>
    T read() {
        check(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void check(std::size_t n) const {
        if (pos_ + n > data_.size())
            throw CorruptCheckpoint("truncated archive payload: " + context_);
    }
    const std::string& data_;
    std::string context_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_tensor_archive(const std::filesystem::path& path, const std::string& meta_json,
                          const std::vector<ArchiveEntry>& entries) {
    std::string payload;
    put_u32(payload, static_cast<std::uint32_t>(meta_json.size()));
    payload += meta_json;
    put_u32(payload, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        put_u32(payload, static_cast<std::uint32_t>(e.name.size()));
        payload += e.name;
        put_i64(payload, e.tensor.shape.b);
        put_i64(payload, e.tensor.shape.c);
        put_i64(payload, e.tensor.shape.h);
        put_i64(payload, e.tensor.shape.w);
        payload.append(reinterpret_cast<const char*>(e.tensor.data.data()),
                       static_cast<std::size_t>(e.tensor.size()) * 4);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open checkpoint for writing: " + path.string());
    f.write(kMagic, 8);
    std::string header;
    put_u64(header, payload.size());
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    std::string tail;
    put_u64(tail, fnv1a(payload.data(), payload.size()));
    f.write(tail.data(), static_cast<std::streamsize>(tail.size()));
    if (!f) throw IoError("short write: " + path.string());
}

TensorArchive read_tensor_archive(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw NotFound("no such checkpoint: " + path.string());
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());

    char magic[8];
    if (!f.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw CorruptCheckpoint("bad archive magic: " + path.string());
    std::uint64_t payload_size = 0;
    if (!f.read(reinterpret_cast<char*>(&payload_size), 8))
        throw CorruptCheckpoint("truncated archive header: " + path.string());

    std::string payload(payload_size, '\0');
    if (!f.read(payload.data(), static_cast<std::streamsize>(payload_size)))
        throw CorruptCheckpoint("truncated archive: " + path.string());
    std::uint64_t stored_sum = 0;
    if (!f.read(reinterpret_cast<char*>(&stored_sum), 8))
        throw CorruptCheckpoint("truncated archive checksum: " + path.string());
    if (stored_sum != fnv1a(payload.data(), payload.size()))
        throw CorruptCheckpoint("archive checksum mismatch: " + path.string());

    Reader r(payload, path.string());
    TensorArchive out;
    out.meta_json = r.bytes(r.u32());
    const std::uint32_t n = r.u32();
    out.entries.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        ArchiveEntry e;
        e.name = r.bytes(r.u32());
        Shape s{r.i64(), r.i64(), r.i64(), r.i64()};
        if (s.b < 0 || s.c < 0 || s.h < 0 || s.w < 0 || s.count() < 0)
            throw CorruptCheckpoint("bad tensor shape in archive: " + path.string());
        e.tensor = Tensor<float>(s);
        r.floats(e.tensor.data.data(), static_cast<std::size_t>(e.tensor.size()));
        out.entries.push_back(std::move(e));
    }
    if (!r.exhausted()) throw CorruptCheckpoint("trailing bytes in archive: " + path.string());
    return out;
}

}  // namespace rst
