#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gridflow/errors.hpp"

namespace gridflow {

// Little-endian primitives shared by the GFMV / GFMK / GFCK containers.
// Encoding is explicit byte arithmetic, so files are identical on any host.

class BinaryWriter {
public:
    explicit BinaryWriter(const std::filesystem::path& path);
    ~BinaryWriter();

    void u8(uint8_t v);
    void u16(uint16_t v);
    void u32(uint32_t v);
    void i32(int32_t v);
    void f32(float v);
    void bytes(const void* data, size_t size);
    void magic(const char tag[4]);

    void close();

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class BinaryReader {
public:
    // Reads the whole file up front; container files are desk-scale.
    explicit BinaryReader(const std::filesystem::path& path);

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    int32_t i32();
    float f32();
    void bytes(void* dst, size_t size);
    // Throws BadMagicError when the next four bytes differ from tag.
    void expect_magic(const char tag[4], const std::string& format_name);

    size_t remaining() const { return buffer_.size() - pos_; }
    bool at_end() const { return pos_ == buffer_.size(); }

private:
    void need(size_t count);
    std::vector<uint8_t> buffer_;
    size_t pos_ = 0;
    std::string source_;
};

}  // namespace gridflow
