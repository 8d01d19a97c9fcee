#include "gridflow/io_binary.hpp"

#include <cstring>

namespace gridflow {

BinaryWriter::BinaryWriter(const std::filesystem::path& path) : path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open for writing: " + path.string());
}

BinaryWriter::~BinaryWriter() {
    if (out_.is_open()) out_.close();
}

void BinaryWriter::u8(uint8_t v) { bytes(&v, 1); }

void BinaryWriter::u16(uint16_t v) {
    uint8_t b[2] = {static_cast<uint8_t>(v & 0xff), static_cast<uint8_t>(v >> 8)};
    bytes(b, 2);
}

void BinaryWriter::u32(uint32_t v) {
    uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>((v >> (8 * i)) & 0xff);
    bytes(b, 4);
}

void BinaryWriter::i32(int32_t v) { u32(static_cast<uint32_t>(v)); }

void BinaryWriter::f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
}

void BinaryWriter::bytes(const void* data, size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out_) throw IoError("write failed: " + path_.string());
}

void BinaryWriter::magic(const char tag[4]) { bytes(tag, 4); }

void BinaryWriter::close() {
    out_.close();
    if (!out_) throw IoError("close failed: " + path_.string());
}

BinaryReader::BinaryReader(const std::filesystem::path& path) : source_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + source_);
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0, std::ios::beg);
    buffer_.resize(static_cast<size_t>(size));
    if (size > 0) in.read(reinterpret_cast<char*>(buffer_.data()), size);
    if (!in) throw IoError("read failed: " + source_);
}

void BinaryReader::need(size_t count) {
    if (pos_ + count > buffer_.size()) {
        throw TruncatedError(source_ + ": truncated payload (need " + std::to_string(count) +
                             " bytes at offset " + std::to_string(pos_) + ", have " +
                             std::to_string(buffer_.size() - pos_) + ")");
    }
}

uint8_t BinaryReader::u8() {
    need(1);
    return buffer_[pos_++];
}

uint16_t BinaryReader::u16() {
    need(2);
    const uint16_t v = static_cast<uint16_t>(buffer_[pos_] | (buffer_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

uint32_t BinaryReader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buffer_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

int32_t BinaryReader::i32() { return static_cast<int32_t>(u32()); }

float BinaryReader::f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void BinaryReader::bytes(void* dst, size_t size) {
    need(size);
    std::memcpy(dst, buffer_.data() + pos_, size);
    pos_ += size;
}

void BinaryReader::expect_magic(const char tag[4], const std::string& format_name) {
    need(4);
    if (std::memcmp(buffer_.data() + pos_, tag, 4) != 0) {
        throw BadMagicError(source_ + ": not a " + format_name + " file (bad magic)");
    }
    pos_ += 4;
}

}  // namespace gridflow
