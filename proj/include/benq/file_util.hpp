#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <system_error>
#include <unistd.h>

#include "error.hpp"

namespace benq {

/// Writes through a temporary sibling and renames into place, so readers
/// never observe a partially written file.
class AtomicFileWriter {
public:
    explicit AtomicFileWriter(std::filesystem::path target)
        : target_(std::move(target)),
          tmp_(target_.string() + ".tmp." + std::to_string(::getpid())),
          out_(tmp_, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot open '" + tmp_.string() + "' for writing");
    }

    AtomicFileWriter(const AtomicFileWriter&) = delete;
    AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;

    ~AtomicFileWriter() {
        if (!committed_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

    void write(std::span<const std::byte> bytes) {
        out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out_) throw IoError("write failed for '" + tmp_.string() + "'");
    }
    void write(std::string_view s) { write(std::as_bytes(std::span(s.data(), s.size()))); }
    void zeros(std::size_t n) {
        static constexpr char kZero[8] = {};
        while (n > 0) {
            const std::size_t k = std::min<std::size_t>(n, sizeof kZero);
            out_.write(kZero, static_cast<std::streamsize>(k));
            n -= k;
        }
        if (!out_) throw IoError("write failed for '" + tmp_.string() + "'");
    }

    void commit() {
        out_.flush();
        out_.close();
        if (!out_) throw IoError("write failed for '" + tmp_.string() + "'");
        std::error_code ec;
        std::filesystem::rename(tmp_, target_, ec);
        if (ec) throw IoError("cannot rename '" + tmp_.string() + "' to '" + target_.string() + "': " + ec.message());
        committed_ = true;
    }

private:
    std::filesystem::path target_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    AtomicFileWriter w(path);
    w.write(content);
    w.commit();
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace benq
